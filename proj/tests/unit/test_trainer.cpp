#include <doctest.h>

#include <cmath>
#include <limits>

#include "model_fixture.hpp"
#include "hired/trainer.hpp"

using namespace hired;
using namespace hired::testing;

namespace {

TrainConfig quick_train() {
    TrainConfig c;
    c.initial_lr = 0.01;
    c.epochs = 3;
    c.batch_size = 16;
    c.patience = 3;
    c.decay_interval = 2;
    c.seed = 4;
    return c;
}

double pooled_wape(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred, const std::vector<std::size_t>& nodes) {
    double num = 0.0, den = 0.0;
    for (std::size_t n : nodes) {
        const auto c = static_cast<Eigen::Index>(n);
        num += (truth.col(c) - pred.col(c)).cwiseAbs().sum();
        den += truth.col(c).cwiseAbs().sum();
    }
    return num / den;
}

}  // namespace

TEST_CASE("adam follows the reference trace on x^2") {
    const double expected[] = {0.9000000005, 0.8004122286917928, 0.7015862729460303, 0.603939060573746,
                               0.507963659264342};
    std::vector<Tensor> x{Tensor::scalar(1.0)};
    AdamState state;
    for (double e : expected) {
        adam_step(x, {Tensor::scalar(2.0 * x[0].item())}, state, 0.1);
        CHECK(x[0].item() == doctest::Approx(e).epsilon(1e-12));
    }
    CHECK(state.step == 5);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    std::vector<Tensor> x{Tensor(2, 3, 1.5)};
    AdamState state;
    for (int i = 0; i < 4; ++i) {
        adam_step(x, {Tensor(2, 3)}, state, 0.5);
    }
    CHECK(x[0] == Tensor(2, 3, 1.5));
}

TEST_CASE("adam step size tends to lr for a constant gradient") {
    for (double g : {-3.0, 0.01, 250.0}) {
        std::vector<Tensor> x{Tensor::scalar(0.0)};
        AdamState state;
        double prev = 0.0;
        for (int i = 0; i < 50; ++i) {
            adam_step(x, {Tensor::scalar(g)}, state, 0.02);
            const double step = std::abs(x[0].item() - prev);
            CHECK(step == doctest::Approx(0.02).epsilon(1e-6));
            CHECK((x[0].item() - prev) * g < 0.0);
            prev = x[0].item();
        }
    }
}

TEST_CASE("adam rejects non-finite gradients without touching state") {
    std::vector<Tensor> x{Tensor::scalar(1.0), Tensor(1, 2, 2.0)};
    AdamState state;
    adam_step(x, {Tensor::scalar(1.0), Tensor(1, 2, 1.0)}, state, 0.1);
    const auto before = x;
    const auto m = state.m;
    Tensor bad(1, 2, 1.0);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(x, {Tensor::scalar(1.0), bad}, state, 0.1), NumericError);
    bad[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(x, {Tensor::scalar(1.0), bad}, state, 0.1), NumericError);
    CHECK(x == before);
    CHECK(state.m == m);
    CHECK(state.step == 1);
    CHECK_THROWS_AS(adam_step(x, {Tensor::scalar(1.0)}, state, 0.1), ShapeError);
}

TEST_CASE("learning rate decays stepwise") {
    TrainConfig c;
    c.initial_lr = 0.08;
    c.decay_rate = 0.5;
    c.decay_interval = 6;
    CHECK(learning_rate(c, 0) == 0.08);
    CHECK(learning_rate(c, 5) == 0.08);
    CHECK(learning_rate(c, 6) == 0.04);
    CHECK(learning_rate(c, 13) == doctest::Approx(0.25 * 0.08).epsilon(1e-15));
    CHECK(learning_rate(c, 18) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.patience = c.epochs + 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.initial_lr = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("global norm clipping") {
    std::vector<Tensor> t{Tensor(1, 2, 3.0), Tensor(1, 1, 4.0)};
    CHECK(global_norm(t) == doctest::Approx(std::sqrt(34.0)).epsilon(1e-14));
    std::vector<Tensor> u{Tensor(1, 1, 3.0), Tensor(1, 1, 4.0)};
    CHECK(global_norm(u) == 5.0);
    CHECK(clip_global_norm(u, 10.0) == false);
    CHECK(u[1].item() == 4.0);
    CHECK(clip_global_norm(u, 1.0));
    CHECK(global_norm(u) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(u[0].item() / u[1].item() == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("train loop stops after patience epochs without improvement") {
    const auto fx = small_fixture(1);
    const auto params = init_params(fx.config, fx.panel.covariate_dim(), 7, 0);
    TrainConfig c = quick_train();
    c.epochs = 10;
    c.patience = 1;
    std::vector<double> scores{0.5, 0.7, 0.2};
    std::size_t calls = 0;
    const auto result = train_loop(
        params, c, [](ModelParams&, AdamState&, double, std::size_t) { return EpochRecord{}; },
        [&](const ModelParams&) { return scores[calls++]; });
    CHECK(result.history.size() == 2);
    CHECK(result.stopped_early);
    CHECK(result.best_epoch == 1);
    CHECK(result.best_val == 0.5);
}

TEST_CASE("train loop keeps the best epoch's parameters") {
    const auto fx = small_fixture(2);
    const auto params = init_params(fx.config, fx.panel.covariate_dim(), 7, 0);
    TrainConfig c = quick_train();
    c.epochs = 6;
    c.patience = 6;
    const std::vector<double> scores{0.9, 0.4, std::nan(""), 0.4, 0.6, 0.5};
    std::vector<double> lrs;
    const auto result = train_loop(
        params, c,
        [&](ModelParams& p, AdamState&, double lr, std::size_t) {
            p.embeddings->fill(static_cast<double>(lrs.size()));
            lrs.push_back(lr);
            return EpochRecord{};
        },
        [&](const ModelParams&) { return scores[lrs.size() - 1]; });
    CHECK(result.history.size() == 6);
    CHECK_FALSE(result.stopped_early);
    CHECK(result.best_epoch == 2);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : result.history) {
        if (!std::isnan(r.val_mean_wape)) best = std::min(best, r.val_mean_wape);
    }
    CHECK(result.best_val == best);
    CHECK((*result.best.embeddings)[0] == 1.0);
    CHECK(lrs == std::vector<double>{0.01, 0.01, 0.005, 0.005, 0.0025, 0.0025});
    CHECK(result.history[3].lr == 0.005);
}

TEST_CASE("all-NaN validation never improves") {
    const auto fx = small_fixture(3);
    TrainConfig c = quick_train();
    c.patience = 2;
    const auto result = train_loop(
        init_params(fx.config, fx.panel.covariate_dim(), 7, 0), c,
        [](ModelParams&, AdamState&, double, std::size_t) { return EpochRecord{}; },
        [](const ModelParams&) { return std::nan(""); });
    CHECK(result.best_epoch == 0);
    CHECK(result.history.size() == 2);
}

TEST_CASE("prepared dataset") {
    const auto raw = small_raw_panel(5);
    const auto data = prepare_dataset(raw, small_split(), small_config());
    CHECK(data.representatives.indices.size() == 2);
    for (std::size_t r : data.representatives.indices) {
        CHECK(raw.tree->is_leaf(r));
    }
    CHECK(data.train.size() == (18 - 4 - 2 + 1) * 7);
    CHECK(data.val.size() == 7);
    CHECK(data.test.size() == 7);
    CHECK(&data.windows(Segment::Test) == &data.test);
    CHECK(data.z.rows() == 30);
}

TEST_CASE("persistence forecasts evaluate against the raw data") {
    const auto raw = small_raw_panel(6);
    const auto cfg = small_config();
    const auto data = prepare_dataset(raw, small_split(), cfg);
    auto params = init_params(cfg, data.panel.covariate_dim(), 7, 1);
    make_persistence(params);
    const auto fc = forecast_segment(params, cfg, data, Segment::Test);
    REQUIRE(fc.origins.size() == 1);
    const auto origin = static_cast<Eigen::Index>(fc.origins[0]);
    CHECK(fc.truth.rows() == 2);
    for (Eigen::Index n = 0; n < 7; ++n) {
        for (Eigen::Index f = 0; f < 2; ++f) {
            CHECK(fc.truth(f, n) == doctest::Approx(raw.values(origin + f, n)).epsilon(1e-12));
            CHECK(fc.prediction(f, n) == doctest::Approx(raw.values(origin - 1, n)).epsilon(1e-12));
        }
    }
    const auto report = evaluate(params, cfg, data, Segment::Test);
    const auto& tree = *raw.tree;
    for (std::size_t level = 0; level < tree.level_count(); ++level) {
        CHECK(report.levels[level].wape ==
              doctest::Approx(pooled_wape(fc.truth, fc.prediction, tree.nodes_at_level(level))).epsilon(1e-12));
    }
    const auto raw_report = evaluate(params, cfg, data, Segment::Test, MetricScale::Raw);
    CHECK(raw_report.levels.size() == report.levels.size());
}

TEST_CASE("forecasting the training truth gives zero error") {
    const auto raw = small_raw_panel(7);
    const auto cfg = small_config();
    const auto data = prepare_dataset(raw, small_split(), cfg);
    const auto fc = forecast_segment(init_params(cfg, data.panel.covariate_dim(), 7, 0), cfg, data, Segment::Val);
    const auto perfect = per_level_report(fc.truth, fc.truth, *raw.tree);
    CHECK(perfect.mean_wape == 0.0);
    CHECK(perfect.mean_smape == 0.0);
}

TEST_CASE("training is deterministic and improves on the start") {
    const auto raw = small_raw_panel(8);
    const auto cfg = small_config();
    const auto data = prepare_dataset(raw, small_split(), cfg);
    const auto a = train(cfg, quick_train(), data);
    const auto b = train(cfg, quick_train(), data);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_mean_wape == b.history[i].val_mean_wape);
    }
    CHECK(parameter_names(a.best) == parameter_names(b.best));
    visit_params([](const std::string&, const Tensor& x, const Tensor& y) { CHECK(x == y); }, a.best, b.best);
    CHECK(a.best_epoch >= 1);
    CHECK(std::isfinite(a.best_val));
    CHECK(all_finite(a.best));
    CHECK(history_csv(a.history).rfind("epoch,train_loss,val_mean_wape,lr\n", 0) == 0);

    auto other = quick_train();
    other.seed = 99;
    const auto c = train(cfg, other, data);
    CHECK(c.history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("metric scale names") {
    CHECK(parse_metric_scale("rescaled") == MetricScale::Rescaled);
    CHECK(parse_metric_scale("raw") == MetricScale::Raw);
    CHECK_THROWS_AS(parse_metric_scale("log"), ConfigError);
}
