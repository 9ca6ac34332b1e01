#include "hired/trainer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hired/csv.hpp"
#include "hired/error.hpp"

namespace hired {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<Tensor> flatten(const ModelParams& p) {
    std::vector<Tensor> out;
    visit_params([&](const std::string&, const Tensor& t) { out.push_back(t); }, p);
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) {
        throw ConfigError("initial_lr must be positive");
    }
    if (!(decay_rate > 0.0) || !std::isfinite(decay_rate)) {
        throw ConfigError("decay_rate must be positive");
    }
    if (decay_interval == 0 || epochs == 0 || batch_size == 0 || patience == 0) {
        throw ConfigError("decay_interval, epochs, batch_size and patience must be positive");
    }
    if (patience > epochs) {
        throw ConfigError("patience (" + std::to_string(patience) + ") exceeds epochs (" + std::to_string(epochs) +
                          ")");
    }
    if (!(clip_norm > 0.0)) {
        throw ConfigError("clip_norm must be positive");
    }
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
    const auto k = static_cast<double>(epoch / config.decay_interval);
    return config.initial_lr * std::pow(config.decay_rate, k);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape()) {
            throw ShapeError("adam_step: parameter " + std::to_string(i) + " has shape " +
                             params[i]->shape_string() + " but its gradient has " + grads[i].shape_string());
        }
        if (!grads[i].all_finite()) {
            throw NumericError("non-finite gradient for parameter " + std::to_string(i) + " at Adam step " +
                               std::to_string(state.step + 1));
        }
    }
    if (state.m.empty()) {
        for (const auto& g : grads) {
            state.m.emplace_back(g.rows(), g.cols());
            state.v.emplace_back(g.rows(), g.cols());
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto g = grads[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr) {
    std::vector<Tensor*> ptrs;
    for (auto& p : params) {
        ptrs.push_back(&p);
    }
    adam_step(ptrs, grads, state, lr);
}

double global_norm(std::span<const Tensor> tensors) {
    double sq = 0.0;
    for (const auto& t : tensors) {
        sq += t.map().squaredNorm();
    }
    return std::sqrt(sq);
}

bool clip_global_norm(std::span<Tensor> tensors, double max_norm) {
    const double norm = global_norm(tensors);
    if (!(norm > max_norm)) {
        return false;
    }
    const double factor = max_norm / norm;
    for (auto& t : tensors) {
        t.map() *= factor;
    }
    return true;
}

MetricScale parse_metric_scale(const std::string& s) {
    if (s == "rescaled") return MetricScale::Rescaled;
    if (s == "raw") return MetricScale::Raw;
    throw ConfigError("unknown metric scale '" + s + "' (expected rescaled or raw)");
}

const std::vector<ForecastWindow>& Dataset::windows(Segment s) const {
    switch (s) {
        case Segment::Train: return train;
        case Segment::Val: return val;
        case Segment::Test: return test;
    }
    return test;
}

Dataset prepare_dataset(const TimePanel& raw, const SplitSpec& split, const ModelConfig& model,
                        StandardizeScope scope) {
    model.validate();
    split.validate(raw.steps());
    Dataset d;
    d.split = split;
    d.shape = WindowShape{model.history, model.horizon, 1};
    d.panel = standardize(raw, split, scope);
    d.representatives = select_representatives(d.panel, split, model.representatives);
    d.z = build_z(d.panel, d.representatives);
    d.train = make_windows(d.panel, split, d.shape, Segment::Train);
    d.val = make_windows(d.panel, split, d.shape, Segment::Val);
    d.test = make_windows(d.panel, split, d.shape, Segment::Test);
    return d;
}

SegmentForecast forecast_segment(const ModelParams& params, const ModelConfig& config, const Dataset& data,
                                 Segment segment, MetricScale scale) {
    const auto& windows = data.windows(segment);
    const std::size_t N = data.panel.series();
    const std::size_t F = config.horizon;
    const std::size_t k = windows.size() / N;
    BatchInputs inputs = prepare_batch(data.panel, data.z, windows, config);
    const Eigen::MatrixXd pred = predict(params, inputs, config);
    Eigen::MatrixXd p(static_cast<Eigen::Index>(k * F), static_cast<Eigen::Index>(N));
    Eigen::MatrixXd y(p.rows(), p.cols());
    SegmentForecast out;
    for (std::size_t b = 0; b < windows.size(); ++b) {
        const std::size_t j = b / N;
        const std::size_t i = windows[b].series;
        if (b % N == 0) {
            out.origins.push_back(windows[b].origin);
        }
        for (std::size_t f = 0; f < F; ++f) {
            const auto row = static_cast<Eigen::Index>(j * F + f);
            p(row, static_cast<Eigen::Index>(i)) = pred(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f));
            y(row, static_cast<Eigen::Index>(i)) = inputs.target(b, f);
        }
    }
    out.prediction = inverse_standardize(p, data.panel.scaler);
    out.truth = inverse_standardize(y, data.panel.scaler);
    if (scale == MetricScale::Raw) {
        out.prediction = rescale_to_sum_property(out.prediction, *data.panel.tree);
        out.truth = rescale_to_sum_property(out.truth, *data.panel.tree);
    }
    return out;
}

MetricReport evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& data, Segment segment,
                      MetricScale scale) {
    const SegmentForecast fc = forecast_segment(params, config, data, segment, scale);
    return per_level_report(fc.truth, fc.prediction, *data.panel.tree);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os << "epoch,train_loss,val_mean_wape,lr\n";
    for (const auto& r : history) {
        os << r.epoch << ',' << csv::format_double(r.train_loss) << ',' << csv::format_double(r.val_mean_wape) << ','
           << csv::format_double(r.lr) << '\n';
    }
    return os.str();
}

TrainResult train_loop(ModelParams params, const TrainConfig& config, const EpochFn& run_epoch,
                       const ValidateFn& validate, const LogFn& log) {
    config.validate();
    TrainResult result;
    result.best = params;
    result.best_val = std::numeric_limits<double>::quiet_NaN();
    AdamState state;
    std::size_t since_best = 0;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        const double lr = learning_rate(config, e);
        EpochRecord rec = run_epoch(params, state, lr, e);
        rec.epoch = e + 1;
        rec.lr = lr;
        rec.val_mean_wape = validate(params);
        result.history.push_back(rec);
        const bool improved =
            !std::isnan(rec.val_mean_wape) && (result.best_epoch == 0 || rec.val_mean_wape < result.best_val);
        if (log) {
            std::ostringstream os;
            os << "epoch " << rec.epoch << " loss " << rec.train_loss << " val_mean_wape " << rec.val_mean_wape
               << " lr " << lr;
            if (rec.clipped_steps > 0) {
                os << " clipped " << rec.clipped_steps;
            }
            if (improved) {
                os << " *";
            }
            log(os.str());
        }
        if (improved) {
            result.best = params;
            result.best_val = rec.val_mean_wape;
            result.best_epoch = rec.epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.stopped_early = e + 1 < config.epochs;
            break;
        }
    }
    return result;
}

TrainResult train(const ModelConfig& model, const TrainConfig& config, const Dataset& data, const LogFn& log) {
    config.validate();
    model.validate();
    const HierarchyTree& tree = *data.panel.tree;
    ModelParams init = init_params(model, data.panel.covariate_dim(), data.panel.series(), config.seed);

    auto run_epoch = [&](ModelParams& params, AdamState& state, double lr, std::size_t epoch) {
        BatchIterator batches(data.train, config.batch_size, splitmix64(config.seed ^ splitmix64(epoch + 1)));
        std::vector<Tensor*> targets = parameter_tensors(params);
        EpochRecord rec;
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t b = 0; b < batches.batch_count(); ++b) {
            BatchInputs inputs = prepare_batch(data.panel, data.z, batches.batch(b), model);
            Tape tape;
            ModelParamsT<Var> bound = bind(params, tape, true);
            LossTerms terms = loss(bound, inputs, tree, model, tape);
            const double value = terms.total.value().item();
            if (!std::isfinite(value)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                                   std::to_string(b + 1));
            }
            tape.backward(terms.total);
            std::vector<Tensor> grads = flatten(collect_gradients(bound, tape));
            if (clip_global_norm(grads, config.clip_norm)) {
                ++rec.clipped_steps;
            }
            try {
                adam_step(targets, grads, state, lr);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) + ", step " +
                                   std::to_string(b + 1) + ")");
            }
            total += value;
            ++steps;
        }
        rec.train_loss = steps ? total / static_cast<double>(steps) : 0.0;
        if (params.embeddings) {
            rec.regularizer = embedding_regularizer(*params.embeddings, tree);
        }
        return rec;
    };
    auto validate = [&](const ModelParams& params) {
        return evaluate(params, model, data, Segment::Val).mean_wape;
    };
    return train_loop(std::move(init), config, run_epoch, validate, log);
}

}  // namespace hired
