#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <set>

#include "helpers.hpp"
#include "hired/panel.hpp"

using namespace hired;
using hired::testing::temp_dir;
using hired::testing::write_text;

namespace {

std::vector<std::string> labels(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t t = 0; t < n; ++t) {
        out.push_back(std::to_string(t + 1));
    }
    return out;
}

TimePanel star_panel(std::size_t steps, std::uint64_t seed) {
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::from_edges({{"b", "a"}, {"c", "a"}}));
    std::mt19937_64 rng(seed);
    const Eigen::MatrixXd leaves = hired::testing::random_matrix(static_cast<Eigen::Index>(steps), 2, rng, 1.0, 5.0);
    return make_panel(aggregate_bottom_up(leaves, *tree, AggregationMode::Sum), tree, labels(steps));
}

}  // namespace

TEST_CASE("leaf-only csv synthesizes internal nodes") {
    const auto dir = temp_dir("leaf_only");
    write_text(dir / "h.csv", "child,parent\nb,a\nc,a\n");
    write_text(dir / "v.csv", "t,b,c\n1,2,4\n2,1,3\n");
    PanelSource src{(dir / "v.csv").string(), (dir / "h.csv").string(), std::nullopt, true};
    const TimePanel p = load_panel(src);
    CHECK(p.series() == 3);
    CHECK(p.steps() == 2);
    CHECK(p.values(0, 0) == 3.0);
    CHECK(p.values(1, 0) == 2.0);
    CHECK_FALSE(p.provenance.empty());
}

TEST_CASE("full coherent csv is rescaled") {
    const auto dir = temp_dir("full");
    write_text(dir / "h.csv", "b,a\nc,a\n");
    write_text(dir / "v.csv", "t,c,a,b\n1,4,6,2\n");
    PanelSource src{(dir / "v.csv").string(), (dir / "h.csv").string(), std::nullopt, false};
    const TimePanel p = load_panel(src);
    CHECK(p.values(0, 0) == 3.0);
    CHECK(p.values(0, 1) == 2.0);
    CHECK(p.values(0, 2) == 4.0);
}

TEST_CASE("ingestion errors") {
    const auto dir = temp_dir("ingest_errors");
    write_text(dir / "h.csv", "b,a\nc,a\n");
    PanelSource src{(dir / "v.csv").string(), (dir / "h.csv").string(), std::nullopt, false};

    write_text(dir / "v.csv", "t,b,c\n1,2,4\n2,NaN,3\n");
    try {
        load_panel(src);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(e.line() == 3);
    }

    src.missing = MissingPolicy::ForwardFill;
    const TimePanel filled = load_panel(src);
    CHECK(filled.values(1, 1) == 2.0);
    CHECK(filled.provenance.size() == 2);
    src.missing = MissingPolicy::Reject;

    write_text(dir / "v.csv", "t,b,c\n1,2,x\n");
    try {
        load_panel(src);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(e.line() == 2);
    }

    write_text(dir / "v.csv", "t,b\n1,2\n");
    CHECK_THROWS_AS(load_panel(src), DataError);

    write_text(dir / "v.csv", "t,a,b,c\n1,7,2,4\n");
    CHECK_THROWS_AS(load_panel(src), DataError);

    write_text(dir / "v.csv", "t,a,b,c\n1,6,2,4\n");
    write_text(dir / "x.csv", "t,holiday\n2,1\n");
    src.covariates_path = (dir / "x.csv").string();
    CHECK_THROWS_AS(load_panel(src), DataError);
    write_text(dir / "x.csv", "t,holiday\n1,1\n");
    const TimePanel with_cov = load_panel(src);
    CHECK(with_cov.covariate_dim() == 1);
    CHECK(with_cov.covariate_names == std::vector<std::string>{"holiday"});
}

TEST_CASE("calendar features") {
    std::vector<std::string> names;
    const Eigen::MatrixXd x = calendar_features({"2020-01-01", "2020-01-02", "2020-01-05"}, &names);
    REQUIRE(x.cols() == 8);
    CHECK(x(0, 3) == 1.0);  // Wednesday
    CHECK(x(1, 4) == 1.0);
    CHECK(x(2, 0) == 1.0);  // Sunday
    CHECK(x(2, 7) == 1.0);
    CHECK(names.back() == "position");
    const Eigen::MatrixXd m = calendar_features({"1998-01", "1998-02"});
    REQUIRE(m.cols() == 13);
    CHECK(m(1, 1) == 1.0);
    CHECK(calendar_features(labels(9)).cols() == 8);
}

TEST_CASE("per-series standardization uses population statistics") {
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::single("s"));
    Eigen::MatrixXd v(3, 1);
    v << 1, 2, 3;
    const TimePanel p = make_panel(v, tree, {"1", "2", "3"});
    SplitSpec split{3, 4, 4, 5, 5, 1};
    // standardize validates against T, so use a longer panel with train_end = 3.
    Eigen::MatrixXd v5(5, 1);
    v5 << 1, 2, 3, 9, 9;
    const TimePanel p5 = make_panel(v5, tree, labels(5));
    const TimePanel s = standardize(p5, split, StandardizeScope::PerSeries);
    CHECK(s.scaler.mean[0] == doctest::Approx(2.0));
    CHECK(s.scaler.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(s.values(1, 0) == doctest::Approx(0.0));
    CHECK(s.values(0, 0) == doctest::Approx(-s.values(2, 0)));
    CHECK(p.steps() == 3);
}

TEST_CASE("constant series get unit std") {
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::single("s"));
    const TimePanel p = make_panel(Eigen::MatrixXd::Constant(5, 1, 5.0), tree, labels(5));
    const TimePanel s = standardize(p, SplitSpec{3, 4, 4, 5, 5, 1}, StandardizeScope::PerSeries);
    CHECK(s.scaler.std[0] == 1.0);
    CHECK(s.values.isZero(0.0));
}

TEST_CASE("standardization round trip and idempotence") {
    const TimePanel p = star_panel(40, 2);
    const SplitSpec split{30, 31, 35, 36, 40, 1};
    for (auto scope : {StandardizeScope::Global, StandardizeScope::PerSeries}) {
        const TimePanel s = standardize(p, split, scope);
        const Eigen::MatrixXd back = inverse_standardize(s.values, s.scaler);
        CHECK(((back - p.values).array().abs() / p.values.array().abs()).maxCoeff() < 1e-10);
        const TimePanel again = standardize(s, split, scope);
        CHECK((again.values - s.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    const TimePanel g = standardize(p, split, StandardizeScope::Global);
    const Eigen::MatrixXd leaves_mean = (g.values.col(1) + g.values.col(2)) / 2.0;
    CHECK((g.values.col(0) - leaves_mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("splits parse and validate") {
    const SplitSpec s = SplitSpec::parse("300:301-350:351-400", 3);
    CHECK(s.train_end == 300);
    CHECK(s.test_end == 400);
    CHECK(s.to_string() == "300:301-350:351-400");
    CHECK_THROWS_AS(SplitSpec::parse("300-301:350", 1), ConfigError);
    CHECK_THROWS_AS(s.validate(399), ConfigError);
    CHECK_THROWS_AS(SplitSpec::parse("10:10-12:13-14", 1).validate(20), ConfigError);
    CHECK_NOTHROW(s.validate(400));
}

TEST_CASE("train window count") {
    const TimePanel p = star_panel(20, 1);
    const SplitSpec split{10, 11, 15, 16, 20, 1};
    const auto w = make_windows(p, split, {3, 2, 1}, Segment::Train);
    CHECK(w.size() == (10 - 3 - 2 + 1) * 3);
    for (const auto& x : w) {
        CHECK(x.origin + 2 <= split.train_end);
        CHECK(x.origin >= 3);
    }
    CHECK(make_windows(p, split, {3, 2, 2}, Segment::Train).size() == 3 * 3);
}

TEST_CASE("rolling evaluation windows") {
    const TimePanel p = star_panel(30, 1);
    SplitSpec split{10, 11, 15, 16, 30, 1};
    const auto one = make_windows(p, split, {3, 2, 1}, Segment::Val);
    REQUIRE(one.size() == 3);
    CHECK(one[0].origin == 13);

    split.rolling_windows = 3;
    CHECK_THROWS_AS(make_windows(p, split, {3, 2, 1}, Segment::Val), ConfigError);
    const auto test = make_windows(p, split, {3, 2, 1}, Segment::Test);
    REQUIRE(test.size() == 9);
    CHECK(test[0].origin == 24);
    CHECK(test[3].origin == 26);
    CHECK(test[6].origin == 28);
    for (const auto& x : test) {
        CHECK(x.origin >= split.test_start - 1 + 3);
        CHECK(x.origin + 2 <= split.test_end);
    }
    split.rolling_windows = 7;
    CHECK_THROWS_AS(make_windows(p, split, {3, 2, 1}, Segment::Test), ConfigError);
}

TEST_CASE("materialized window slices only its own series") {
    TimePanel p = star_panel(20, 3);
    const Eigen::MatrixXd z = p.values.col(2);
    const WindowShape shape{4, 2, 1};
    const ForecastWindow w{1, 8};
    const WindowData d = materialize(p, z, w, shape);
    CHECK(d.history == p.values.block(4, 1, 4, 1));
    CHECK(d.target == p.values.block(8, 1, 2, 1));
    CHECK(d.z_history == z.middleRows(4, 4));
    CHECK(d.cov_future == p.covariates.middleRows(8, 2));
    p.values.col(0).setConstant(99.0);
    const WindowData e = materialize(p, z, w, shape);
    CHECK(e.history == d.history);
    CHECK(e.target == d.target);
    CHECK_THROWS_AS(materialize(p, z, {0, 3}, shape), ShapeError);
}

TEST_CASE("batch iterator") {
    std::vector<ForecastWindow> windows;
    for (std::size_t i = 0; i < 1000; ++i) {
        windows.push_back({i, 0});
    }
    BatchIterator it(windows, 512, 7);
    CHECK(it.batch_count() == 2);
    CHECK(it.next().size() == 512);
    CHECK(it.next().size() == 488);
    CHECK(it.next().empty());

    BatchIterator a(windows, 100, 42), b(windows, 100, 42), c(windows, 100, 43);
    std::set<std::size_t> seen;
    bool differs = false;
    for (std::size_t i = 0; i < a.batch_count(); ++i) {
        const auto x = a.batch(i), y = b.batch(i), z = c.batch(i);
        for (std::size_t j = 0; j < x.size(); ++j) {
            CHECK(x[j] == y[j]);
            differs = differs || !(x[j] == z[j]);
            seen.insert(x[j].series);
        }
    }
    CHECK(differs);
    CHECK(seen.size() == 1000);
    CHECK(BatchIterator(windows, 5000, 1).batch_count() == 1);
}
