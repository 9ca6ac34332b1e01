#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hired/csv.hpp"
#include "hired/hierarchy.hpp"
#include "hired/metrics.hpp"

using namespace hired;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

/// Plain-loop reference of the level-pooled WAPE.
double pooled_wape(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p, const std::vector<std::size_t>& cols) {
    double num = 0.0, den = 0.0;
    for (std::size_t c : cols) {
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            num += std::abs(p(r, static_cast<Eigen::Index>(c)) - y(r, static_cast<Eigen::Index>(c)));
            den += std::abs(y(r, static_cast<Eigen::Index>(c)));
        }
    }
    return num / den;
}

}  // namespace

TEST_CASE("wape hand cases") {
    CHECK(wape(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(std::abs(wape(vec({1, 2, 3}), vec({2, 2, 2})) - 1.0 / 3.0) < 1e-12);
    CHECK(std::isnan(wape(vec({0, 0}), vec({1, 2}))));
    CHECK_THROWS_AS(wape(vec({1}), vec({1, 2})), ShapeError);
}

TEST_CASE("smape hand cases") {
    CHECK(smape(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(std::abs(smape(vec({1}), vec({3})) - 1.0) < 1e-12);
    CHECK(smape(vec({0}), vec({0})) == 0.0);
    CHECK(std::abs(smape(vec({0, 1}), vec({0, 3})) - 0.5) < 1e-12);
    CHECK(smape(vec({0}), vec({5})) == 2.0);
}

TEST_CASE("metric scale invariance and bounds") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> y(1 + rep % 17), p(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = u(rng);
            p[i] = u(rng);
        }
        const double c = scale(rng);
        std::vector<double> yc(y), pc(p);
        for (std::size_t i = 0; i < y.size(); ++i) {
            yc[i] *= c;
            pc[i] *= c;
        }
        const double w = wape(y, p), s = smape(y, p);
        CHECK(w >= 0.0);
        CHECK(s >= 0.0);
        CHECK(s <= 2.0);
        CHECK(std::abs(wape(yc, pc) - w) <= 1e-12 * std::max(1.0, w));
        CHECK(std::abs(smape(yc, pc) - s) <= 1e-12);
    }
}

TEST_CASE("single-node tree has one level") {
    const auto tree = HierarchyTree::single("only");
    Eigen::MatrixXd y(2, 1), p(2, 1);
    y << 1, 2;
    p << 2, 2;
    const auto r = per_level_report(y, p, tree);
    REQUIRE(r.levels.size() == 1);
    CHECK(r.mean_wape == r.levels[0].wape);
    CHECK(r.mean_smape == r.levels[0].smape);
    CHECK(r.levels[0].coherence == 0.0);
}

TEST_CASE("per-level report pools series and averages levels") {
    std::mt19937_64 rng(4);
    const auto tree = hired::testing::two_level_tree(3, 4);
    const auto y = hired::testing::random_matrix(6, static_cast<Eigen::Index>(tree.node_count()), rng, 1.0, 3.0);
    const auto p = hired::testing::random_matrix(6, static_cast<Eigen::Index>(tree.node_count()), rng, 1.0, 3.0);
    const auto r = per_level_report(y, p, tree);
    REQUIRE(r.levels.size() == 3);
    double mean = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(r.levels[l].level == l);
        CHECK(std::abs(r.levels[l].wape - pooled_wape(y, p, tree.nodes_at_level(l))) < 1e-12);
        mean += r.levels[l].wape / 3.0;
    }
    CHECK(std::abs(r.mean_wape - mean) < 1e-15);
    CHECK(r.levels[2].coherence == 0.0);

    std::vector<double> ly, lp;
    for (std::size_t leaf : tree.leaves()) {
        for (Eigen::Index t = 0; t < y.rows(); ++t) {
            ly.push_back(y(t, static_cast<Eigen::Index>(leaf)));
            lp.push_back(p(t, static_cast<Eigen::Index>(leaf)));
        }
    }
    CHECK(std::abs(r.levels[2].wape - wape(ly, lp)) < 1e-15);
    CHECK(std::abs(r.levels[2].smape - smape(ly, lp)) < 1e-15);
}

TEST_CASE("perfect and coherent predictions") {
    std::mt19937_64 rng(8);
    const auto tree = hired::testing::two_level_tree(2, 3);
    const auto leaves = hired::testing::random_matrix(4, 6, rng, 1.0, 2.0);
    const Eigen::MatrixXd y = aggregate_bottom_up(leaves, tree, AggregationMode::Mean);
    const auto r = per_level_report(y, y, tree);
    for (const auto& l : r.levels) {
        CHECK(l.wape == 0.0);
        CHECK(l.smape == 0.0);
        CHECK(l.coherence < 1e-15);
    }
}

TEST_CASE("five-level report layout") {
    const auto tree = HierarchyTree::from_edges({{"b", "a"}, {"c", "b"}, {"d", "c"}, {"e", "d"}, {"f", "d"}});
    const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(2, 6, 1.0);
    const auto r = per_level_report(y, y, tree);
    CHECK(r.levels.size() == 5);
    const std::string csv = r.to_csv();
    CHECK(csv.rfind("level,wape,smape,coherence\n0,", 0) == 0);
    CHECK(csv.find("\nmean,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("all-zero level is flagged and left out of the mean") {
    const auto tree = HierarchyTree::from_edges({{"B", "A"}, {"C", "A"}});
    Eigen::MatrixXd y(1, 3), p(1, 3);
    y << 0, 0, 0;
    p << 1, 1, 1;
    const auto r = per_level_report(y, p, tree);
    CHECK_FALSE(r.levels[0].wape_defined);
    CHECK(std::isnan(r.mean_wape));
    CHECK(r.mean_smape == 2.0);
}

TEST_CASE("csv helpers") {
    CHECK(csv::split_line("a, b ,\"c,d\"\r") == std::vector<std::string>{"a", "b", "c,d"});
    double v = 0.0;
    CHECK(csv::parse_number("1.5e3", v));
    CHECK(v == 1500.0);
    CHECK(csv::parse_number("", v));
    CHECK(std::isnan(v));
    CHECK_FALSE(csv::parse_number("abc", v));
    const double x = 0.1 + 0.2;
    double back = 0.0;
    REQUIRE(csv::parse_number(csv::format_double(x), back));
    CHECK(back == x);
}
