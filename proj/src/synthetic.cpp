#include "hired/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>

#include "hired/csv.hpp"
#include "hired/error.hpp"

namespace hired {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date, and back.
long days_from_civil(long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, long& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

}  // namespace

std::string add_days(const std::string& start, long days) {
    long y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(start.c_str(), "%ld-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31) {
        throw ConfigError("start date '" + start + "' is not YYYY-MM-DD");
    }
    civil_from_days(days_from_civil(y, m, d) + days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y, m, d);
    return buf;
}

SyntheticData generate_synthetic(const SyntheticOptions& o) {
    if (o.groups == 0 || o.leaves_per_group == 0 || o.steps == 0 || o.periods.empty()) {
        throw ConfigError("synthetic data needs at least one group, leaf, step and basis");
    }
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto T = static_cast<Eigen::Index>(o.steps);
    const auto B = static_cast<Eigen::Index>(o.periods.size());
    SyntheticData data;
    for (Eigen::Index t = 0; t < T; ++t) {
        data.time_index.push_back(add_days(o.start_date, static_cast<long>(t)));
    }

    data.bases.resize(T, B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const double period = o.periods[static_cast<std::size_t>(b)];
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (Eigen::Index t = 0; t < T; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / period + phase;
            // Odd bases are peaked rather than sinusoidal so that two bases
            // sharing a period are not collinear. Both shapes have mean zero.
            const double peak = 0.5 * (1.0 + std::cos(angle));
            const double wave = b % 2 == 0 ? std::sin(angle) : 2.0 * peak * peak * peak - 0.625;
            data.bases(t, b) = 1.0 + 0.6 * wave;
        }
    }

    const std::size_t leaves = o.groups * o.leaves_per_group;
    data.weights.resize(static_cast<Eigen::Index>(leaves), B);
    data.leaf_values.resize(T, static_cast<Eigen::Index>(leaves));
    for (std::size_t g = 0; g < o.groups; ++g) {
        const std::string group = "g" + std::to_string(g);
        data.edges.push_back({group, "total"});
        Eigen::VectorXd center(B);
        for (Eigen::Index b = 0; b < B; ++b) {
            center(b) = std::exp(o.group_spread * normal(rng));
        }
        for (std::size_t k = 0; k < o.leaves_per_group; ++k) {
            const std::size_t leaf = g * o.leaves_per_group + k;
            const std::string name = group + "_s" + std::to_string(k);
            data.edges.push_back({name, group});
            data.leaf_names.push_back(name);
            const double level = 5.0 + 10.0 * unit(rng);
            const auto li = static_cast<Eigen::Index>(leaf);
            for (Eigen::Index b = 0; b < B; ++b) {
                data.weights(li, b) = level * center(b) * std::exp(o.leaf_spread * normal(rng)) / static_cast<double>(B);
            }
            const Eigen::VectorXd signal = data.bases * data.weights.row(li).transpose();
            const double scale = o.noise * signal.mean();
            for (Eigen::Index t = 0; t < T; ++t) {
                data.leaf_values(t, li) = std::max(0.0, signal(t) + scale * normal(rng));
            }
        }
    }
    return data;
}

TimePanel synthetic_panel(const SyntheticData& data) {
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::from_edges(data.edges));
    Eigen::MatrixXd ordered(data.leaf_values.rows(), static_cast<Eigen::Index>(tree->leaves().size()));
    for (std::size_t k = 0; k < tree->leaves().size(); ++k) {
        const std::string& name = tree->name(tree->leaves()[k]);
        const auto it = std::find(data.leaf_names.begin(), data.leaf_names.end(), name);
        ordered.col(static_cast<Eigen::Index>(k)) =
            data.leaf_values.col(static_cast<Eigen::Index>(it - data.leaf_names.begin()));
    }
    const Eigen::MatrixXd raw = aggregate_bottom_up(ordered, *tree, AggregationMode::Sum);
    return make_panel(raw, tree, data.time_index);
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const TimePanel panel = synthetic_panel(data);
    const Eigen::MatrixXd raw = rescale_to_sum_property(panel.values, *panel.tree);
    {
        std::ofstream out(std::filesystem::path(dir) / "hierarchy.csv");
        if (!out) {
            throw DataError("cannot write to '" + dir + "'");
        }
        out << "child,parent\n";
        for (const auto& e : data.edges) {
            out << e.child << ',' << e.parent << '\n';
        }
    }
    std::ofstream out(std::filesystem::path(dir) / "values.csv");
    if (!out) {
        throw DataError("cannot write to '" + dir + "'");
    }
    out << "date";
    for (const auto& name : panel.tree->names()) {
        out << ',' << name;
    }
    out << '\n';
    for (Eigen::Index t = 0; t < raw.rows(); ++t) {
        out << panel.time_index[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < raw.cols(); ++j) {
            out << ',' << csv::format_double(raw(t, j));
        }
        out << '\n';
    }
}

}  // namespace hired
