#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "hired/hierarchy.hpp"
#include "hired/panel.hpp"

namespace hired {

/// Three-level hierarchy (root, groups, leaves) whose leaves are noisy
/// mixtures of a few shared periodic bases.
struct SyntheticOptions {
    std::size_t groups = 4;
    std::size_t leaves_per_group = 10;
    std::size_t steps = 400;
    std::vector<double> periods = {7.0, 7.0, 30.0, 91.0};
    double group_spread = 0.6;   // spread of group mixing weights around 1
    double leaf_spread = 0.08;   // spread of leaf weights around their group's
    double noise = 0.25;         // leaf noise relative to the leaf's mean level
    std::string start_date = "2020-01-01";
    std::uint64_t seed = 7;
};

struct SyntheticData {
    std::vector<Edge> edges;                // child,parent
    std::vector<std::string> leaf_names;
    std::vector<std::string> time_index;    // ISO dates
    Eigen::MatrixXd bases;                  // T x B, positive
    Eigen::MatrixXd weights;                // leaves x B
    Eigen::MatrixXd leaf_values;            // T x leaves
};

SyntheticData generate_synthetic(const SyntheticOptions& options);

/// Sum-coherent T x N raw matrix for the tree built from `data.edges`.
TimePanel synthetic_panel(const SyntheticData& data);

/// Writes `values.csv` (every node, sum-coherent) and `hierarchy.csv` to `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

/// ISO date `days` after `start` (YYYY-MM-DD).
std::string add_days(const std::string& start, long days);

}  // namespace hired
