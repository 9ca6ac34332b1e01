#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hired/panel.hpp"

namespace hired {

/// Representative series that make up the global state Z.
struct RepresentativeSet {
    std::vector<std::size_t> indices;    // node indices (column indices for spa_select)
    std::vector<double> residual_norms;  // Frobenius norm of the residual after each pick
};

/**
 * Successive projection algorithm for separable NMF column selection.
 *
 * Repeatedly picks the not-yet-selected column of largest residual l2 norm
 * (lowest index on ties) and projects every column onto the orthogonal
 * complement of the pick. Returned indices are column positions in `matrix`.
 */
RepresentativeSet spa_select(const Eigen::MatrixXd& matrix, std::size_t rank);

/// Shifts each column by its minimum (so it is nonnegative) and scales it to
/// unit l2 norm. All-constant columns become zero.
Eigen::MatrixXd shift_and_normalize(const Eigen::MatrixXd& matrix);

/// Runs SPA on the leaf columns of the training rows (after
/// `shift_and_normalize`) and maps the picks back to node indices.
RepresentativeSet select_representatives(const TimePanel& panel, const SplitSpec& split, std::size_t rank);

/// T x R matrix of the selected columns of `panel.values`.
Eigen::MatrixXd build_z(const TimePanel& panel, const RepresentativeSet& reps);

}  // namespace hired
