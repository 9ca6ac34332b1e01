#include "hired/representatives.hpp"

#include <cmath>
#include <string>

#include "hired/error.hpp"

namespace hired {

RepresentativeSet spa_select(const Eigen::MatrixXd& matrix, std::size_t rank) {
    const auto cols = static_cast<std::size_t>(matrix.cols());
    if (rank == 0) {
        throw ConfigError("representative rank must be at least 1");
    }
    if (rank > cols) {
        throw ConfigError("representative rank " + std::to_string(rank) + " exceeds the " + std::to_string(cols) +
                          " available leaf series");
    }
    RepresentativeSet out;
    Eigen::MatrixXd residual = matrix;
    std::vector<bool> taken(cols, false);
    for (std::size_t step = 0; step < rank; ++step) {
        std::size_t best = cols;
        double best_norm = -1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            if (taken[j]) {
                continue;
            }
            const double norm = residual.col(static_cast<Eigen::Index>(j)).squaredNorm();
            if (norm > best_norm) {
                best_norm = norm;
                best = j;
            }
        }
        taken[best] = true;
        out.indices.push_back(best);
        if (best_norm > 0.0) {
            const Eigen::VectorXd u = residual.col(static_cast<Eigen::Index>(best)) / std::sqrt(best_norm);
            residual -= u * (u.transpose() * residual);
        }
        out.residual_norms.push_back(residual.norm());
    }
    return out;
}

Eigen::MatrixXd shift_and_normalize(const Eigen::MatrixXd& matrix) {
    Eigen::MatrixXd out = matrix;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        auto col = out.col(j);
        col.array() -= col.minCoeff();
        const double norm = col.norm();
        if (norm > 0.0) {
            col /= norm;
        }
    }
    return out;
}

RepresentativeSet select_representatives(const TimePanel& panel, const SplitSpec& split, std::size_t rank) {
    split.validate(panel.steps());
    const auto& leaves = panel.tree->leaves();
    Eigen::MatrixXd leaf_train(static_cast<Eigen::Index>(split.train_end), static_cast<Eigen::Index>(leaves.size()));
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        leaf_train.col(static_cast<Eigen::Index>(k)) =
            panel.values.col(static_cast<Eigen::Index>(leaves[k])).head(static_cast<Eigen::Index>(split.train_end));
    }
    RepresentativeSet reps = spa_select(shift_and_normalize(leaf_train), rank);
    for (auto& idx : reps.indices) {
        idx = leaves[idx];
    }
    return reps;
}

Eigen::MatrixXd build_z(const TimePanel& panel, const RepresentativeSet& reps) {
    Eigen::MatrixXd z(panel.values.rows(), static_cast<Eigen::Index>(reps.indices.size()));
    for (std::size_t r = 0; r < reps.indices.size(); ++r) {
        if (reps.indices[r] >= panel.series()) {
            throw ShapeError("representative " + std::to_string(reps.indices[r]) + " out of range for " +
                             std::to_string(panel.series()) + " series");
        }
        z.col(static_cast<Eigen::Index>(r)) = panel.values.col(static_cast<Eigen::Index>(reps.indices[r]));
    }
    return z;
}

}  // namespace hired
