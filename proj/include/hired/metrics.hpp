#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace hired {

class HierarchyTree;

/// Weighted absolute percentage error: sum|yhat - y| / sum|y|.
/// Returns quiet NaN when the truth is identically zero.
double wape(std::span<const double> truth, std::span<const double> pred);

/// Symmetric MAPE: (2/n) sum |yhat - y| / (|y| + |yhat|), with 0/0 terms taken as 0.
double smape(std::span<const double> truth, std::span<const double> pred);

struct LevelMetrics {
    std::size_t level = 0;
    double wape = 0.0;
    double smape = 0.0;
    double coherence = 0.0;
    bool wape_defined = true;  // false when the level's truth is all zero
};

/// Per-level accuracy plus the unweighted mean over levels (the "Mean" column).
struct MetricReport {
    std::vector<LevelMetrics> levels;
    double mean_wape = 0.0;
    double mean_smape = 0.0;
    double mean_coherence = 0.0;

    /// CSV with header `level,wape,smape,coherence` and a final `mean` row.
    [[nodiscard]] std::string to_csv() const;
};

/**
 * Pools every series of a level (and every row, i.e. every forecast step of
 * every rolling window) before computing WAPE/SMAPE. `truth` and `preds` are
 * (windows*F) x N with columns in node order. Coherence is computed on `preds`.
 */
MetricReport per_level_report(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& preds,
                              const HierarchyTree& tree);

}  // namespace hired
