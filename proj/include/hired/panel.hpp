#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hired/hierarchy.hpp"

namespace hired {

/// Per-series affine transform fit on the training range.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;
};

enum class StandardizeScope {
    PerSeries,  // one (mean, std) per column
    Global,     // one (mean, std) shared by all columns
};

enum class MissingPolicy { Reject, ForwardFill };

/**
 * Aligned panel of T timesteps for the N nodes of a hierarchy.
 *
 * `values` always satisfies the data mean property on load; after
 * `standardize` it holds standardized values and `scaler` maps them back.
 */
struct TimePanel {
    Eigen::MatrixXd values;      // T x N, columns in node-index order
    Eigen::MatrixXd covariates;  // T x D
    std::vector<std::string> time_index;
    std::vector<std::string> covariate_names;
    std::shared_ptr<const HierarchyTree> tree;
    Scaler scaler;               // identity until standardized
    bool standardized = false;
    std::vector<std::string> provenance;

    [[nodiscard]] std::size_t steps() const noexcept { return static_cast<std::size_t>(values.rows()); }
    [[nodiscard]] std::size_t series() const noexcept { return static_cast<std::size_t>(values.cols()); }
    [[nodiscard]] std::size_t covariate_dim() const noexcept { return static_cast<std::size_t>(covariates.cols()); }
};

struct PanelSource {
    std::string values_path;
    std::string hierarchy_path;
    std::optional<std::string> covariates_path;
    bool hierarchy_has_header = false;
    MissingPolicy missing = MissingPolicy::Reject;
};

/// Train/validation/test boundaries as 1-based inclusive timesteps.
struct SplitSpec {
    std::size_t train_end = 0;
    std::size_t val_start = 0;
    std::size_t val_end = 0;
    std::size_t test_start = 0;
    std::size_t test_end = 0;
    std::size_t rolling_windows = 1;

    /// Parses `train_end:val_start-val_end:test_start-test_end`.
    static SplitSpec parse(const std::string& text, std::size_t rolling_windows);
    /// Throws ConfigError unless train_end < val_start <= val_end < test_start <= test_end <= steps.
    void validate(std::size_t steps) const;
    [[nodiscard]] std::string to_string() const;
};

enum class Segment { Train, Val, Test };

const char* to_string(Segment s);
Segment parse_segment(const std::string& s);

/// One example: series `series`, targets at rows [origin, origin + F), history
/// at rows [origin - H, origin). Rows are 0-based.
struct ForecastWindow {
    std::size_t series = 0;
    std::size_t origin = 0;

    friend bool operator==(const ForecastWindow&, const ForecastWindow&) = default;
};

struct WindowShape {
    std::size_t history = 0;  // H
    std::size_t horizon = 0;  // F
    std::size_t stride = 1;
};

/// Materialized view of one window, for inspection and single-window inference.
struct WindowData {
    std::size_t series = 0;
    Eigen::VectorXd history;      // H
    Eigen::MatrixXd cov_history;  // H x D
    Eigen::MatrixXd cov_future;   // F x D
    Eigen::MatrixXd z_history;    // H x R
    Eigen::VectorXd target;       // F
};

/// Builds the hierarchy, reads values (and covariates when given), checks
/// coherence and rescales to the mean property. A leaf-only value file gets
/// its internal nodes synthesized by mean aggregation.
TimePanel load_panel(const PanelSource& source);

/// Assembles a panel from an in-memory sum-coherent raw matrix (T x N, node order).
TimePanel make_panel(const Eigen::MatrixXd& raw_sums, std::shared_ptr<const HierarchyTree> tree,
                     std::vector<std::string> time_index, std::optional<Eigen::MatrixXd> covariates = std::nullopt);

/// Day-of-week one-hot plus normalized position (or month one-hot for `YYYY-MM` labels).
Eigen::MatrixXd calendar_features(const std::vector<std::string>& time_index, std::vector<std::string>* names = nullptr);

/// Standardizes with statistics taken from rows 1..train_end. Population std;
/// a zero std is recorded as 1.
TimePanel standardize(const TimePanel& panel, const SplitSpec& split,
                      StandardizeScope scope = StandardizeScope::Global);

/// Maps standardized values back. Columns of `values` are the nodes listed in
/// `nodes` (all nodes in order when empty).
Eigen::MatrixXd inverse_standardize(const Eigen::MatrixXd& values, const Scaler& scaler,
                                    std::span<const std::size_t> nodes = {});

/**
 * Windows for every series inside one split segment. The training segment
 * yields every window with the given stride; validation and test yield
 * `split.rolling_windows` consecutive, non-overlapping forecast horizons that
 * end at the segment's last step. Ordered origin-major, then series.
 */
std::vector<ForecastWindow> make_windows(const TimePanel& panel, const SplitSpec& split, const WindowShape& shape,
                                         Segment segment);

WindowData materialize(const TimePanel& panel, const Eigen::MatrixXd& z, const ForecastWindow& window,
                       const WindowShape& shape);

/// Deterministically shuffled mini-batches; the last batch may be partial.
class BatchIterator {
public:
    BatchIterator(std::vector<ForecastWindow> windows, std::size_t batch_size, std::uint64_t shuffle_seed);

    [[nodiscard]] std::size_t batch_count() const noexcept;
    [[nodiscard]] std::span<const ForecastWindow> batch(std::size_t i) const;
    /// Next batch, or an empty span once exhausted.
    std::span<const ForecastWindow> next();

private:
    std::vector<ForecastWindow> windows_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
};

}  // namespace hired
