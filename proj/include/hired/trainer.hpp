#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hired/metrics.hpp"
#include "hired/model.hpp"
#include "hired/panel.hpp"
#include "hired/representatives.hpp"

namespace hired {

struct TrainConfig {
    double initial_lr = 0.07;
    double decay_rate = 0.5;
    std::size_t decay_interval = 6;  // epochs
    std::size_t epochs = 40;
    std::size_t batch_size = 512;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    double clip_norm = 10.0;

    /// Throws ConfigError unless every field is positive and patience <= epochs.
    void validate() const;
};

/// lr * decay_rate^floor(epoch / decay_interval) for a 0-based epoch.
double learning_rate(const TrainConfig& config, std::size_t epoch);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

/**
 * One bias-corrected Adam update. Moments are created on first use. Throws
 * NumericError and leaves everything untouched when a gradient is not finite.
 */
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr);
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr);

/// Global l2 norm over all tensors.
double global_norm(std::span<const Tensor> tensors);
/// Scales the tensors so their global norm is at most `max_norm`; returns true if it did.
bool clip_global_norm(std::span<Tensor> tensors, double max_norm);

enum class MetricScale { Rescaled, Raw };

MetricScale parse_metric_scale(const std::string& s);

/// Everything derived from the panel that training and evaluation share.
struct Dataset {
    TimePanel panel;  // standardized
    SplitSpec split;
    WindowShape shape;
    RepresentativeSet representatives;
    Eigen::MatrixXd z;  // T x R, standardized
    std::vector<ForecastWindow> train;
    std::vector<ForecastWindow> val;
    std::vector<ForecastWindow> test;

    [[nodiscard]] const std::vector<ForecastWindow>& windows(Segment s) const;
};

/// Standardize, select representatives on the training range, and cut windows.
Dataset prepare_dataset(const TimePanel& raw, const SplitSpec& split, const ModelConfig& model,
                        StandardizeScope scope = StandardizeScope::Global);

/// Truth and predictions for a segment, (windows*F) x N in original units.
struct SegmentForecast {
    Eigen::MatrixXd truth;
    Eigen::MatrixXd prediction;
    std::vector<std::size_t> origins;  // one per rolling window
};

SegmentForecast forecast_segment(const ModelParams& params, const ModelConfig& config, const Dataset& data,
                                 Segment segment, MetricScale scale = MetricScale::Rescaled);

MetricReport evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& data, Segment segment,
                      MetricScale scale = MetricScale::Rescaled);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_mean_wape = 0.0;
    double lr = 0.0;
    std::size_t clipped_steps = 0;
    double regularizer = 0.0;
};

struct TrainResult {
    ModelParams best;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    std::vector<EpochRecord> history;
    bool stopped_early = false;
};

/// CSV `epoch,train_loss,val_mean_wape,lr`.
std::string history_csv(const std::vector<EpochRecord>& history);

using EpochFn = std::function<EpochRecord(ModelParams& params, AdamState& state, double lr, std::size_t epoch)>;
using ValidateFn = std::function<double(const ModelParams& params)>;
using LogFn = std::function<void(const std::string&)>;

/**
 * Epoch loop with learning-rate decay, validation after every epoch,
 * best-checkpoint tracking and early stopping after `patience` epochs
 * without a strict improvement. A NaN validation score never improves.
 */
TrainResult train_loop(ModelParams params, const TrainConfig& config, const EpochFn& run_epoch,
                       const ValidateFn& validate, const LogFn& log = {});

/// Trains the model on `data` and keeps the parameters with the best
/// validation Mean WAPE.
TrainResult train(const ModelConfig& model, const TrainConfig& config, const Dataset& data, const LogFn& log = {});

}  // namespace hired
