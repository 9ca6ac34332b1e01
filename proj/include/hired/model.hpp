#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hired/hierarchy.hpp"
#include "hired/nn.hpp"
#include "hired/panel.hpp"

namespace hired {

enum class ModelMode {
    Full,      // both branches, regularized embeddings
    NoReg,     // both branches, lambda_e forced to 0
    TvarOnly,  // autoregressive branch only
    BdOnly,    // basis-decomposition branch only
};

const char* to_string(ModelMode m);
ModelMode parse_mode(const std::string& s);

struct ModelConfig {
    std::size_t history = 24;        // H
    std::size_t horizon = 4;         // F
    std::size_t embedding_dim = 6;   // K
    std::size_t representatives = 6; // R
    std::size_t lstm_hidden = 14;
    std::size_t decoder_hidden = 12;
    double lambda_e = 7.2498e-8;
    ModelMode mode = ModelMode::Full;
    bool shared_encoder = false;
    double embedding_init_std = 0.05;

    [[nodiscard]] bool has_tvar() const noexcept { return mode != ModelMode::BdOnly; }
    [[nodiscard]] bool has_bd() const noexcept { return mode != ModelMode::TvarOnly; }
    /// lambda_e, or 0 in modes without a regularized embedding table.
    [[nodiscard]] double effective_lambda() const noexcept;
    /// Throws ConfigError on zero sizes or a negative/non-finite lambda_e.
    void validate() const;
};

/// Parameters of one model. Components absent in the configured mode are empty.
template <typename T>
struct ModelParamsT {
    std::size_t covariate_dim = 0;
    std::size_t series = 0;
    std::optional<Lstm<T>> tvar_encoder;   // also feeds the basis decoder when shared
    std::optional<TvarDecoder<T>> tvar_decoder;
    std::optional<Lstm<T>> bd_encoder;
    std::optional<BasisDecoder<T>> bd_decoder;
    std::optional<T> embeddings;           // N x K, one row per node
};

using ModelParams = ModelParamsT<Tensor>;

/// Visits every parameter tensor in a fixed order with a dotted name.
template <typename Fn, typename First, typename... Rest>
void visit_params(Fn&& fn, First& first, Rest&... rest) {
    if (first.tvar_encoder) {
        visit_lstm(fn, "tvar_encoder", *first.tvar_encoder, *rest.tvar_encoder...);
    }
    if (first.tvar_decoder) {
        visit_tvar(fn, "tvar_decoder", *first.tvar_decoder, *rest.tvar_decoder...);
    }
    if (first.bd_encoder) {
        visit_lstm(fn, "bd_encoder", *first.bd_encoder, *rest.bd_encoder...);
    }
    if (first.bd_decoder) {
        visit_basis(fn, "bd_decoder", *first.bd_decoder, *rest.bd_decoder...);
    }
    if (first.embeddings) {
        fn(std::string("embeddings"), *first.embeddings, *rest.embeddings...);
    }
}

template <typename U, typename T, typename Fn>
ModelParamsT<U> transform(const ModelParamsT<T>& p, Fn&& fn) {
    ModelParamsT<U> out;
    out.covariate_dim = p.covariate_dim;
    out.series = p.series;
    if (p.tvar_encoder) out.tvar_encoder = transform<U>(*p.tvar_encoder, fn);
    if (p.tvar_decoder) out.tvar_decoder = transform<U>(*p.tvar_decoder, fn);
    if (p.bd_encoder) out.bd_encoder = transform<U>(*p.bd_encoder, fn);
    if (p.bd_decoder) out.bd_decoder = transform<U>(*p.bd_decoder, fn);
    if (p.embeddings) out.embeddings = fn(*p.embeddings);
    return out;
}

/// Encoder input width: covariates plus representative series.
std::size_t encoder_input_dim(const ModelConfig& config, std::size_t covariate_dim);

ModelParams init_params(const ModelConfig& config, std::size_t covariate_dim, std::size_t series, std::uint64_t seed);

/// Same structure with every tensor zeroed.
ModelParams zeros_like(const ModelParams& params);

std::size_t parameter_count(const ModelParams& params);
std::vector<std::string> parameter_names(const ModelParams& params);
std::vector<Tensor*> parameter_tensors(ModelParams& params);
bool all_finite(const ModelParams& params);

/// Puts every tensor on the tape, as variables when `trainable`, else as constants.
ModelParamsT<Var> bind(const ModelParams& params, Tape& tape, bool trainable);

/// Gradients of the bound variables after `Tape::backward`, in the same structure.
ModelParams collect_gradients(const ModelParamsT<Var>& bound, const Tape& tape);

/**
 * Model inputs for a batch of windows. The encoders see only covariates and
 * representatives, so they run once per distinct origin; `origin_row[b]`
 * maps window b to its encoder row.
 */
struct BatchInputs {
    std::vector<std::size_t> series;      // B
    std::vector<std::size_t> origin_row;  // B, index into the distinct origins
    std::vector<std::size_t> origins;     // U distinct origins, in first-seen order
    Tensor history;                       // B x H, own-series history
    Tensor target;                        // B x F
    std::vector<Tensor> encoder_steps;    // H tensors of U x (D + R)
    std::vector<Tensor> future;           // F tensors of U x D

    [[nodiscard]] std::size_t size() const noexcept { return series.size(); }
};

BatchInputs prepare_batch(const TimePanel& panel, const Eigen::MatrixXd& z, std::span<const ForecastWindow> windows,
                          const ModelConfig& config);

struct ForwardResult {
    Var prediction;                 // B x F
    std::optional<Var> tvar;        // B x F, the autoregressive term
    std::optional<Var> bd;          // B x F, the basis term
    std::vector<Var> tvar_weights;  // F tensors of U x H
    std::vector<Var> basis;         // F tensors of U x K
};

/**
 * y_f = <history, a_f> + <theta_i, b_f>. `mode` selects the terms; the full
 * and no_reg modes use both. Throws ConfigError when a needed component is
 * missing from `params`.
 */
ForwardResult forward(const ModelParamsT<Var>& params, const BatchInputs& inputs, ModelMode mode, bool shared_encoder,
                      Tape& tape);

/// Sum over internal p and leaves i under p of ||theta_p - theta_i||^2.
Var embedding_regularizer(Var table, const HierarchyTree& tree);
double embedding_regularizer(const Tensor& table, const HierarchyTree& tree);

struct LossTerms {
    Var total;
    Var prediction_loss;  // sum of absolute errors over the batch
    std::optional<Var> regularizer;
};

/// Summed absolute error over the batch plus lambda * regularizer (once).
LossTerms loss(const ModelParamsT<Var>& params, const BatchInputs& inputs, const HierarchyTree& tree,
               const ModelConfig& config, Tape& tape);

/// Inference without gradients: B x F predictions in the panel's scale.
Eigen::MatrixXd predict(const ModelParams& params, const BatchInputs& inputs, const ModelConfig& config);
Eigen::MatrixXd predict(const ModelParams& params, const BatchInputs& inputs, ModelMode mode, bool shared_encoder);

}  // namespace hired
