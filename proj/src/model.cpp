#include "hired/model.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "hired/error.hpp"

namespace hired {

const char* to_string(ModelMode m) {
    switch (m) {
        case ModelMode::Full: return "full";
        case ModelMode::NoReg: return "no_reg";
        case ModelMode::TvarOnly: return "tvar_only";
        case ModelMode::BdOnly: return "bd_only";
    }
    return "full";
}

ModelMode parse_mode(const std::string& s) {
    if (s == "full") return ModelMode::Full;
    if (s == "no_reg") return ModelMode::NoReg;
    if (s == "tvar_only") return ModelMode::TvarOnly;
    if (s == "bd_only") return ModelMode::BdOnly;
    throw ConfigError("unknown model mode '" + s + "' (expected full, no_reg, tvar_only or bd_only)");
}

double ModelConfig::effective_lambda() const noexcept {
    return (mode == ModelMode::Full || mode == ModelMode::BdOnly) ? lambda_e : 0.0;
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) {
            throw ConfigError(std::string(name) + " must be positive");
        }
    };
    positive(history, "history");
    positive(horizon, "horizon");
    positive(embedding_dim, "embedding_dim");
    positive(representatives, "representatives");
    positive(lstm_hidden, "lstm_hidden");
    positive(decoder_hidden, "decoder_hidden");
    if (!(lambda_e >= 0.0) || !std::isfinite(lambda_e)) {
        throw ConfigError("lambda_e must be a finite nonnegative number");
    }
    if (!(embedding_init_std >= 0.0)) {
        throw ConfigError("embedding_init_std must be nonnegative");
    }
}

std::size_t encoder_input_dim(const ModelConfig& config, std::size_t covariate_dim) {
    return covariate_dim + config.representatives;
}

ModelParams init_params(const ModelConfig& config, std::size_t covariate_dim, std::size_t series, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.covariate_dim = covariate_dim;
    p.series = series;
    const std::size_t in = encoder_input_dim(config, covariate_dim);
    if (config.has_tvar()) {
        p.tvar_encoder = init_lstm(in, config.lstm_hidden, rng);
        p.tvar_decoder = init_tvar_decoder(config.horizon, config.lstm_hidden, covariate_dim, config.decoder_hidden,
                                           config.history, rng);
    }
    if (config.has_bd()) {
        if (!(config.shared_encoder && p.tvar_encoder)) {
            p.bd_encoder = init_lstm(in, config.lstm_hidden, rng);
        }
        p.bd_decoder = init_basis_decoder(covariate_dim, config.lstm_hidden, config.embedding_dim, rng);
        p.embeddings = init_embeddings(series, config.embedding_dim, config.embedding_init_std, rng);
    }
    return p;
}

ModelParams zeros_like(const ModelParams& params) {
    return transform<Tensor>(params, [](const Tensor& t) { return Tensor(t.rows(), t.cols()); });
}

std::size_t parameter_count(const ModelParams& params) {
    std::size_t n = 0;
    visit_params([&](const std::string&, const Tensor& t) { n += t.size(); }, params);
    return n;
}

std::vector<std::string> parameter_names(const ModelParams& params) {
    std::vector<std::string> names;
    visit_params([&](const std::string& name, const Tensor&) { names.push_back(name); }, params);
    return names;
}

std::vector<Tensor*> parameter_tensors(ModelParams& params) {
    std::vector<Tensor*> out;
    visit_params([&](const std::string&, Tensor& t) { out.push_back(&t); }, params);
    return out;
}

bool all_finite(const ModelParams& params) {
    bool ok = true;
    visit_params([&](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); }, params);
    return ok;
}

ModelParamsT<Var> bind(const ModelParams& params, Tape& tape, bool trainable) {
    return transform<Var>(params,
                          [&](const Tensor& t) { return trainable ? tape.variable(t) : tape.constant(t); });
}

ModelParams collect_gradients(const ModelParamsT<Var>& bound, const Tape& tape) {
    return transform<Tensor>(bound, [&](const Var& v) { return tape.gradient(v); });
}

BatchInputs prepare_batch(const TimePanel& panel, const Eigen::MatrixXd& z, std::span<const ForecastWindow> windows,
                          const ModelConfig& config) {
    const std::size_t H = config.history;
    const std::size_t F = config.horizon;
    const std::size_t T = panel.steps();
    const std::size_t D = panel.covariate_dim();
    const auto R = static_cast<std::size_t>(z.cols());
    if (windows.empty()) {
        throw ShapeError("empty batch");
    }
    if (R != config.representatives) {
        throw ShapeError("representative matrix has " + std::to_string(R) + " columns, config expects " +
                         std::to_string(config.representatives));
    }
    if (static_cast<std::size_t>(z.rows()) != T) {
        throw ShapeError("representative matrix has " + std::to_string(z.rows()) + " rows, panel has " +
                         std::to_string(T));
    }
    BatchInputs in;
    in.history = Tensor(windows.size(), H);
    in.target = Tensor(windows.size(), F);
    std::unordered_map<std::size_t, std::size_t> row_of;
    for (std::size_t b = 0; b < windows.size(); ++b) {
        const ForecastWindow& w = windows[b];
        if (w.origin < H || w.origin + F > T || w.series >= panel.series()) {
            throw ShapeError("window (series " + std::to_string(w.series) + ", origin " + std::to_string(w.origin) +
                             ") does not fit a panel of " + std::to_string(T) + " steps and " +
                             std::to_string(panel.series()) + " series");
        }
        auto [it, inserted] = row_of.try_emplace(w.origin, in.origins.size());
        if (inserted) {
            in.origins.push_back(w.origin);
        }
        in.series.push_back(w.series);
        in.origin_row.push_back(it->second);
        const auto col = static_cast<Eigen::Index>(w.series);
        for (std::size_t j = 0; j < H; ++j) {
            in.history(b, j) = panel.values(static_cast<Eigen::Index>(w.origin - H + j), col);
        }
        for (std::size_t f = 0; f < F; ++f) {
            in.target(b, f) = panel.values(static_cast<Eigen::Index>(w.origin + f), col);
        }
    }
    const std::size_t U = in.origins.size();
    in.encoder_steps.assign(H, Tensor(U, D + R));
    in.future.assign(F, Tensor(U, D));
    for (std::size_t u = 0; u < U; ++u) {
        const std::size_t origin = in.origins[u];
        for (std::size_t j = 0; j < H; ++j) {
            const auto t = static_cast<Eigen::Index>(origin - H + j);
            Tensor& step = in.encoder_steps[j];
            for (std::size_t d = 0; d < D; ++d) {
                step(u, d) = panel.covariates(t, static_cast<Eigen::Index>(d));
            }
            for (std::size_t r = 0; r < R; ++r) {
                step(u, D + r) = z(t, static_cast<Eigen::Index>(r));
            }
        }
        for (std::size_t f = 0; f < F; ++f) {
            const auto t = static_cast<Eigen::Index>(origin + f);
            for (std::size_t d = 0; d < D; ++d) {
                in.future[f](u, d) = panel.covariates(t, static_cast<Eigen::Index>(d));
            }
        }
    }
    return in;
}

ForwardResult forward(const ModelParamsT<Var>& params, const BatchInputs& inputs, ModelMode mode, bool shared_encoder,
                      Tape& tape) {
    const bool use_tvar = mode != ModelMode::BdOnly;
    const bool use_bd = mode != ModelMode::TvarOnly;
    if (use_tvar && (!params.tvar_encoder || !params.tvar_decoder)) {
        throw ConfigError(std::string("mode ") + to_string(mode) + " needs the autoregressive branch, which these "
                          "parameters do not have");
    }
    const Lstm<Var>* bd_encoder = nullptr;
    if (use_bd) {
        if (params.bd_encoder) {
            bd_encoder = &*params.bd_encoder;
        } else if (shared_encoder && params.tvar_encoder) {
            bd_encoder = &*params.tvar_encoder;
        }
        if (!bd_encoder || !params.bd_decoder || !params.embeddings) {
            throw ConfigError(std::string("mode ") + to_string(mode) + " needs the basis branch, which these "
                              "parameters do not have");
        }
    }

    std::vector<Var> steps;
    steps.reserve(inputs.encoder_steps.size());
    for (const auto& s : inputs.encoder_steps) {
        steps.push_back(tape.constant(s));
    }
    std::vector<Var> future;
    future.reserve(inputs.future.size());
    for (const auto& f : inputs.future) {
        future.push_back(tape.constant(f));
    }

    ForwardResult out;
    std::optional<LstmState> tvar_state;
    if (use_tvar) {
        tvar_state = lstm_encode(*params.tvar_encoder, steps);
        out.tvar_weights = tvar_decode(*params.tvar_decoder, tvar_state->h, future);
        Var history = tape.constant(inputs.history);
        std::vector<Var> terms;
        terms.reserve(future.size());
        for (const Var& w : out.tvar_weights) {
            terms.push_back(ad::inner_product(history, ad::gather_rows(w, inputs.origin_row)));
        }
        out.tvar = ad::concat_cols(terms);
    }
    if (use_bd) {
        const LstmState enc = (tvar_state && bd_encoder == &*params.tvar_encoder)
                                  ? *tvar_state
                                  : lstm_encode(*bd_encoder, steps);
        out.basis = basis_decode(*params.bd_decoder, enc, future);
        Var theta = embed_lookup(*params.embeddings, inputs.series);
        std::vector<Var> terms;
        terms.reserve(future.size());
        for (const Var& b : out.basis) {
            terms.push_back(ad::inner_product(theta, ad::gather_rows(b, inputs.origin_row)));
        }
        out.bd = ad::concat_cols(terms);
    }
    if (out.tvar && out.bd) {
        out.prediction = ad::add(*out.tvar, *out.bd);
    } else {
        out.prediction = out.tvar ? *out.tvar : *out.bd;
    }
    return out;
}

namespace {

void subtree_pairs(const HierarchyTree& tree, std::vector<std::size_t>& parents, std::vector<std::size_t>& leaves) {
    for (std::size_t p = 0; p < tree.node_count(); ++p) {
        if (tree.is_leaf(p)) {
            continue;
        }
        for (std::size_t leaf : tree.leaf_set(p)) {
            parents.push_back(p);
            leaves.push_back(leaf);
        }
    }
}

}  // namespace

Var embedding_regularizer(Var table, const HierarchyTree& tree) {
    if (table.rows() != tree.node_count()) {
        throw ShapeError("embedding table has " + std::to_string(table.rows()) + " rows for " +
                         std::to_string(tree.node_count()) + " nodes");
    }
    std::vector<std::size_t> parents;
    std::vector<std::size_t> leaves;
    subtree_pairs(tree, parents, leaves);
    if (parents.empty()) {
        return table.tape->constant(Tensor::scalar(0.0));
    }
    Var diff = ad::sub(ad::gather_rows(table, parents), ad::gather_rows(table, leaves));
    return ad::sum(ad::mul(diff, diff));
}

double embedding_regularizer(const Tensor& table, const HierarchyTree& tree) {
    Tape tape;
    return embedding_regularizer(tape.constant(table), tree).value().item();
}

LossTerms loss(const ModelParamsT<Var>& params, const BatchInputs& inputs, const HierarchyTree& tree,
               const ModelConfig& config, Tape& tape) {
    ForwardResult fwd = forward(params, inputs, config.mode, config.shared_encoder, tape);
    Var target = tape.constant(inputs.target);
    LossTerms terms;
    terms.prediction_loss = ad::sum(ad::abs(ad::sub(fwd.prediction, target)));
    terms.total = terms.prediction_loss;
    const double lambda = config.effective_lambda();
    if (lambda > 0.0 && params.embeddings) {
        terms.regularizer = embedding_regularizer(*params.embeddings, tree);
        terms.total = ad::add(terms.prediction_loss, ad::scale(*terms.regularizer, lambda));
    }
    return terms;
}

Eigen::MatrixXd predict(const ModelParams& params, const BatchInputs& inputs, ModelMode mode, bool shared_encoder) {
    Tape tape;
    ModelParamsT<Var> bound = bind(params, tape, false);
    return forward(bound, inputs, mode, shared_encoder, tape).prediction.value().to_matrix();
}

Eigen::MatrixXd predict(const ModelParams& params, const BatchInputs& inputs, const ModelConfig& config) {
    return predict(params, inputs, config.mode, config.shared_encoder);
}

}  // namespace hired
