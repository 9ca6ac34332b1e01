#include "hired/nn.hpp"

#include <cmath>

#include "hired/error.hpp"

namespace hired {

namespace {

Tensor uniform(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, cols);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

double fan_in_bound(std::size_t fan_in) { return fan_in == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Dense<Tensor> init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return {uniform(in, out, fan_in_bound(in), rng), Tensor(1, out)};
}

Lstm<Tensor> init_lstm(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
    Lstm<Tensor> l;
    l.input_dim = input_dim;
    l.hidden_dim = hidden_dim;
    const double bound = fan_in_bound(input_dim + hidden_dim);
    l.w_input = uniform(input_dim, 4 * hidden_dim, bound, rng);
    l.w_hidden = uniform(hidden_dim, 4 * hidden_dim, bound, rng);
    l.bias = Tensor(1, 4 * hidden_dim);
    for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) {
        l.bias[j] = 1.0;
    }
    return l;
}

TvarDecoder<Tensor> init_tvar_decoder(std::size_t heads, std::size_t state_dim, std::size_t covariate_dim,
                                      std::size_t hidden_dim, std::size_t history, std::mt19937_64& rng) {
    TvarDecoder<Tensor> d;
    for (std::size_t f = 0; f < heads; ++f) {
        d.hidden.push_back(init_dense(state_dim + covariate_dim, hidden_dim, rng));
        d.output.push_back(init_dense(hidden_dim, history, rng));
    }
    return d;
}

BasisDecoder<Tensor> init_basis_decoder(std::size_t covariate_dim, std::size_t hidden_dim, std::size_t embedding_dim,
                                        std::mt19937_64& rng) {
    BasisDecoder<Tensor> b;
    b.lstm = init_lstm(covariate_dim, hidden_dim, rng);
    b.readout = init_dense(hidden_dim, embedding_dim, rng);
    return b;
}

Tensor init_embeddings(std::size_t series, std::size_t embedding_dim, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(series, embedding_dim);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

Var dense(const Dense<Var>& layer, Var x) { return ad::add_row(ad::matmul(x, layer.weight), layer.bias); }

LstmState lstm_cell(const Lstm<Var>& params, Var x, const LstmState& state) {
    if (x.cols() != params.input_dim) {
        throw ShapeError("lstm input has " + std::to_string(x.cols()) + " features, expected " +
                         std::to_string(params.input_dim));
    }
    const std::size_t h = params.hidden_dim;
    Var gates = ad::add_row(ad::add(ad::matmul(x, params.w_input), ad::matmul(state.h, params.w_hidden)), params.bias);
    Var i = ad::sigmoid(ad::slice_cols(gates, 0, h));
    Var f = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
    Var g = ad::tanh(ad::slice_cols(gates, 2 * h, 3 * h));
    Var o = ad::sigmoid(ad::slice_cols(gates, 3 * h, 4 * h));
    Var c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
    return {ad::mul(o, ad::tanh(c)), c};
}

LstmState lstm_zero_state(Tape& tape, std::size_t rows, std::size_t hidden_dim) {
    return {tape.constant(Tensor(rows, hidden_dim)), tape.constant(Tensor(rows, hidden_dim))};
}

LstmState lstm_encode(const Lstm<Var>& params, std::span<const Var> steps, const LstmState* initial) {
    if (steps.empty()) {
        throw ShapeError("lstm_encode needs at least one step");
    }
    LstmState state = initial ? *initial : lstm_zero_state(*steps[0].tape, steps[0].rows(), params.hidden_dim);
    for (const Var& x : steps) {
        state = lstm_cell(params, x, state);
    }
    return state;
}

std::vector<Var> tvar_decode(const TvarDecoder<Var>& params, Var enc_h, std::span<const Var> future) {
    if (params.hidden.size() != future.size() || params.output.size() != future.size()) {
        throw ShapeError("tvar decoder has " + std::to_string(params.hidden.size()) + " heads for horizon " +
                         std::to_string(future.size()));
    }
    std::vector<Var> weights;
    weights.reserve(future.size());
    for (std::size_t f = 0; f < future.size(); ++f) {
        const Var parts[] = {enc_h, future[f]};
        Var hidden = ad::relu(dense(params.hidden[f], ad::concat_cols(parts)));
        weights.push_back(dense(params.output[f], hidden));
    }
    return weights;
}

std::vector<Var> basis_decode(const BasisDecoder<Var>& params, const LstmState& enc, std::span<const Var> future) {
    if (enc.h.cols() != params.lstm.hidden_dim) {
        throw ShapeError("basis decoder hidden size " + std::to_string(params.lstm.hidden_dim) +
                         " does not match encoder state width " + std::to_string(enc.h.cols()));
    }
    std::vector<Var> basis;
    basis.reserve(future.size());
    LstmState state = enc;
    for (const Var& x : future) {
        state = lstm_cell(params.lstm, x, state);
        basis.push_back(dense(params.readout, state.h));
    }
    return basis;
}

Var embed_lookup(Var table, std::span<const std::size_t> series) {
    const std::size_t n = table.rows();
    for (std::size_t s : series) {
        if (s >= n) {
            throw ShapeError("embedding index " + std::to_string(s) + " out of range for " + std::to_string(n) +
                             " series");
        }
    }
    return ad::gather_rows(table, series);
}

}  // namespace hired
