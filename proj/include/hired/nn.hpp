#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hired/autodiff.hpp"

namespace hired {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Affine map x -> x W + b with W (in x out) and b (1 x out).
template <typename T>
struct Dense {
    T weight;
    T bias;
};

/// Single-layer LSTM. Gate blocks are laid out [input | forget | cell | output]
/// along the 4*hidden columns of each matrix.
template <typename T>
struct Lstm {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    T w_input;   // input_dim x 4*hidden
    T w_hidden;  // hidden x 4*hidden
    T bias;      // 1 x 4*hidden
};

/// F independent heads, each hidden layer + ReLU + linear map to H AR weights.
template <typename T>
struct TvarDecoder {
    std::vector<Dense<T>> hidden;
    std::vector<Dense<T>> output;
};

/// LSTM decoder over the future covariates followed by a readout to K.
template <typename T>
struct BasisDecoder {
    Lstm<T> lstm;
    Dense<T> readout;
};

struct LstmState {
    Var h;
    Var c;
};

// Parallel visitors: `fn(name, a, b, ...)` receives the same member from
// every argument, so one structure can drive another (params, grads, moments).
// Arguments may mix const and non-const structures.
template <typename Fn, typename... D>
void visit_dense(Fn&& fn, const std::string& prefix, D&... d) {
    fn(prefix + ".weight", d.weight...);
    fn(prefix + ".bias", d.bias...);
}

template <typename Fn, typename... L>
void visit_lstm(Fn&& fn, const std::string& prefix, L&... l) {
    fn(prefix + ".w_input", l.w_input...);
    fn(prefix + ".w_hidden", l.w_hidden...);
    fn(prefix + ".bias", l.bias...);
}

template <typename Fn, typename First, typename... Rest>
void visit_tvar(Fn&& fn, const std::string& prefix, First& first, Rest&... rest) {
    for (std::size_t f = 0; f < first.hidden.size(); ++f) {
        const std::string head = prefix + ".head" + std::to_string(f);
        visit_dense(fn, head + ".hidden", first.hidden[f], rest.hidden[f]...);
        visit_dense(fn, head + ".output", first.output[f], rest.output[f]...);
    }
}

template <typename Fn, typename... B>
void visit_basis(Fn&& fn, const std::string& prefix, B&... b) {
    visit_lstm(fn, prefix + ".lstm", b.lstm...);
    visit_dense(fn, prefix + ".readout", b.readout...);
}

// Structure-preserving maps, used to bind tensors to a tape and to build
// zero-shaped companions.
template <typename U, typename T, typename Fn>
Dense<U> transform(const Dense<T>& d, Fn&& fn) {
    return {fn(d.weight), fn(d.bias)};
}

template <typename U, typename T, typename Fn>
Lstm<U> transform(const Lstm<T>& l, Fn&& fn) {
    return {l.input_dim, l.hidden_dim, fn(l.w_input), fn(l.w_hidden), fn(l.bias)};
}

template <typename U, typename T, typename Fn>
TvarDecoder<U> transform(const TvarDecoder<T>& t, Fn&& fn) {
    TvarDecoder<U> out;
    for (const auto& d : t.hidden) {
        out.hidden.push_back(transform<U>(d, fn));
    }
    for (const auto& d : t.output) {
        out.output.push_back(transform<U>(d, fn));
    }
    return out;
}

template <typename U, typename T, typename Fn>
BasisDecoder<U> transform(const BasisDecoder<T>& b, Fn&& fn) {
    return {transform<U>(b.lstm, fn), transform<U>(b.readout, fn)};
}

// Initialization: weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
// biases, forget-gate bias 1.
Dense<Tensor> init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng);
Lstm<Tensor> init_lstm(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);
TvarDecoder<Tensor> init_tvar_decoder(std::size_t heads, std::size_t state_dim, std::size_t covariate_dim,
                                      std::size_t hidden_dim, std::size_t history, std::mt19937_64& rng);
BasisDecoder<Tensor> init_basis_decoder(std::size_t covariate_dim, std::size_t hidden_dim, std::size_t embedding_dim,
                                        std::mt19937_64& rng);
/// N x K table with entries drawn from Normal(0, stddev).
Tensor init_embeddings(std::size_t series, std::size_t embedding_dim, double stddev, std::mt19937_64& rng);

Var dense(const Dense<Var>& layer, Var x);

/// One LSTM step on a batch: x is B x input_dim, state tensors are B x hidden.
LstmState lstm_cell(const Lstm<Var>& params, Var x, const LstmState& state);

/// Zero initial state for a batch of `rows`.
LstmState lstm_zero_state(Tape& tape, std::size_t rows, std::size_t hidden_dim);

/// Runs the recurrence over `steps` (each B x input_dim) from `initial`, or
/// from zeros when `initial` is null, and returns the terminal state.
LstmState lstm_encode(const Lstm<Var>& params, std::span<const Var> steps, const LstmState* initial = nullptr);

/// Head f maps [enc_h | future[f]] to the B x H AR weights for step f.
std::vector<Var> tvar_decode(const TvarDecoder<Var>& params, Var enc_h, std::span<const Var> future);

/// LSTM decoder started from `enc`, one step per future covariate row, each
/// step read out to B x K basis values.
std::vector<Var> basis_decode(const BasisDecoder<Var>& params, const LstmState& enc, std::span<const Var> future);

/// Rows `series` of the N x K table, as a B x K matrix.
Var embed_lookup(Var table, std::span<const std::size_t> series);

}  // namespace hired
