#pragma once

#include <span>
#include <string>
#include <vector>

#include "hired/model.hpp"

namespace hired::testing {

/// Every tensor of a parameter structure, in visiting order.
template <typename S, typename Visit>
std::vector<Tensor> flatten(const S& s, Visit visit) {
    std::vector<Tensor> out;
    visit([&](const std::string&, const Tensor& t) { out.push_back(t); }, s);
    return out;
}

/// The structure of `shape` with each member replaced by the next variable of `vars`.
template <typename S, typename Visit>
auto rebind(const S& shape, std::span<const Var> vars, Visit visit) {
    auto bound = transform<Var>(shape, [](const Tensor&) { return Var{}; });
    std::size_t k = 0;
    visit([&](const std::string&, const Tensor&, Var& v) { v = vars[k++]; }, shape, bound);
    return bound;
}

inline constexpr auto visit_model = [](auto&& fn, auto&... s) { visit_params(fn, s...); };
inline constexpr auto visit_lstm_params = [](auto&& fn, auto&... s) { visit_lstm(fn, "lstm", s...); };
inline constexpr auto visit_tvar_params = [](auto&& fn, auto&... s) { visit_tvar(fn, "tvar", s...); };
inline constexpr auto visit_basis_params = [](auto&& fn, auto&... s) { visit_basis(fn, "basis", s...); };

}  // namespace hired::testing
