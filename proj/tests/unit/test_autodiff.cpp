#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "hired/autodiff.hpp"
#include "hired/error.hpp"

using namespace hired;
using namespace hired::ad;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Tensor t(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = n(rng);
    }
    return t;
}

/// Contracts an arbitrary-shape output with fixed random weights into a scalar.
Var weighted_sum(Tape& tape, Var out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(out, tape.constant(random_tensor(out.rows(), out.cols(), rng))));
}

using Op = std::function<Var(Tape&, std::span<const Var>)>;

void check_op(const char* name, const Op& op, const std::vector<std::array<std::size_t, 2>>& shapes) {
    INFO(name);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed * 7919 + 1);
        std::vector<Tensor> params;
        for (const auto& s : shapes) {
            params.push_back(random_tensor(s[0], s[1], rng));
        }
        const auto report = grad_check(
            [&](Tape& tape, std::span<const Var> v) { return weighted_sum(tape, op(tape, v), seed); }, params);
        CHECK(report.passed());
        CHECK(report.max_rel_error < 1e-6);
    }
}

}  // namespace

TEST_CASE("every primitive matches central differences") {
    check_op("matmul", [](Tape&, std::span<const Var> v) { return matmul(v[0], v[1]); }, {{3, 4}, {4, 2}});
    check_op("add", [](Tape&, std::span<const Var> v) { return add(v[0], v[1]); }, {{2, 3}, {2, 3}});
    check_op("sub", [](Tape&, std::span<const Var> v) { return sub(v[0], v[1]); }, {{2, 3}, {2, 3}});
    check_op("mul", [](Tape&, std::span<const Var> v) { return mul(v[0], v[1]); }, {{2, 3}, {2, 3}});
    check_op("scale", [](Tape&, std::span<const Var> v) { return scale(v[0], -2.5); }, {{3, 2}});
    check_op("add_row", [](Tape&, std::span<const Var> v) { return add_row(v[0], v[1]); }, {{4, 3}, {1, 3}});
    check_op("concat_cols", [](Tape&, std::span<const Var> v) { return concat_cols(v); }, {{3, 2}, {3, 1}, {3, 4}});
    check_op("slice_cols", [](Tape&, std::span<const Var> v) { return slice_cols(v[0], 1, 4); }, {{2, 5}});
    check_op(
        "gather_rows",
        [](Tape&, std::span<const Var> v) {
            const std::vector<std::size_t> rows{2, 0, 2, 1};
            return gather_rows(v[0], rows);
        },
        {{3, 2}});
    check_op("sigmoid", [](Tape&, std::span<const Var> v) { return sigmoid(v[0]); }, {{3, 3}});
    check_op("tanh", [](Tape&, std::span<const Var> v) { return tanh(v[0]); }, {{3, 3}});
    check_op("relu", [](Tape&, std::span<const Var> v) { return relu(v[0]); }, {{3, 3}});
    check_op("abs", [](Tape&, std::span<const Var> v) { return abs(v[0]); }, {{3, 3}});
    check_op("sum", [](Tape&, std::span<const Var> v) { return sum(v[0]); }, {{3, 4}});
    check_op("mean", [](Tape&, std::span<const Var> v) { return mean(v[0]); }, {{3, 4}});
    check_op("inner_product", [](Tape&, std::span<const Var> v) { return inner_product(v[0], v[1]); },
             {{4, 3}, {4, 3}});
}

TEST_CASE("matmul by identity") {
    std::mt19937_64 rng(1);
    Tape tape;
    const Tensor a = random_tensor(3, 4, rng);
    Tensor eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        eye(i, i) = 1.0;
    }
    CHECK(matmul(tape.constant(eye), tape.constant(a)).value() == a);
}

TEST_CASE("sigmoid derivative at zero") {
    Tape tape;
    const Var x = tape.variable(Tensor::scalar(0.0));
    const Var y = sigmoid(x);
    CHECK(y.value().item() == 0.5);
    tape.backward(y);
    CHECK(tape.gradient(x).item() == 0.25);
}

TEST_CASE("sigmoid is stable for large inputs") {
    Tape tape;
    Tensor x(1, 2);
    x[0] = 800.0;
    x[1] = -800.0;
    const Tensor y = sigmoid(tape.constant(x)).value();
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
    CHECK(y.all_finite());
}

TEST_CASE("abs subgradient at zero is zero") {
    Tape tape;
    Tensor t(1, 3);
    t[0] = -2.0;
    t[2] = 3.0;
    const Var x = tape.variable(t);
    tape.backward(sum(abs(x)));
    const Tensor g = tape.gradient(x);
    CHECK(g[0] == -1.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("simple gradients") {
    std::mt19937_64 rng(2);
    Tape tape;
    const Var x = tape.variable(random_tensor(2, 3, rng));
    tape.backward(sum(x));
    CHECK(tape.gradient(x) == Tensor(2, 3, 1.0));

    Tape t2;
    const Tensor av = random_tensor(1, 4, rng), bv = random_tensor(1, 4, rng);
    const Var a = t2.variable(av), b = t2.variable(bv);
    t2.backward(sum(inner_product(a, b)));
    CHECK(t2.gradient(a) == bv);
    CHECK(t2.gradient(b) == av);
}

TEST_CASE("shape errors name both shapes") {
    Tape tape;
    const Var a = tape.constant(Tensor(2, 3)), b = tape.constant(Tensor(2, 2));
    try {
        add(a, b);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
    CHECK_THROWS_AS(slice_cols(a, 2, 5), ShapeError);
    const std::vector<std::size_t> rows{5};
    CHECK_THROWS_AS(gather_rows(a, rows), ShapeError);
}

TEST_CASE("backward needs a scalar loss") {
    Tape tape;
    const Var x = tape.variable(Tensor(2, 2, 1.0));
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("random three-layer graph") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<Tensor> params{random_tensor(5, 4, rng), random_tensor(4, 6, rng), random_tensor(1, 6, rng),
                                   random_tensor(6, 3, rng), random_tensor(6, 2, rng)};
        auto f = [](Tape&, std::span<const Var> v) {
            const Var h1 = tanh(matmul(v[0], v[1]));
            const Var h2 = sigmoid(add_row(h1, v[2]));
            const Var h3 = matmul(h2, v[3]);
            const Var both = concat_cols(std::vector<Var>{h3, matmul(h1, v[4])});
            return add(mean(mul(both, both)), scale(sum(tanh(slice_cols(both, 1, 4))), 0.3));
        };
        const auto report = grad_check(f, params);
        CHECK(report.passed());
        CHECK(report.max_rel_error < 1e-6);
        CHECK(report.excluded == 0);
    }
}

TEST_CASE("quadratic check is essentially exact") {
    std::mt19937_64 rng(3);
    const auto report = grad_check([](Tape&, std::span<const Var> v) { return sum(mul(v[0], v[0])); },
                                   {random_tensor(3, 3, rng)});
    CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("kinks are excluded, not failed") {
    const auto at_abs =
        grad_check([](Tape&, std::span<const Var> v) { return sum(abs(v[0])); }, {Tensor(1, 3, 0.0)});
    CHECK(at_abs.passed());
    CHECK(at_abs.excluded == 0);
    const auto at_relu =
        grad_check([](Tape&, std::span<const Var> v) { return sum(relu(v[0])); }, {Tensor(1, 3, 0.0)});
    CHECK(at_relu.passed());
    CHECK(at_relu.excluded == 3);
}

TEST_CASE("wrong gradient is reported") {
    // A hand-made op whose backward rule is deliberately off by a factor of two.
    auto f = [](Tape& tape, std::span<const Var> v) {
        Tensor out = v[0].value();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = out[i] * out[i];
        }
        const Var x = v[0];
        const Var y = tape.record(std::move(out), {x}, [x](Tape& t, std::size_t self) {
            const Tensor g = t.grad(self);
            Tensor& gx = t.grad(x.id);
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += 4.0 * t.value(x.id)[i] * g[i];
            }
        });
        return sum(y);
    };
    std::mt19937_64 rng(4);
    const auto report = grad_check(f, {random_tensor(2, 2, rng)});
    CHECK_FALSE(report.passed());
    CHECK(report.failed == 4);
}

TEST_CASE("forward is bit-for-bit deterministic") {
    std::mt19937_64 rng(5);
    const Tensor a = random_tensor(6, 5, rng), b = random_tensor(5, 7, rng);
    auto run = [&] {
        Tape tape;
        return tanh(matmul(tape.constant(a), tape.constant(b))).value();
    };
    CHECK(run() == run());
}

TEST_CASE("tensor helpers") {
    const Eigen::MatrixXd m = (Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
    const Tensor t = Tensor::from_matrix(m);
    CHECK(t(1, 0) == 4.0);
    CHECK(t.to_matrix() == m);
    CHECK(t.shape_string() == "[2x3]");
    CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS((void)t.item(), ShapeError);
    Tensor bad = t;
    bad[0] = std::nan("");
    CHECK_FALSE(bad.all_finite());
}
