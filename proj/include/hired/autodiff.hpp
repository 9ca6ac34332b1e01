#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hired::ad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major matrix of doubles. Scalars are 1x1, vectors are 1xn or nx1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor from_matrix(const Eigen::MatrixXd& m);
    [[nodiscard]] Eigen::MatrixXd to_matrix() const;

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::array<std::size_t, 2> shape() const noexcept { return {rows_, cols_}; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
    [[nodiscard]] std::string shape_string() const;

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    [[nodiscard]] double item() const;

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] Eigen::Map<RowMatrix> map() {
        return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }
    [[nodiscard]] Eigen::Map<const RowMatrix> map() const {
        return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }

    [[nodiscard]] bool all_finite() const;
    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] std::size_t rows() const { return value().rows(); }
    [[nodiscard]] std::size_t cols() const { return value().cols(); }
};

/**
 * Append-only record of a computation. Nodes are stored in creation order,
 * which is a topological order, so `backward` is a single reverse sweep.
 * A tape is single-threaded and meant to live for one optimization step.
 */
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Var constant(Tensor value);
    Var variable(Tensor value);

    /// Adds an op result. `fn` is kept only when some input requires a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, Backward fn);
    Var record(Tensor value, std::span<const Var> inputs, Backward fn);

    [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer, allocated (zeroed) on first access.
    Tensor& grad(std::size_t id);
    /// Gradient of a node after `backward`; zeros if it never received one.
    [[nodiscard]] Tensor gradient(Var v) const;

    /// Reverse sweep from a 1x1 loss. Throws ShapeError for non-scalar losses.
    void backward(Var loss);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

/// Free-function form of `Tape::backward`.
inline void backward(Tape& tape, Var loss) { tape.backward(loss); }

// Primitive ops. Shapes must agree exactly except where noted; mismatches
// throw ShapeError naming both shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var scale(Var a, double factor);
Var add_row(Var a, Var row);           // broadcasts a 1xn row over every row of a
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var abs(Var a);                        // subgradient 0 at 0
Var sum(Var a);                        // -> 1x1
Var mean(Var a);                       // -> 1x1
Var inner_product(Var a, Var b);       // row-wise, m x n with m x n -> m x 1

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-6;
    /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    double abs_floor = 1e-7;
};

struct ParamGradCheck {
    std::size_t checked = 0;
    std::size_t excluded = 0;  // entries sitting on a kink (one-sided slopes disagree)
    std::size_t failed = 0;
    double max_rel_error = 0.0;
    std::size_t worst_entry = 0;
    /// ||analytic - numeric|| / max(||analytic||, ||numeric||, floor) over the non-kink entries.
    double tensor_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<ParamGradCheck> params;
    double max_rel_error = 0.0;
    double max_tensor_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
    std::size_t failed = 0;

    [[nodiscard]] bool passed() const noexcept { return failed == 0; }
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/**
 * Compares reverse-mode gradients of `f` against central differences for
 * every entry of every parameter. An entry whose central difference misses
 * but whose forward and backward one-sided slopes disagree by at least the
 * miss is a nonsmooth point: it is counted as excluded, not failed.
 */
GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor> params, const GradCheckOptions& options = {});

/// Evaluates `f` and returns (value, gradients) for the given parameters.
std::pair<double, std::vector<Tensor>> value_and_gradients(const ScalarFunction& f, const std::vector<Tensor>& params);

}  // namespace hired::ad
