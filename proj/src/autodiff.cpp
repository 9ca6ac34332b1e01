#include "hired/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hired/error.hpp"

namespace hired::ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + a.shape_string() + " and " + b.shape_string() + " differ");
    }
}

void require_same_tape(const char* op, Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) {
        throw ShapeError(std::string(op) + ": operands live on different tapes");
    }
}

Tape& tape_of(Var v) {
    if (v.tape == nullptr) {
        throw ShapeError("variable is not attached to a tape");
    }
    return *v.tape;
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
    Tensor out(a.rows(), a.cols());
    auto src = a.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = f(src[i]);
    }
    return out;
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("tensor data has " + std::to_string(data_.size()) + " entries, expected " +
                         std::to_string(rows * cols));
    }
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
    Tensor t(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    t.map() = m;
    return t;
}

Eigen::MatrixXd Tensor::to_matrix() const { return map(); }

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[' << rows_ << 'x' << cols_ << ']';
    return os.str();
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_string());
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

const Tensor& Var::value() const { return tape_of(*this).value(id); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true});
    return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward fn) {
    bool needs = false;
    for (const Var& v : inputs) {
        if (v.tape != this) {
            throw ShapeError("operands live on different tapes");
        }
        needs = needs || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : Backward{}, needs});
    return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

Tensor Tape::gradient(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) {
        return Tensor(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) {
        throw ShapeError("loss belongs to a different tape");
    }
    const Tensor& v = nodes_[loss.id].value;
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + v.shape_string());
    }
    for (auto& n : nodes_) {
        n.grad = Tensor();
    }
    grad(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.empty()) {
            n.backward(*this, i);
        }
    }
}

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul: inner dimensions of " + av.shape_string() + " and " + bv.shape_string() +
                         " differ");
    }
    Tensor out(av.rows(), bv.cols());
    out.map().noalias() = av.map() * bv.map();
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map().noalias() += g.map() * tp.value(b.id).map().transpose();
        }
        if (tp.requires_grad(b.id)) {
            tp.grad(b.id).map().noalias() += tp.value(a.id).map().transpose() * g.map();
        }
    });
}

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    require_same_shape("add", a.value(), b.value());
    Tensor out(a.rows(), a.cols());
    out.map() = a.value().map() + b.value().map();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map() += g.map();
        }
        if (tp.requires_grad(b.id)) {
            tp.grad(b.id).map() += g.map();
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape("sub", a, b);
    require_same_shape("sub", a.value(), b.value());
    Tensor out(a.rows(), a.cols());
    out.map() = a.value().map() - b.value().map();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map() += g.map();
        }
        if (tp.requires_grad(b.id)) {
            tp.grad(b.id).map() -= g.map();
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    require_same_shape("mul", a.value(), b.value());
    Tensor out(a.rows(), a.cols());
    out.map() = a.value().map().cwiseProduct(b.value().map());
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map() += g.map().cwiseProduct(tp.value(b.id).map());
        }
        if (tp.requires_grad(b.id)) {
            tp.grad(b.id).map() += g.map().cwiseProduct(tp.value(a.id).map());
        }
    });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    Tensor out(a.rows(), a.cols());
    out.map() = a.value().map() * factor;
    return t.record(std::move(out), {a}, [a, factor](Tape& tp, std::size_t self) {
        tp.grad(a.id).map() += tp.grad(self).map() * factor;
    });
}

Var add_row(Var a, Var row) {
    require_same_tape("add_row", a, row);
    const Tensor& av = a.value();
    const Tensor& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw ShapeError("add_row: cannot broadcast " + rv.shape_string() + " over " + av.shape_string());
    }
    Tensor out(av.rows(), av.cols());
    out.map() = av.map().rowwise() + rv.map().row(0);
    return a.tape->record(std::move(out), {a, row}, [a, row](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map() += g.map();
        }
        if (tp.requires_grad(row.id)) {
            tp.grad(row.id).map() += g.map().colwise().sum();
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: no operands");
    }
    Tape& t = tape_of(parts[0]);
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
        require_same_tape("concat_cols", parts[0], p);
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row counts " + parts[0].value().shape_string() + " and " +
                             p.value().shape_string() + " differ");
        }
        offsets.push_back(cols);
        cols += p.cols();
    }
    Tensor out(rows, cols);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        out.map().middleCols(static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(pv.cols())) = pv.map();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [inputs, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (!tp.requires_grad(inputs[k].id)) {
                continue;
            }
            Tensor& gi = tp.grad(inputs[k].id);
            gi.map() += g.map().middleCols(static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(gi.cols()));
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    if (begin > end || end > av.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of bounds for " + av.shape_string());
    }
    const auto b = static_cast<Eigen::Index>(begin);
    const auto w = static_cast<Eigen::Index>(end - begin);
    Tensor out(av.rows(), end - begin);
    out.map() = av.map().middleCols(b, w);
    return t.record(std::move(out), {a}, [a, b, w](Tape& tp, std::size_t self) {
        tp.grad(a.id).map().middleCols(b, w) += tp.grad(self).map();
    });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    Tensor out(rows.size(), av.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= av.rows()) {
            throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of bounds for " +
                             av.shape_string());
        }
        out.map().row(static_cast<Eigen::Index>(r)) = av.map().row(static_cast<Eigen::Index>(rows[r]));
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a.id);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            ga.map().row(static_cast<Eigen::Index>(idx[r])) += g.map().row(static_cast<Eigen::Index>(r));
        }
    });
}

Var sigmoid(Var a) {
    Tensor out = map_unary(a.value(), [](double x) {
        if (x >= 0.0) {
            return 1.0 / (1.0 + std::exp(-x));
        }
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        const auto y = tp.value(self).map().array();
        tp.grad(a.id).map().array() += tp.grad(self).map().array() * y * (1.0 - y);
    });
}

Var tanh(Var a) {
    Tensor out = map_unary(a.value(), [](double x) { return std::tanh(x); });
    return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        const auto y = tp.value(self).map().array();
        tp.grad(a.id).map().array() += tp.grad(self).map().array() * (1.0 - y * y);
    });
}

Var relu(Var a) {
    Tensor out = map_unary(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
    return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        const auto x = tp.value(a.id).map().array();
        tp.grad(a.id).map().array() += (x > 0.0).select(tp.grad(self).map().array(), 0.0);
    });
}

Var abs(Var a) {
    Tensor out = map_unary(a.value(), [](double x) { return std::abs(x); });
    return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        const Tensor& x = tp.value(a.id);
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a.id);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) {
                ga[i] += g[i];
            } else if (x[i] < 0.0) {
                ga[i] -= g[i];
            }
        }
    });
}

Var sum(Var a) {
    Tensor out = Tensor::scalar(a.value().map().sum());
    return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        tp.grad(a.id).map().array() += tp.grad(self)[0];
    });
}

Var mean(Var a) {
    const auto n = static_cast<double>(a.value().size());
    if (n == 0.0) {
        throw ShapeError("mean of an empty tensor");
    }
    Tensor out = Tensor::scalar(a.value().map().sum() / n);
    return tape_of(a).record(std::move(out), {a}, [a, n](Tape& tp, std::size_t self) {
        tp.grad(a.id).map().array() += tp.grad(self)[0] / n;
    });
}

Var inner_product(Var a, Var b) {
    require_same_tape("inner_product", a, b);
    require_same_shape("inner_product", a.value(), b.value());
    Tensor out(a.rows(), 1);
    out.map() = a.value().map().cwiseProduct(b.value().map()).rowwise().sum();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).map().col(0);
        if (tp.requires_grad(a.id)) {
            tp.grad(a.id).map() += g.asDiagonal() * tp.value(b.id).map();
        }
        if (tp.requires_grad(b.id)) {
            tp.grad(b.id).map() += g.asDiagonal() * tp.value(a.id).map();
        }
    });
}

std::pair<double, std::vector<Tensor>> value_and_gradients(const ScalarFunction& f, const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) {
        vars.push_back(tape.variable(p));
    }
    Var loss = f(tape, vars);
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(vars.size());
    for (Var v : vars) {
        grads.push_back(tape.gradient(v));
    }
    return {loss.value().item(), std::move(grads)};
}

GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor> params, const GradCheckOptions& options) {
    auto evaluate = [&](const std::vector<Tensor>& ps) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(ps.size());
        for (const auto& p : ps) {
            vars.push_back(tape.constant(p));
        }
        return f(tape, vars).value().item();
    };
    const auto [f0, analytic] = value_and_gradients(f, params);
    const double h = options.step;
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        ParamGradCheck pc;
        double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double x = params[p][i];
            params[p][i] = x + h;
            const double fp = evaluate(params);
            params[p][i] = x - h;
            const double fm = evaluate(params);
            params[p][i] = x;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p][i];
            const double miss = std::abs(a - numeric);
            const double rel = miss / std::max({std::abs(a), std::abs(numeric), options.abs_floor});
            ++pc.checked;
            const double forward = (fp - f0) / h;
            const double backward_slope = (f0 - fm) / h;
            const bool kink = rel > options.tolerance && std::abs(forward - backward_slope) >= miss;
            if (!kink) {
                diff_sq += miss * miss;
                analytic_sq += a * a;
                numeric_sq += numeric * numeric;
            }
            if (rel <= options.tolerance) {
                if (rel > pc.max_rel_error) {
                    pc.max_rel_error = rel;
                    pc.worst_entry = i;
                }
                continue;
            }
            if (kink) {
                ++pc.excluded;
                continue;
            }
            ++pc.failed;
            if (rel > pc.max_rel_error) {
                pc.max_rel_error = rel;
                pc.worst_entry = i;
            }
        }
        pc.tensor_rel_error =
            std::sqrt(diff_sq) / std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), options.abs_floor});
        report.max_tensor_rel_error = std::max(report.max_tensor_rel_error, pc.tensor_rel_error);
        report.checked += pc.checked;
        report.excluded += pc.excluded;
        report.failed += pc.failed;
        report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
        report.params.push_back(pc);
    }
    return report;
}

}  // namespace hired::ad
