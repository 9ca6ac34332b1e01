#include "hired/export.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hired/csv.hpp"
#include "hired/error.hpp"

namespace hired {

std::vector<std::size_t> span_origins(std::size_t first, std::size_t last, std::size_t history, std::size_t horizon,
                                      std::size_t steps) {
    if (first == 0 || last < first || last > steps) {
        throw ConfigError("span " + std::to_string(first) + "-" + std::to_string(last) + " is outside the data (1-" +
                          std::to_string(steps) + ")");
    }
    if (first - 1 < history) {
        throw ConfigError("span starts at step " + std::to_string(first) + " but the model needs " +
                          std::to_string(history) + " history steps before it");
    }
    std::vector<std::size_t> origins;
    for (std::size_t o = first - 1; o + horizon <= last; o += horizon) {
        origins.push_back(o);
    }
    if (origins.empty()) {
        throw ConfigError("span " + std::to_string(first) + "-" + std::to_string(last) +
                          " is shorter than one horizon of " + std::to_string(horizon) + " steps");
    }
    return origins;
}

BasisExport export_basis(const ModelParams& params, const ModelConfig& config, const TimePanel& panel,
                         const Eigen::MatrixXd& z, std::span<const std::size_t> origins) {
    if (!params.embeddings || !params.bd_decoder) {
        throw ConfigError(std::string("mode ") + to_string(config.mode) + " has no basis branch to export");
    }
    std::vector<ForecastWindow> windows;
    for (std::size_t o : origins) {
        windows.push_back({0, o});
    }
    const BatchInputs inputs = prepare_batch(panel, z, windows, config);
    Tape tape;
    const ModelParamsT<Var> bound = bind(params, tape, false);
    const ForwardResult fwd = forward(bound, inputs, ModelMode::BdOnly, config.shared_encoder, tape);
    BasisExport ex;
    ex.origins.assign(origins.begin(), origins.end());
    ex.horizon = config.horizon;
    const auto K = static_cast<Eigen::Index>(config.embedding_dim);
    const auto F = config.horizon;
    ex.basis.resize(static_cast<Eigen::Index>(origins.size() * F), K);
    for (std::size_t j = 0; j < origins.size(); ++j) {
        for (std::size_t f = 0; f < F; ++f) {
            ex.basis.row(static_cast<Eigen::Index>(j * F + f)) =
                fwd.basis[f].value().to_matrix().row(static_cast<Eigen::Index>(inputs.origin_row[j]));
        }
    }
    ex.embeddings = params.embeddings->to_matrix();
    return ex;
}

std::string basis_csv(const BasisExport& ex, const std::vector<std::string>& time_index) {
    std::ostringstream os;
    os << "origin,step,time,label";
    for (Eigen::Index k = 0; k < ex.basis.cols(); ++k) {
        os << ",b" << k;
    }
    os << '\n';
    for (std::size_t j = 0; j < ex.origins.size(); ++j) {
        for (std::size_t f = 0; f < ex.horizon; ++f) {
            const std::size_t t = ex.origins[j] + f;
            os << ex.origins[j] + 1 << ',' << f + 1 << ',' << t + 1 << ','
               << (t < time_index.size() ? time_index[t] : std::string());
            for (Eigen::Index k = 0; k < ex.basis.cols(); ++k) {
                os << ',' << csv::format_double(ex.basis(static_cast<Eigen::Index>(j * ex.horizon + f), k));
            }
            os << '\n';
        }
    }
    return os.str();
}

std::string embeddings_csv(const BasisExport& ex, const HierarchyTree& tree) {
    std::ostringstream os;
    os << "node,name,level";
    for (Eigen::Index k = 0; k < ex.embeddings.cols(); ++k) {
        os << ",e" << k;
    }
    os << '\n';
    for (Eigen::Index i = 0; i < ex.embeddings.rows(); ++i) {
        const auto node = static_cast<std::size_t>(i);
        os << i << ',' << tree.name(node) << ',' << tree.level(node);
        for (Eigen::Index k = 0; k < ex.embeddings.cols(); ++k) {
            os << ',' << csv::format_double(ex.embeddings(i, k));
        }
        os << '\n';
    }
    return os.str();
}

std::string basis_svg(const BasisExport& ex) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double width = 800.0, height = 60.0 + 120.0 * static_cast<double>(ex.basis.cols());
    const double left = 50.0, right = 20.0, panel_h = 100.0, gap = 20.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const Eigen::Index n = ex.basis.rows();
    for (Eigen::Index k = 0; k < ex.basis.cols(); ++k) {
        const double top = 30.0 + static_cast<double>(k) * (panel_h + gap);
        const auto col = ex.basis.col(k);
        double lo = col.minCoeff(), hi = col.maxCoeff();
        if (hi - lo < 1e-12) {
            hi = lo + 1.0;
        }
        os << "<text x=\"5\" y=\"" << top + panel_h / 2 << "\">b" << k << "</text>\n";
        os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right << "\" height=\""
           << panel_h << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << colors[k % 10] << "\" stroke-width=\"1.2\" points=\"";
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = left + (width - left - right) * (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5);
            const double y = top + panel_h * (1.0 - (col(i) - lo) / (hi - lo));
            os << x << ',' << y << ' ';
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

double dominant_period(const Eigen::VectorXd& series) {
    const Eigen::Index n = series.size();
    if (n < 4) {
        throw ShapeError("dominant_period needs at least 4 samples");
    }
    const Eigen::VectorXd x = series.array() - series.mean();
    double best_power = -1.0;
    Eigen::Index best_k = 1;
    for (Eigen::Index k = 1; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
            re += x(t) * std::cos(a);
            im -= x(t) * std::sin(a);
        }
        const double power = re * re + im * im;
        if (power > best_power) {
            best_power = power;
            best_k = k;
        }
    }
    return static_cast<double>(n) / static_cast<double>(best_k);
}

}  // namespace hired
