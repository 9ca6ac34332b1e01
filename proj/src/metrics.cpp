#include "hired/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hired/csv.hpp"
#include "hired/error.hpp"
#include "hired/hierarchy.hpp"

namespace hired {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(what) + ": truth has " + std::to_string(a.size()) +
                         " values, prediction has " + std::to_string(b.size()));
    }
}

double finite_mean(const std::vector<double>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double wape(std::span<const double> truth, std::span<const double> pred) {
    check_lengths(truth, pred, "wape");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        num += std::abs(pred[i] - truth[i]);
        den += std::abs(truth[i]);
    }
    if (den == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return num / den;
}

double smape(std::span<const double> truth, std::span<const double> pred) {
    check_lengths(truth, pred, "smape");
    if (truth.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double den = std::abs(truth[i]) + std::abs(pred[i]);
        if (den > 0.0) {
            acc += std::abs(pred[i] - truth[i]) / den;
        }
    }
    return 2.0 * acc / static_cast<double>(truth.size());
}

MetricReport per_level_report(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& preds,
                              const HierarchyTree& tree) {
    if (truth.rows() != preds.rows() || truth.cols() != preds.cols()) {
        throw ShapeError("per_level_report: truth is " + std::to_string(truth.rows()) + "x" +
                         std::to_string(truth.cols()) + ", predictions are " + std::to_string(preds.rows()) +
                         "x" + std::to_string(preds.cols()));
    }
    if (static_cast<std::size_t>(truth.cols()) != tree.node_count()) {
        throw ShapeError("per_level_report: " + std::to_string(truth.cols()) + " columns for " +
                         std::to_string(tree.node_count()) + " nodes");
    }
    MetricReport report;
    std::vector<double> w, s, c;
    for (std::size_t level = 0; level < tree.level_count(); ++level) {
        const auto nodes = tree.nodes_at_level(level);
        if (nodes.empty() || truth.rows() == 0) {
            throw ShapeError("per_level_report: level " + std::to_string(level) + " is empty");
        }
        std::vector<double> y, yhat;
        y.reserve(nodes.size() * static_cast<std::size_t>(truth.rows()));
        yhat.reserve(y.capacity());
        for (std::size_t p : nodes) {
            const auto col = static_cast<Eigen::Index>(p);
            for (Eigen::Index r = 0; r < truth.rows(); ++r) {
                y.push_back(truth(r, col));
                yhat.push_back(preds(r, col));
            }
        }
        LevelMetrics lm;
        lm.level = level;
        lm.wape = wape(y, yhat);
        lm.wape_defined = std::isfinite(lm.wape);
        lm.smape = smape(y, yhat);
        lm.coherence = coherence_deviation(preds, tree, level);
        w.push_back(lm.wape);
        s.push_back(lm.smape);
        c.push_back(lm.coherence);
        report.levels.push_back(lm);
    }
    report.mean_wape = finite_mean(w);
    report.mean_smape = finite_mean(s);
    report.mean_coherence = finite_mean(c);
    return report;
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out << "level,wape,smape,coherence\n";
    for (const auto& lm : levels) {
        out << lm.level << ',' << csv::format_double(lm.wape) << ',' << csv::format_double(lm.smape) << ','
            << csv::format_double(lm.coherence) << '\n';
    }
    out << "mean," << csv::format_double(mean_wape) << ',' << csv::format_double(mean_smape) << ','
        << csv::format_double(mean_coherence) << '\n';
    return out.str();
}

}  // namespace hired
