#include "hired/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hired/csv.hpp"

namespace hired {

namespace {

constexpr double kCoherenceTolerance = 1e-6;

struct WideCsv {
    std::vector<std::string> columns;  // excluding the time column
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;
};

WideCsv read_wide_csv(const std::string& path, MissingPolicy missing, std::vector<std::string>& provenance) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    WideCsv out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = csv::split_line(line);
        if (out.columns.empty()) {
            if (fields.size() < 2) {
                throw DataError("'" + path + "' needs a time column and at least one series column", line_no);
            }
            out.columns.assign(fields.begin() + 1, fields.end());
            continue;
        }
        if (fields.size() != out.columns.size() + 1) {
            throw DataError("'" + path + "': expected " + std::to_string(out.columns.size() + 1) + " fields, got " +
                                std::to_string(fields.size()),
                            line_no);
        }
        std::vector<double> row(out.columns.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
            double v = 0.0;
            if (!csv::parse_number(fields[j + 1], v)) {
                throw DataError("'" + path + "': cannot parse '" + fields[j + 1] + "' in column '" +
                                    out.columns[j] + "'",
                                line_no);
            }
            if (std::isinf(v)) {
                throw DataError("'" + path + "': infinite value in column '" + out.columns[j] + "'", line_no);
            }
            if (std::isnan(v)) {
                if (missing == MissingPolicy::Reject || out.rows.empty()) {
                    throw DataError("'" + path + "': missing value in column '" + out.columns[j] + "'", line_no);
                }
                v = out.rows.back()[j];
                provenance.push_back("forward-filled " + out.columns[j] + " at line " + std::to_string(line_no));
            }
            row[j] = v;
        }
        out.labels.push_back(fields[0]);
        out.rows.push_back(std::move(row));
        out.line_numbers.push_back(line_no);
    }
    if (out.rows.empty()) {
        throw DataError("'" + path + "' has no data rows");
    }
    return out;
}

// Sakamoto's method; 0 = Sunday.
int day_of_week(int y, int m, int d) {
    static const int offsets[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    if (m < 3) {
        y -= 1;
    }
    return (y + y / 4 - y / 100 + y / 400 + offsets[m - 1] + d) % 7;
}

bool parse_ymd(const std::string& s, int& y, int& m, int& d) {
    char dash1 = 0;
    char dash2 = 0;
    std::istringstream in(s);
    if (!(in >> y >> dash1 >> m)) {
        return false;
    }
    d = 0;
    if (in >> dash2 >> d) {
        return dash1 == '-' && dash2 == '-' && m >= 1 && m <= 12 && d >= 1 && d <= 31 && in.eof();
    }
    return dash1 == '-' && m >= 1 && m <= 12;
}

}  // namespace

SplitSpec SplitSpec::parse(const std::string& text, std::size_t rolling_windows) {
    SplitSpec s;
    s.rolling_windows = rolling_windows;
    char c1 = 0, c2 = 0, d1 = 0, d2 = 0;
    std::istringstream in(text);
    if (!(in >> s.train_end >> c1 >> s.val_start >> d1 >> s.val_end >> c2 >> s.test_start >> d2 >> s.test_end) ||
        c1 != ':' || c2 != ':' || d1 != '-' || d2 != '-' || !(in >> std::ws).eof()) {
        throw ConfigError("bad splits '" + text + "', expected train_end:val_start-val_end:test_start-test_end");
    }
    return s;
}

void SplitSpec::validate(std::size_t steps) const {
    if (!(train_end >= 1 && train_end < val_start && val_start <= val_end && val_end < test_start &&
          test_start <= test_end && test_end <= steps)) {
        throw ConfigError("invalid splits " + to_string() + " for " + std::to_string(steps) +
                          " steps: need train_end < val_start <= val_end < test_start <= test_end <= T");
    }
    if (rolling_windows == 0) {
        throw ConfigError("rolling window count must be positive");
    }
}

std::string SplitSpec::to_string() const {
    return std::to_string(train_end) + ":" + std::to_string(val_start) + "-" + std::to_string(val_end) + ":" +
           std::to_string(test_start) + "-" + std::to_string(test_end);
}

const char* to_string(Segment s) {
    switch (s) {
        case Segment::Train: return "train";
        case Segment::Val: return "val";
        case Segment::Test: return "test";
    }
    return "?";
}

Segment parse_segment(const std::string& s) {
    if (s == "train") return Segment::Train;
    if (s == "val") return Segment::Val;
    if (s == "test") return Segment::Test;
    throw ConfigError("unknown segment '" + s + "' (expected train, val or test)");
}

Eigen::MatrixXd calendar_features(const std::vector<std::string>& time_index, std::vector<std::string>* names) {
    const auto T = static_cast<Eigen::Index>(time_index.size());
    int y = 0, m = 0, d = 0;
    bool dated = !time_index.empty();
    bool monthly = dated;
    for (const auto& label : time_index) {
        if (!parse_ymd(label, y, m, d)) {
            dated = false;
            monthly = false;
            break;
        }
        monthly = monthly && d == 0;
    }
    const Eigen::Index cycle = monthly ? 12 : 7;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(T, cycle + 1);
    for (Eigen::Index t = 0; t < T; ++t) {
        Eigen::Index slot = t % 7;
        if (dated) {
            parse_ymd(time_index[static_cast<std::size_t>(t)], y, m, d);
            slot = monthly ? m - 1 : day_of_week(y, m, d);
        }
        x(t, slot) = 1.0;
        x(t, cycle) = T > 1 ? static_cast<double>(t) / static_cast<double>(T - 1) : 0.0;
    }
    if (names) {
        names->clear();
        for (Eigen::Index k = 0; k < cycle; ++k) {
            names->push_back((monthly ? "month_" : "dow_") + std::to_string(k));
        }
        names->push_back("position");
    }
    return x;
}

TimePanel make_panel(const Eigen::MatrixXd& raw_sums, std::shared_ptr<const HierarchyTree> tree,
                     std::vector<std::string> time_index, std::optional<Eigen::MatrixXd> covariates) {
    if (static_cast<std::size_t>(raw_sums.rows()) != time_index.size()) {
        throw ShapeError("make_panel: " + std::to_string(raw_sums.rows()) + " rows but " +
                         std::to_string(time_index.size()) + " time labels");
    }
    TimePanel panel;
    panel.values = rescale_to_mean_property(raw_sums, *tree);
    panel.time_index = std::move(time_index);
    if (covariates) {
        if (covariates->rows() != raw_sums.rows()) {
            throw ShapeError("make_panel: covariates have " + std::to_string(covariates->rows()) + " rows, values " +
                             std::to_string(raw_sums.rows()));
        }
        panel.covariates = *covariates;
        for (Eigen::Index k = 0; k < covariates->cols(); ++k) {
            panel.covariate_names.push_back("x" + std::to_string(k));
        }
    } else {
        panel.covariates = calendar_features(panel.time_index, &panel.covariate_names);
    }
    panel.tree = std::move(tree);
    const std::size_t n = panel.series();
    panel.scaler.mean.assign(n, 0.0);
    panel.scaler.std.assign(n, 1.0);
    return panel;
}

TimePanel load_panel(const PanelSource& source) {
    std::vector<std::string> provenance;
    WideCsv values = read_wide_csv(source.values_path, source.missing, provenance);
    auto edges = read_edge_file(source.hierarchy_path, source.hierarchy_has_header);
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::from_edges(edges, values.columns));

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t j = 0; j < values.columns.size(); ++j) {
        if (!column_of.emplace(values.columns[j], j).second) {
            throw DataError("duplicate column '" + values.columns[j] + "' in '" + source.values_path + "'", 1);
        }
    }
    const auto T = static_cast<Eigen::Index>(values.rows.size());
    const std::size_t n = tree->node_count();
    const auto& leaves = tree->leaves();

    Eigen::MatrixXd raw;
    if (values.columns.size() == n) {
        raw.resize(T, static_cast<Eigen::Index>(n));
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t j = column_of.at(tree->name(p));
            for (Eigen::Index t = 0; t < T; ++t) {
                raw(t, static_cast<Eigen::Index>(p)) = values.rows[static_cast<std::size_t>(t)][j];
            }
        }
        const double violation = max_sum_coherence_violation(raw, *tree);
        if (violation > kCoherenceTolerance) {
            throw DataError("values are not sum-coherent with the hierarchy (max relative violation " +
                            csv::format_double(violation) + ")");
        }
    } else if (values.columns.size() == leaves.size() &&
               std::all_of(leaves.begin(), leaves.end(),
                           [&](std::size_t leaf) { return column_of.contains(tree->name(leaf)); })) {
        Eigen::MatrixXd leaf_values(T, static_cast<Eigen::Index>(leaves.size()));
        for (std::size_t k = 0; k < leaves.size(); ++k) {
            const std::size_t j = column_of.at(tree->name(leaves[k]));
            for (Eigen::Index t = 0; t < T; ++t) {
                leaf_values(t, static_cast<Eigen::Index>(k)) = values.rows[static_cast<std::size_t>(t)][j];
            }
        }
        raw = aggregate_bottom_up(leaf_values, *tree, AggregationMode::Sum);
        provenance.push_back("internal nodes synthesized from " + std::to_string(leaves.size()) + " leaf columns");
    } else {
        throw DataError("dimension mismatch: '" + source.values_path + "' has " +
                        std::to_string(values.columns.size()) + " series columns; the hierarchy has " +
                        std::to_string(n) + " nodes and " + std::to_string(leaves.size()) + " leaves");
    }

    std::optional<Eigen::MatrixXd> covariates;
    std::vector<std::string> covariate_names;
    if (source.covariates_path) {
        WideCsv cov = read_wide_csv(*source.covariates_path, source.missing, provenance);
        if (cov.rows.size() != values.rows.size()) {
            throw DataError("covariates have " + std::to_string(cov.rows.size()) + " rows, values have " +
                            std::to_string(values.rows.size()));
        }
        Eigen::MatrixXd x(T, static_cast<Eigen::Index>(cov.columns.size()));
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto ut = static_cast<std::size_t>(t);
            if (cov.labels[ut] != values.labels[ut]) {
                throw DataError("covariate time label '" + cov.labels[ut] + "' does not match '" + values.labels[ut] +
                                    "'",
                                cov.line_numbers[ut]);
            }
            for (std::size_t k = 0; k < cov.columns.size(); ++k) {
                x(t, static_cast<Eigen::Index>(k)) = cov.rows[ut][k];
            }
        }
        covariates = std::move(x);
        covariate_names = cov.columns;
    }

    TimePanel panel = make_panel(raw, tree, values.labels, covariates);
    if (!covariate_names.empty()) {
        panel.covariate_names = covariate_names;
    }
    panel.provenance = std::move(provenance);
    return panel;
}

TimePanel standardize(const TimePanel& panel, const SplitSpec& split, StandardizeScope scope) {
    split.validate(panel.steps());
    TimePanel out = panel;
    const auto rows = static_cast<Eigen::Index>(split.train_end);
    const auto train = panel.values.topRows(rows);
    const std::size_t n = panel.series();
    out.scaler.mean.assign(n, 0.0);
    out.scaler.std.assign(n, 1.0);
    auto fix_std = [](double var) {
        const double s = std::sqrt(std::max(var, 0.0));
        return s > 0.0 ? s : 1.0;
    };
    if (scope == StandardizeScope::Global) {
        const double mu = train.mean();
        const double var = (train.array() - mu).square().mean();
        out.scaler.mean.assign(n, mu);
        out.scaler.std.assign(n, fix_std(var));
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            const auto col = train.col(static_cast<Eigen::Index>(j));
            const double mu = col.mean();
            out.scaler.mean[j] = mu;
            out.scaler.std[j] = fix_std((col.array() - mu).square().mean());
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        auto col = out.values.col(static_cast<Eigen::Index>(j));
        col = ((col.array() - out.scaler.mean[j]) / out.scaler.std[j]).matrix();
    }
    out.standardized = true;
    return out;
}

Eigen::MatrixXd inverse_standardize(const Eigen::MatrixXd& values, const Scaler& scaler,
                                    std::span<const std::size_t> nodes) {
    Eigen::MatrixXd out = values;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const std::size_t node = nodes.empty() ? static_cast<std::size_t>(j) : nodes[static_cast<std::size_t>(j)];
        out.col(j) = (values.col(j).array() * scaler.std.at(node) + scaler.mean.at(node)).matrix();
    }
    return out;
}

std::vector<ForecastWindow> make_windows(const TimePanel& panel, const SplitSpec& split, const WindowShape& shape,
                                         Segment segment) {
    split.validate(panel.steps());
    const std::size_t H = shape.history;
    const std::size_t F = shape.horizon;
    if (H == 0 || F == 0 || shape.stride == 0) {
        throw ConfigError("history, horizon and stride must be positive");
    }
    std::vector<ForecastWindow> out;
    const std::size_t n = panel.series();
    if (segment == Segment::Train) {
        const std::size_t len = split.train_end;
        if (len < H + F) {
            throw ConfigError("train segment has " + std::to_string(len) + " steps; needs at least H+F = " +
                              std::to_string(H + F));
        }
        for (std::size_t origin = H; origin + F <= len; origin += shape.stride) {
            for (std::size_t i = 0; i < n; ++i) {
                out.push_back({i, origin});
            }
        }
        return out;
    }
    const std::size_t start = segment == Segment::Val ? split.val_start : split.test_start;
    const std::size_t end = segment == Segment::Val ? split.val_end : split.test_end;
    const std::size_t len = end - start + 1;
    const std::size_t k = split.rolling_windows;
    if (len < H + k * F) {
        throw ConfigError(std::string(to_string(segment)) + " segment has " + std::to_string(len) + " steps; " +
                          std::to_string(k) + " rolling windows need at least H + k*F = " +
                          std::to_string(H + k * F));
    }
    // `end` is 1-based inclusive, i.e. the 0-based exclusive end row.
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t origin = end - (k - j) * F;
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back({i, origin});
        }
    }
    return out;
}

WindowData materialize(const TimePanel& panel, const Eigen::MatrixXd& z, const ForecastWindow& w,
                       const WindowShape& shape) {
    const auto H = static_cast<Eigen::Index>(shape.history);
    const auto F = static_cast<Eigen::Index>(shape.horizon);
    const auto o = static_cast<Eigen::Index>(w.origin);
    if (o < H || o + F > static_cast<Eigen::Index>(panel.steps())) {
        throw ShapeError("window at origin " + std::to_string(w.origin) + " does not fit in " +
                         std::to_string(panel.steps()) + " steps");
    }
    const auto col = static_cast<Eigen::Index>(w.series);
    WindowData d;
    d.series = w.series;
    d.history = panel.values.block(o - H, col, H, 1);
    d.target = panel.values.block(o, col, F, 1);
    d.cov_history = panel.covariates.middleRows(o - H, H);
    d.cov_future = panel.covariates.middleRows(o, F);
    d.z_history = z.middleRows(o - H, H);
    return d;
}

BatchIterator::BatchIterator(std::vector<ForecastWindow> windows, std::size_t batch_size, std::uint64_t shuffle_seed)
    : windows_(std::move(windows)), batch_size_(batch_size == 0 ? 1 : batch_size) {
    std::mt19937_64 rng(shuffle_seed);
    // Fisher-Yates on raw engine output: the order depends only on the seed.
    for (std::size_t i = windows_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(windows_[i - 1], windows_[j]);
    }
}

std::size_t BatchIterator::batch_count() const noexcept {
    return (windows_.size() + batch_size_ - 1) / batch_size_;
}

std::span<const ForecastWindow> BatchIterator::batch(std::size_t i) const {
    const std::size_t begin = i * batch_size_;
    if (begin >= windows_.size()) {
        return {};
    }
    const std::size_t end = std::min(windows_.size(), begin + batch_size_);
    return std::span<const ForecastWindow>(windows_).subspan(begin, end - begin);
}

std::span<const ForecastWindow> BatchIterator::next() {
    auto b = batch(cursor_);
    if (!b.empty()) {
        ++cursor_;
    }
    return b;
}

}  // namespace hired
