#include "hired/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>

#include "hired/csv.hpp"
#include "hired/metrics.hpp"

namespace hired {

HierarchyTree HierarchyTree::from_edges(const std::vector<Edge>& edges,
                                        const std::vector<std::string>& extra_nodes) {
    if (edges.empty()) {
        if (extra_nodes.size() == 1) {
            return single(extra_nodes.front());
        }
        throw HierarchyError(HierarchyError::Reason::Empty, "", "hierarchy has no edges");
    }

    // Names in first-appearance order and the single parent of each child.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> seen;
    std::unordered_map<std::string, std::string> parent_of;
    std::unordered_map<std::string, std::vector<std::string>> kids;
    auto note = [&](const std::string& n) {
        if (seen.emplace(n, order.size()).second) {
            order.push_back(n);
        }
    };
    for (const auto& e : edges) {
        note(e.child);
        note(e.parent);
        if (e.child == e.parent) {
            throw HierarchyError(HierarchyError::Reason::Cycle, e.child,
                                 "cycle detected: node '" + e.child + "' is its own parent");
        }
        auto it = parent_of.find(e.child);
        if (it != parent_of.end()) {
            if (it->second == e.parent) {
                throw HierarchyError(HierarchyError::Reason::DuplicateChild, e.child,
                                     "duplicate edge for child '" + e.child + "'");
            }
            throw HierarchyError(HierarchyError::Reason::MultipleParents, e.child,
                                 "node '" + e.child + "' has more than one parent ('" + it->second +
                                     "', '" + e.parent + "')");
        }
        parent_of.emplace(e.child, e.parent);
        kids[e.parent].push_back(e.child);
    }

    std::vector<std::string> roots;
    for (const auto& n : order) {
        if (!parent_of.contains(n)) {
            roots.push_back(n);
        }
    }
    if (roots.empty()) {
        throw HierarchyError(HierarchyError::Reason::Cycle, order.front(),
                             "cycle detected: no root node (every node has a parent), e.g. '" +
                                 order.front() + "'");
    }
    if (roots.size() > 1) {
        throw HierarchyError(HierarchyError::Reason::MultipleRoots, roots[1],
                             "multiple roots: '" + roots[0] + "' and '" + roots[1] + "'");
    }

    HierarchyTree tree;
    std::unordered_map<std::string, std::size_t> index;
    std::queue<std::string> frontier;
    frontier.push(roots.front());
    index.emplace(roots.front(), 0);
    tree.names_.push_back(roots.front());
    tree.parent_.emplace_back(std::nullopt);
    while (!frontier.empty()) {
        const std::string current = frontier.front();
        frontier.pop();
        const std::size_t current_index = index.at(current);
        auto k = kids.find(current);
        if (k == kids.end()) {
            continue;
        }
        for (const auto& child : k->second) {
            const std::size_t child_index = tree.names_.size();
            index.emplace(child, child_index);
            tree.names_.push_back(child);
            tree.parent_.emplace_back(current_index);
            frontier.push(child);
        }
    }
    for (const auto& n : order) {
        if (!index.contains(n)) {
            throw HierarchyError(HierarchyError::Reason::Cycle, n,
                                 "cycle detected: node '" + n + "' is not reachable from root '" +
                                     roots.front() + "'");
        }
    }
    for (const auto& n : extra_nodes) {
        if (!index.contains(n)) {
            throw HierarchyError(HierarchyError::Reason::Orphan, n,
                                 "orphan node '" + n + "' does not appear in the hierarchy");
        }
    }
    tree.finalize();
    return tree;
}

HierarchyTree HierarchyTree::single(std::string name) {
    HierarchyTree tree;
    tree.names_.push_back(std::move(name));
    tree.parent_.emplace_back(std::nullopt);
    tree.finalize();
    return tree;
}

void HierarchyTree::finalize() {
    const std::size_t n = names_.size();
    children_.assign(n, {});
    levels_.assign(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t p = *parent_[i];
        children_[p].push_back(i);
        levels_[i] = levels_[p] + 1;
    }
    leaf_sets_.assign(n, {});
    // Children have larger indices than parents, so a reverse sweep sees every
    // child before its parent.
    for (std::size_t i = n; i-- > 0;) {
        if (children_[i].empty()) {
            leaf_sets_[i] = {i};
            continue;
        }
        auto& acc = leaf_sets_[i];
        for (std::size_t c : children_[i]) {
            acc.insert(acc.end(), leaf_sets_[c].begin(), leaf_sets_[c].end());
        }
        std::sort(acc.begin(), acc.end());
    }
    leaves_.clear();
    leaf_pos_.assign(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (children_[i].empty()) {
            leaf_pos_[i] = leaves_.size();
            leaves_.push_back(i);
        }
    }
    level_count_ = *std::max_element(levels_.begin(), levels_.end()) + 1;
}

std::optional<std::size_t> HierarchyTree::find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t HierarchyTree::leaf_position(std::size_t node) const {
    const std::size_t pos = leaf_pos_.at(node);
    if (pos >= names_.size()) {
        throw std::out_of_range("node '" + names_.at(node) + "' is not a leaf");
    }
    return pos;
}

std::vector<std::size_t> HierarchyTree::nodes_at_level(std::size_t level) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
        if (levels_[i] == level) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<Edge> read_edge_file(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open hierarchy file '" + path + "'");
    }
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && has_header) {
            continue;
        }
        const auto fields = csv::split_line(line);
        if (fields.size() == 1 && fields[0].empty()) {
            continue;
        }
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw DataError("expected 'child_id,parent_id' in '" + path + "'", line_no);
        }
        edges.push_back({fields[0], fields[1]});
    }
    return edges;
}

namespace {

void check_columns(const Eigen::MatrixXd& m, const HierarchyTree& tree, const char* what) {
    if (static_cast<std::size_t>(m.cols()) != tree.node_count()) {
        throw ShapeError(std::string(what) + ": panel has " + std::to_string(m.cols()) +
                         " columns but the hierarchy has " + std::to_string(tree.node_count()) + " nodes");
    }
}

}  // namespace

Eigen::MatrixXd rescale_to_mean_property(const Eigen::MatrixXd& raw, const HierarchyTree& tree) {
    check_columns(raw, tree, "rescale_to_mean_property");
    Eigen::MatrixXd out = raw;
    for (std::size_t p = 0; p < tree.node_count(); ++p) {
        out.col(static_cast<Eigen::Index>(p)) /= static_cast<double>(tree.leaf_set(p).size());
    }
    return out;
}

Eigen::MatrixXd rescale_to_sum_property(const Eigen::MatrixXd& mean_scaled, const HierarchyTree& tree) {
    check_columns(mean_scaled, tree, "rescale_to_sum_property");
    Eigen::MatrixXd out = mean_scaled;
    for (std::size_t p = 0; p < tree.node_count(); ++p) {
        out.col(static_cast<Eigen::Index>(p)) *= static_cast<double>(tree.leaf_set(p).size());
    }
    return out;
}

Eigen::MatrixXd aggregate_bottom_up(const Eigen::MatrixXd& leaf_values, const HierarchyTree& tree,
                                    AggregationMode mode) {
    const auto& leaves = tree.leaves();
    if (static_cast<std::size_t>(leaf_values.cols()) != leaves.size()) {
        throw ShapeError("aggregate_bottom_up: got " + std::to_string(leaf_values.cols()) +
                         " leaf columns, the hierarchy has " + std::to_string(leaves.size()) + " leaves");
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(leaf_values.rows(), static_cast<Eigen::Index>(tree.node_count()));
    for (std::size_t p = 0; p < tree.node_count(); ++p) {
        auto col = out.col(static_cast<Eigen::Index>(p));
        for (std::size_t leaf : tree.leaf_set(p)) {
            col += leaf_values.col(static_cast<Eigen::Index>(tree.leaf_position(leaf)));
        }
        if (mode == AggregationMode::Mean) {
            col /= static_cast<double>(tree.leaf_set(p).size());
        }
    }
    return out;
}

double max_sum_coherence_violation(const Eigen::MatrixXd& raw, const HierarchyTree& tree) {
    check_columns(raw, tree, "max_sum_coherence_violation");
    double worst = 0.0;
    for (std::size_t p = 0; p < tree.node_count(); ++p) {
        if (tree.is_leaf(p)) {
            continue;
        }
        for (Eigen::Index t = 0; t < raw.rows(); ++t) {
            double sum = 0.0;
            double mag = 0.0;
            for (std::size_t c : tree.children(p)) {
                const double v = raw(t, static_cast<Eigen::Index>(c));
                sum += v;
                mag += std::abs(v);
            }
            const double parent = raw(t, static_cast<Eigen::Index>(p));
            const double scale = std::max({std::abs(parent), mag, 1e-12});
            worst = std::max(worst, std::abs(parent - sum) / scale);
        }
    }
    return worst;
}

double coherence_deviation(const Eigen::MatrixXd& predictions, const HierarchyTree& tree, std::size_t level) {
    check_columns(predictions, tree, "coherence_deviation");
    if (level >= tree.level_count()) {
        throw std::out_of_range("level " + std::to_string(level) + " not present in hierarchy with " +
                                std::to_string(tree.level_count()) + " levels");
    }
    std::vector<double> own;
    std::vector<double> leaf_mean;
    for (std::size_t p : tree.nodes_at_level(level)) {
        const auto& ls = tree.leaf_set(p);
        for (Eigen::Index f = 0; f < predictions.rows(); ++f) {
            double m = 0.0;
            for (std::size_t i : ls) {
                m += predictions(f, static_cast<Eigen::Index>(i));
            }
            m /= static_cast<double>(ls.size());
            own.push_back(predictions(f, static_cast<Eigen::Index>(p)));
            // A leaf is its own leaf mean; pin it exactly so rounding cannot leak in.
            leaf_mean.push_back(tree.is_leaf(p) ? own.back() : m);
        }
    }
    if (own == leaf_mean) {
        return 0.0;  // also covers the all-zero level, where WAPE is undefined
    }
    return wape(own, leaf_mean);
}

}  // namespace hired
