#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hired/error.hpp"

namespace hired {

/// Raised by tree construction; `node()` names the offending node.
class HierarchyError : public Error {
public:
    enum class Reason { Cycle, MultipleRoots, Orphan, MultipleParents, DuplicateChild, Empty };

    HierarchyError(Reason reason, std::string node, const std::string& message)
        : Error("hierarchy_error", message), reason_(reason), node_(std::move(node)) {}

    [[nodiscard]] Reason reason() const noexcept { return reason_; }
    [[nodiscard]] const std::string& node() const noexcept { return node_; }

private:
    Reason reason_;
    std::string node_;
};

struct Edge {
    std::string child;
    std::string parent;
};

enum class AggregationMode { Sum, Mean };

/**
 * Rooted aggregation tree over N series.
 *
 * Nodes are indexed breadth-first from the root: parents always precede their
 * children and siblings keep the order in which their edges were supplied.
 * Leaf sets are ascending lists of leaf node indices.
 */
class HierarchyTree {
public:
    /// Builds a tree from (child, parent) pairs. `extra_nodes` lists names that
    /// must also be present (e.g. value columns); any not reachable through an
    /// edge is reported as an orphan.
    static HierarchyTree from_edges(const std::vector<Edge>& edges,
                                    const std::vector<std::string>& extra_nodes = {});

    /// A single-node tree (root is its own only leaf).
    static HierarchyTree single(std::string name);

    [[nodiscard]] std::size_t node_count() const noexcept { return names_.size(); }
    [[nodiscard]] std::size_t root() const noexcept { return 0; }
    [[nodiscard]] const std::optional<std::size_t>& parent(std::size_t node) const { return parent_.at(node); }
    [[nodiscard]] const std::vector<std::size_t>& children(std::size_t node) const { return children_.at(node); }
    [[nodiscard]] const std::vector<std::size_t>& leaf_set(std::size_t node) const { return leaf_sets_.at(node); }
    [[nodiscard]] std::size_t level(std::size_t node) const { return levels_.at(node); }
    [[nodiscard]] const std::string& name(std::size_t node) const { return names_.at(node); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] bool is_leaf(std::size_t node) const { return children_.at(node).empty(); }

    /// Index of the node with the given name, if any.
    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const;

    /// All leaves in node-index order. This is the column order expected by
    /// `aggregate_bottom_up`.
    [[nodiscard]] const std::vector<std::size_t>& leaves() const noexcept { return leaves_; }
    /// Position of a leaf node within `leaves()`.
    [[nodiscard]] std::size_t leaf_position(std::size_t node) const;

    /// Number of distinct levels (max depth + 1).
    [[nodiscard]] std::size_t level_count() const noexcept { return level_count_; }
    /// Nodes at a given depth, in index order.
    [[nodiscard]] std::vector<std::size_t> nodes_at_level(std::size_t level) const;

private:
    HierarchyTree() = default;
    void finalize();

    std::vector<std::string> names_;
    std::vector<std::optional<std::size_t>> parent_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::vector<std::size_t>> leaf_sets_;
    std::vector<std::size_t> levels_;
    std::vector<std::size_t> leaves_;
    std::vector<std::size_t> leaf_pos_;
    std::size_t level_count_ = 0;
};

/// Reads a `child,parent` edge file. When `has_header` is set the first line is skipped.
std::vector<Edge> read_edge_file(const std::string& path, bool has_header);

/// Divides each node's column by |L(p)| so a sum-coherent panel satisfies the
/// mean property. `raw` is T x N with columns in node-index order.
Eigen::MatrixXd rescale_to_mean_property(const Eigen::MatrixXd& raw, const HierarchyTree& tree);

/// Inverse of `rescale_to_mean_property`.
Eigen::MatrixXd rescale_to_sum_property(const Eigen::MatrixXd& mean_scaled, const HierarchyTree& tree);

/// Synthesizes every node from leaf columns (ordered as `tree.leaves()`).
Eigen::MatrixXd aggregate_bottom_up(const Eigen::MatrixXd& leaf_values, const HierarchyTree& tree,
                                    AggregationMode mode);

/// Largest relative violation of parent = sum(children) over all timesteps
/// and internal nodes. Relative to max(|parent|, sum |children|, 1e-12).
double max_sum_coherence_violation(const Eigen::MatrixXd& raw, const HierarchyTree& tree);

/**
 * WAPE between each node's prediction at `level` and the mean of its subtree's
 * leaf predictions, pooled over every timestep and node of that level.
 * `predictions` is F x N. Leaf nodes contribute zero deviation.
 */
double coherence_deviation(const Eigen::MatrixXd& predictions, const HierarchyTree& tree, std::size_t level);

}  // namespace hired
