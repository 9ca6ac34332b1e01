#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hired/hierarchy.hpp"

namespace hired::testing {

/// Random rooted tree: node k > 0 attaches to a uniformly chosen earlier node.
inline HierarchyTree random_tree(std::size_t nodes, std::mt19937_64& rng) {
    std::vector<Edge> edges;
    for (std::size_t k = 1; k < nodes; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        edges.push_back({"n" + std::to_string(k), "n" + std::to_string(pick(rng))});
    }
    return HierarchyTree::from_edges(edges);
}

/// Root with `groups` children, each with `leaves` children (1 + g + g*l nodes).
inline HierarchyTree two_level_tree(std::size_t groups, std::size_t leaves) {
    std::vector<Edge> edges;
    for (std::size_t g = 0; g < groups; ++g) {
        edges.push_back({"g" + std::to_string(g), "root"});
    }
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t l = 0; l < leaves; ++l) {
            edges.push_back({"g" + std::to_string(g) + "_" + std::to_string(l), "g" + std::to_string(g)});
        }
    }
    return HierarchyTree::from_edges(edges);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = u(rng);
    }
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hired_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace hired::testing
