#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "hired/model.hpp"
#include "hired/representatives.hpp"

namespace hired::testing {

/// Standardized panel on a root/2 groups/4 leaves tree with representatives and windows.
struct ModelFixture {
    TimePanel panel;
    Eigen::MatrixXd z;
    ModelConfig config;
    SplitSpec split;
};

/// Raw panel on a root/2 groups/4 leaves tree: noisy sinusoids around 5.
inline TimePanel small_raw_panel(std::uint64_t seed, std::size_t steps = 30) {
    std::vector<Edge> edges{{"g0", "root"}, {"g1", "root"}, {"g0_a", "g0"}, {"g0_b", "g0"},
                            {"g1_a", "g1"}, {"g1_b", "g1"}};
    auto tree = std::make_shared<const HierarchyTree>(HierarchyTree::from_edges(edges));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> phase(0.0, 6.0);
    Eigen::MatrixXd leaves(static_cast<Eigen::Index>(steps), 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
        const double ph = phase(rng);
        for (Eigen::Index t = 0; t < leaves.rows(); ++t) {
            leaves(t, j) = 5.0 + 2.0 * std::sin(0.9 * static_cast<double>(t) + ph) + noise(rng);
        }
    }
    std::vector<std::string> labels;
    for (std::size_t t = 0; t < steps; ++t) {
        labels.push_back(std::to_string(t + 1));
    }
    return make_panel(aggregate_bottom_up(leaves, *tree, AggregationMode::Sum), tree, labels);
}

inline SplitSpec small_split(std::size_t steps = 30) {
    return SplitSpec{steps - 12, steps - 11, steps - 6, steps - 5, steps, 1};
}

inline ModelConfig small_config() {
    ModelConfig c;
    c.history = 4;
    c.horizon = 2;
    c.embedding_dim = 3;
    c.representatives = 2;
    c.lstm_hidden = 5;
    c.decoder_hidden = 4;
    c.lambda_e = 0.5;
    c.embedding_init_std = 0.3;
    return c;
}

inline ModelFixture small_fixture(std::uint64_t seed, std::size_t steps = 30) {
    ModelFixture fx;
    fx.split = small_split(steps);
    fx.panel = standardize(small_raw_panel(seed, steps), fx.split);
    fx.config = small_config();
    fx.z = build_z(fx.panel, select_representatives(fx.panel, fx.split, fx.config.representatives));
    return fx;
}

/// Zero basis readout and TVAR heads that put all weight on the last lag.
inline void make_persistence(ModelParams& params) {
    for (auto& out : params.tvar_decoder->output) {
        out.weight.fill(0.0);
        out.bias.fill(0.0);
        out.bias[out.bias.size() - 1] = 1.0;
    }
    if (params.bd_decoder) {
        params.bd_decoder->readout.weight.fill(0.0);
        params.bd_decoder->readout.bias.fill(0.0);
    }
}

/// One window per node at each of the given origins.
inline std::vector<ForecastWindow> all_nodes_at(const TimePanel& panel, std::initializer_list<std::size_t> origins) {
    std::vector<ForecastWindow> out;
    for (std::size_t o : origins) {
        for (std::size_t i = 0; i < panel.series(); ++i) {
            out.push_back({i, o});
        }
    }
    return out;
}

}  // namespace hired::testing
