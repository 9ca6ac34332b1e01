#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "hired/model.hpp"
#include "hired/panel.hpp"

namespace hired {

/// Basis vectors b_f generated at a set of forecast origins.
struct BasisExport {
    std::vector<std::size_t> origins;  // 0-based first target rows
    std::size_t horizon = 0;
    Eigen::MatrixXd basis;             // (origins * F) x K; row j*F + f is step f from origins[j]
    Eigen::MatrixXd embeddings;        // N x K
};

/// Origins F apart covering the 1-based target steps [first, last]. Throws
/// ConfigError when the span leaves no room for H history steps or runs past T.
std::vector<std::size_t> span_origins(std::size_t first, std::size_t last, std::size_t history, std::size_t horizon,
                                      std::size_t steps);

/// Runs the basis branch at `origins`. Requires a model with that branch.
BasisExport export_basis(const ModelParams& params, const ModelConfig& config, const TimePanel& panel,
                         const Eigen::MatrixXd& z, std::span<const std::size_t> origins);

/// CSV `origin,step,time,label,b0,...`; origin and time are 1-based timesteps,
/// label is the time index entry.
std::string basis_csv(const BasisExport& ex, const std::vector<std::string>& time_index);
/// CSV `node,name,level,e0,...`, one row per node.
std::string embeddings_csv(const BasisExport& ex, const HierarchyTree& tree);
/// Static line chart of every basis dimension over the exported span.
std::string basis_svg(const BasisExport& ex);

/// Period (in steps) of the largest nonzero-frequency DFT coefficient of a
/// mean-removed series.
double dominant_period(const Eigen::VectorXd& series);

}  // namespace hired
