#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "hired/config.hpp"
#include "hired/model.hpp"
#include "hired/panel.hpp"

namespace hired {

/**
 * Trained model plus what is needed to reuse it on the same panel. Stored as
 * JSON: {"format": "hired-checkpoint", "version": 1, "config", "nodes",
 * "representatives", "scaler", "covariate_dim", "tensors": [{"name",
 * "shape": [rows, cols], "data": [row-major values]}]}.
 */
struct Checkpoint {
    RunConfig config;
    std::vector<std::string> nodes;
    std::vector<std::size_t> representatives;
    Scaler scaler;
    ModelParams params;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
/// Throws DataError on a malformed file, a version mismatch, or tensors that
/// do not match the structure implied by the stored config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hired
