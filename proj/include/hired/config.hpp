#pragma once

#include <json.hpp>

#include <optional>
#include <string>

#include "hired/model.hpp"
#include "hired/panel.hpp"
#include "hired/trainer.hpp"

namespace hired {

struct DataConfig {
    std::string values;
    std::string hierarchy;
    std::optional<std::string> covariates;
    bool hierarchy_header = true;
    MissingPolicy missing = MissingPolicy::Reject;
    std::string splits;
    std::size_t rolling_windows = 1;
    StandardizeScope standardize = StandardizeScope::Global;
};

/**
 * Everything a run needs, read from a JSON file with sections `data`,
 * `model`, `train` and `eval`. Unknown keys are rejected; omitted keys keep
 * their defaults. Relative data paths resolve against the config file.
 */
struct RunConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    MetricScale metric_scale = MetricScale::Rescaled;

    static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    static RunConfig load(const std::string& path);
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] SplitSpec split() const;
    [[nodiscard]] PanelSource panel_source() const;
    void validate() const;
};

const char* to_string(StandardizeScope s);
const char* to_string(MissingPolicy m);
const char* to_string(MetricScale s);

}  // namespace hired
