#include "hired/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "hired/error.hpp"

namespace hired {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where, const std::set<std::string>& known) {
    if (!section.is_object()) {
        throw ConfigError("'" + where + "' must be an object");
    }
    for (const auto& [key, _] : section.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <typename T>
void read(const json& section, const std::string& where, const char* key, T& out) {
    if (!section.contains(key)) {
        return;
    }
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
    }
}

void read_size(const json& section, const std::string& where, const char* key, std::size_t& out) {
    if (!section.contains(key)) {
        return;
    }
    const json& v = section.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config key '" + where + "." + key + "' must be a nonnegative integer");
    }
    out = v.get<std::size_t>();
}

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) {
        return path;
    }
    return (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

const char* to_string(StandardizeScope s) { return s == StandardizeScope::Global ? "global" : "per_series"; }
const char* to_string(MissingPolicy m) { return m == MissingPolicy::Reject ? "reject" : "forward_fill"; }
const char* to_string(MetricScale s) { return s == MetricScale::Raw ? "raw" : "rescaled"; }

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
    reject_unknown(j, "", {"data", "model", "train", "eval"});
    RunConfig c;
    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown(d, "data",
                       {"values", "hierarchy", "covariates", "hierarchy_header", "missing", "splits", "rolling_windows",
                        "standardize"});
        read(d, "data", "values", c.data.values);
        read(d, "data", "hierarchy", c.data.hierarchy);
        if (d.contains("covariates") && !d.at("covariates").is_null()) {
            std::string cov;
            read(d, "data", "covariates", cov);
            c.data.covariates = resolve(cov, base_dir);
        }
        read(d, "data", "hierarchy_header", c.data.hierarchy_header);
        std::string missing = to_string(c.data.missing);
        read(d, "data", "missing", missing);
        if (missing == "reject") {
            c.data.missing = MissingPolicy::Reject;
        } else if (missing == "forward_fill") {
            c.data.missing = MissingPolicy::ForwardFill;
        } else {
            throw ConfigError("data.missing must be 'reject' or 'forward_fill', got '" + missing + "'");
        }
        read(d, "data", "splits", c.data.splits);
        read_size(d, "data", "rolling_windows", c.data.rolling_windows);
        std::string scope = to_string(c.data.standardize);
        read(d, "data", "standardize", scope);
        if (scope == "global") {
            c.data.standardize = StandardizeScope::Global;
        } else if (scope == "per_series") {
            c.data.standardize = StandardizeScope::PerSeries;
        } else {
            throw ConfigError("data.standardize must be 'global' or 'per_series', got '" + scope + "'");
        }
        c.data.values = resolve(c.data.values, base_dir);
        c.data.hierarchy = resolve(c.data.hierarchy, base_dir);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, "model",
                       {"history", "horizon", "embedding_dim", "representatives", "lstm_hidden", "decoder_hidden",
                        "lambda_e", "mode", "shared_encoder", "embedding_init_std"});
        read_size(m, "model", "history", c.model.history);
        read_size(m, "model", "horizon", c.model.horizon);
        read_size(m, "model", "embedding_dim", c.model.embedding_dim);
        read_size(m, "model", "representatives", c.model.representatives);
        read_size(m, "model", "lstm_hidden", c.model.lstm_hidden);
        read_size(m, "model", "decoder_hidden", c.model.decoder_hidden);
        read(m, "model", "lambda_e", c.model.lambda_e);
        std::string mode = to_string(c.model.mode);
        read(m, "model", "mode", mode);
        c.model.mode = parse_mode(mode);
        read(m, "model", "shared_encoder", c.model.shared_encoder);
        read(m, "model", "embedding_init_std", c.model.embedding_init_std);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train",
                       {"initial_lr", "decay_rate", "decay_interval", "epochs", "batch_size", "patience", "seed",
                        "clip_norm"});
        read(t, "train", "initial_lr", c.train.initial_lr);
        read(t, "train", "decay_rate", c.train.decay_rate);
        read_size(t, "train", "decay_interval", c.train.decay_interval);
        read_size(t, "train", "epochs", c.train.epochs);
        read_size(t, "train", "batch_size", c.train.batch_size);
        read_size(t, "train", "patience", c.train.patience);
        read(t, "train", "seed", c.train.seed);
        read(t, "train", "clip_norm", c.train.clip_norm);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown(e, "eval", {"metric_scale"});
        std::string scale = to_string(c.metric_scale);
        read(e, "eval", "metric_scale", scale);
        c.metric_scale = parse_metric_scale(scale);
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path().string());
}

json RunConfig::to_json() const {
    json j;
    j["data"] = {{"values", data.values},
                 {"hierarchy", data.hierarchy},
                 {"covariates", data.covariates ? json(*data.covariates) : json(nullptr)},
                 {"hierarchy_header", data.hierarchy_header},
                 {"missing", to_string(data.missing)},
                 {"splits", data.splits},
                 {"rolling_windows", data.rolling_windows},
                 {"standardize", to_string(data.standardize)}};
    j["model"] = {{"history", model.history},
                  {"horizon", model.horizon},
                  {"embedding_dim", model.embedding_dim},
                  {"representatives", model.representatives},
                  {"lstm_hidden", model.lstm_hidden},
                  {"decoder_hidden", model.decoder_hidden},
                  {"lambda_e", model.lambda_e},
                  {"mode", to_string(model.mode)},
                  {"shared_encoder", model.shared_encoder},
                  {"embedding_init_std", model.embedding_init_std}};
    j["train"] = {{"initial_lr", train.initial_lr}, {"decay_rate", train.decay_rate},
                  {"decay_interval", train.decay_interval}, {"epochs", train.epochs},
                  {"batch_size", train.batch_size}, {"patience", train.patience},
                  {"seed", train.seed}, {"clip_norm", train.clip_norm}};
    j["eval"] = {{"metric_scale", to_string(metric_scale)}};
    return j;
}

SplitSpec RunConfig::split() const {
    if (data.splits.empty()) {
        throw ConfigError("data.splits is required (train_end:val_start-val_end:test_start-test_end)");
    }
    return SplitSpec::parse(data.splits, data.rolling_windows);
}

PanelSource RunConfig::panel_source() const {
    if (data.values.empty() || data.hierarchy.empty()) {
        throw ConfigError("data.values and data.hierarchy are required");
    }
    PanelSource s;
    s.values_path = data.values;
    s.hierarchy_path = data.hierarchy;
    s.covariates_path = data.covariates;
    s.hierarchy_has_header = data.hierarchy_header;
    s.missing = data.missing;
    return s;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (data.rolling_windows == 0) {
        throw ConfigError("data.rolling_windows must be positive");
    }
}

}  // namespace hired
