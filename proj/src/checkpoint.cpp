#include "hired/checkpoint.hpp"

#include <fstream>
#include <map>

#include "hired/error.hpp"

namespace hired {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint& ck) {
    json tensors = json::array();
    visit_params(
        [&](const std::string& name, const Tensor& t) {
            tensors.push_back({{"name", name},
                               {"shape", {t.rows(), t.cols()}},
                               {"data", std::vector<double>(t.data().begin(), t.data().end())}});
        },
        ck.params);
    return {{"format", "hired-checkpoint"},
            {"version", kCheckpointVersion},
            {"config", ck.config.to_json()},
            {"nodes", ck.nodes},
            {"representatives", ck.representatives},
            {"scaler", {{"mean", ck.scaler.mean}, {"std", ck.scaler.std}}},
            {"covariate_dim", ck.params.covariate_dim},
            {"series", ck.params.series},
            {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (j.value("format", "") != "hired-checkpoint") {
            throw DataError("not a hired checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
        }
        Checkpoint ck;
        ck.config = RunConfig::from_json(j.at("config"));
        ck.nodes = j.at("nodes").get<std::vector<std::string>>();
        ck.representatives = j.at("representatives").get<std::vector<std::size_t>>();
        ck.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
        ck.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
        const auto covariate_dim = j.at("covariate_dim").get<std::size_t>();
        const auto series = j.at("series").get<std::size_t>();
        ck.params = init_params(ck.config.model, covariate_dim, series, 0);
        std::map<std::string, const json*> stored;
        for (const auto& t : j.at("tensors")) {
            stored[t.at("name").get<std::string>()] = &t;
        }
        std::size_t used = 0;
        visit_params(
            [&](const std::string& name, Tensor& t) {
                const auto it = stored.find(name);
                if (it == stored.end()) {
                    throw DataError("checkpoint is missing tensor '" + name + "'");
                }
                const json& entry = *it->second;
                const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
                if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols()) {
                    throw DataError("checkpoint tensor '" + name + "' has the wrong shape for its config");
                }
                auto data = entry.at("data").get<std::vector<double>>();
                t = Tensor(shape[0], shape[1], std::move(data));
                ++used;
            },
            ck.params);
        if (used != stored.size()) {
            throw DataError("checkpoint has " + std::to_string(stored.size() - used) + " unexpected tensors");
        }
        return ck;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ShapeError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write checkpoint '" + path + "'");
    }
    out << checkpoint_to_json(ck).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open checkpoint '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace hired
