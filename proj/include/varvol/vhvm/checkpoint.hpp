#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "varvol/errors.hpp"
#include "varvol/nn/checkpoint.hpp"
#include "varvol/vhvm/model.hpp"

namespace varvol::vhvm {

inline nlohmann::ordered_json model_to_json(const VhvmModel& model) {
    const auto& c = model.config();
    nlohmann::ordered_json out;
    out["format"] = "varvol.vhvm";
    out["version"] = 1;
    out["assets"] = c.assets;
    out["gru_hidden"] = c.gru_hidden;
    out["mlp_hidden"] = c.mlp_hidden;
    out["activation"] = nn::to_string(c.activation);
    out["seed"] = c.seed;
    out["scale"] = model.scale();
    out["params"] = nn::params_to_json(model.params());
    return out;
}

inline VhvmModel model_from_json(const nlohmann::ordered_json& j) {
    if (j.value("format", "") != "varvol.vhvm") throw DataError("model checkpoint: missing or wrong 'format' tag");
    if (j.value("version", 0) != 1) throw DataError("model checkpoint: unsupported version");
    try {
        VhvmConfig c;
        c.assets = j.at("assets").get<std::size_t>();
        c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
        c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
        c.activation = nn::activation_from_string(j.at("activation").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        VhvmModel model(c);
        model.params().assign_values(nn::params_from_json(j.at("params")));
        model.set_scale(j.at("scale").get<std::vector<double>>());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model checkpoint: ") + e.what());
    }
}

inline void save_model(const VhvmModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model checkpoint: " + path);
    out << model_to_json(model).dump(1) << '\n';
}

inline VhvmModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read model checkpoint: " + path);
    try {
        return model_from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model checkpoint: ") + e.what());
    }
}

}  // namespace varvol::vhvm
