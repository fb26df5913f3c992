#pragma once

// Parameter checkpoint format (version 1):
//
//   {
//     "format": "varvol.params",
//     "version": 1,
//     "params": [
//       {"name": "<name>", "shape": [d0, ...], "values": [row-major doubles]},
//       ...
//     ]
//   }
//
// Entries appear in ParamStore insertion order. Doubles are written in
// shortest round-trip form, so save -> load is bit-exact.

#include <fstream>
#include <string>

#include <json.hpp>

#include "varvol/autodiff/param_store.hpp"
#include "varvol/errors.hpp"

namespace varvol::nn {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json params_to_json(const autodiff::ParamStore& params) {
    nlohmann::ordered_json out;
    out["format"] = "varvol.params";
    out["version"] = kCheckpointVersion;
    auto& list = out["params"] = nlohmann::ordered_json::array();
    for (const auto& e : params.entries()) {
        nlohmann::ordered_json item;
        item["name"] = e.name;
        item["shape"] = e.tensor.shape();
        item["values"] = std::vector<double>(e.tensor.data().begin(), e.tensor.data().end());
        list.push_back(std::move(item));
    }
    return out;
}

inline autodiff::ParamStore params_from_json(const nlohmann::ordered_json& j) {
    if (j.value("format", "") != "varvol.params") {
        throw DataError("checkpoint: missing or wrong 'format' tag");
    }
    if (j.value("version", 0) != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + j.value("version", nlohmann::ordered_json()).dump());
    }
    autodiff::ParamStore store;
    for (const auto& item : j.at("params")) {
        auto shape = item.at("shape").get<autodiff::Shape>();
        auto values = item.at("values").get<std::vector<double>>();
        store.add(item.at("name").get<std::string>(), autodiff::Tensor(std::move(shape), std::move(values)));
    }
    return store;
}

inline void save_params(const autodiff::ParamStore& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << params_to_json(params).dump(1) << '\n';
}

inline autodiff::ParamStore load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    return params_from_json(nlohmann::ordered_json::parse(in));
}

}  // namespace varvol::nn
