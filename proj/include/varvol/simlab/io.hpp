#pragma once

// Simulator configs from JSON and simulated output on disk: a returns CSV
// (same format as ingested data) plus a JSON-lines file of true covariances.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "varvol/errors.hpp"
#include "varvol/harness/panel.hpp"
#include "varvol/simlab/simulate.hpp"

namespace varvol::simlab {

using json = nlohmann::ordered_json;

/// Consecutive calendar days from 2000-01-03 as ISO dates.
inline std::vector<std::string> synthetic_dates(std::size_t count) {
    using namespace std::chrono;
    std::vector<std::string> out;
    out.reserve(count);
    sys_days day = year{2000} / January / 3;
    for (std::size_t i = 0; i < count; ++i, day += days{1}) {
        const year_month_day ymd{day};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()));
        out.emplace_back(buf);
    }
    return out;
}

inline std::vector<std::string> default_symbols(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(i + 1));
    return out;
}

inline harness::ReturnsPanel to_panel(const SimOutput& sim, std::vector<std::string> symbols = {}) {
    if (symbols.empty()) symbols = default_symbols(static_cast<std::size_t>(sim.returns.cols()));
    if (symbols.size() != static_cast<std::size_t>(sim.returns.cols())) throw ConfigError("simulate: symbol count must equal n");
    return harness::ReturnsPanel{synthetic_dates(static_cast<std::size_t>(sim.returns.rows())), std::move(symbols),
                                 sim.returns};
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError(what + ": ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

/// `<stem>.csv` with returns and `<stem>_cov.jsonl` with {"date", "cov"} per row.
inline void write_sim_output(const SimOutput& sim, const harness::ReturnsPanel& panel, const std::string& stem) {
    harness::write_panel_csv(panel, stem + ".csv");
    std::ofstream out(stem + "_cov.jsonl");
    if (!out) throw DataError("cannot write " + stem + "_cov.jsonl");
    for (std::size_t t = 0; t < sim.true_cov.size(); ++t) {
        json line;
        line["date"] = panel.timestamps[t];
        line["cov"] = matrix_to_json(sim.true_cov[t]);
        out << line.dump() << '\n';
    }
}

inline std::vector<Matrix> read_true_covariances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::vector<Matrix> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(matrix_from_json(json::parse(line).at("cov"), path));
    }
    return out;
}

inline ArLogVariance ar_from_json(const json& j) {
    return ArLogVariance{j.at("mu").get<double>(), j.at("phi").get<double>(), j.at("sigma").get<double>()};
}

/// Simulator described by JSON:
///   {"kind": "garch", "omega", "alpha", "beta", "T", "seed"}
///   {"kind": "factor_sv", "loadings": [[..]], "idiosyncratic": [{"mu","phi","sigma"}..], "factor": [..], "T", "seed"}
///   {"kind": "dcc", "garch": [{"omega","alpha","beta"}..], "a", "b", "qbar": [[..]], "T", "seed"}
/// An optional "symbols" list names the columns.
struct SimSpec {
    std::string kind;
    std::size_t T = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> symbols;
    json body;
};

inline SimSpec sim_spec_from_json(const json& j) {
    try {
        SimSpec s;
        s.kind = j.at("kind").get<std::string>();
        s.T = j.at("T").get<std::size_t>();
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("symbols")) s.symbols = j.at("symbols").get<std::vector<std::string>>();
        s.body = j;
        if (s.kind != "garch" && s.kind != "factor_sv" && s.kind != "dcc") throw ConfigError("simulate: unknown kind '" + s.kind + "'");
        if (s.T < 2) throw ConfigError("simulate: T must be >= 2");
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("simulate config: ") + e.what());
    }
}

inline SimOutput run_simulation(const SimSpec& s, std::uint64_t seed) {
    const json& j = s.body;
    try {
        if (s.kind == "garch") {
            return simulate_garch(baselines::GarchParams{j.at("omega").get<double>(), j.at("alpha").get<double>(),
                                                         j.at("beta").get<double>()},
                                  s.T, seed);
        }
        if (s.kind == "factor_sv") {
            FactorSvConfig cfg;
            cfg.loadings = matrix_from_json(j.at("loadings"), "loadings");
            cfg.n = static_cast<std::size_t>(cfg.loadings.rows());
            cfg.m = static_cast<std::size_t>(cfg.loadings.cols());
            for (const auto& a : j.at("idiosyncratic")) cfg.idiosyncratic.push_back(ar_from_json(a));
            for (const auto& a : j.at("factor")) cfg.factor.push_back(ar_from_json(a));
            cfg.T = s.T;
            cfg.seed = seed;
            return simulate_factor_sv(cfg);
        }
        DccSimConfig cfg;
        for (const auto& g : j.at("garch")) cfg.garch.push_back(baselines::garch_params_from_json(g));
        cfg.a = j.at("a").get<double>();
        cfg.b = j.at("b").get<double>();
        cfg.qbar = matrix_from_json(j.at("qbar"), "qbar");
        cfg.T = s.T;
        cfg.seed = seed;
        return simulate_dcc(cfg);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("simulate config: ") + e.what());
    }
}

}  // namespace varvol::simlab
