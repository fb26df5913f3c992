#pragma once

// Average ranks of models across portfolios by cumulative test log likelihood.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "varvol/errors.hpp"

namespace varvol::harness {

struct ModelScore {
    std::string model;
    /// Cumulative test log likelihood; empty when the model failed.
    std::optional<double> loglik;
};

struct PortfolioScores {
    std::string name;
    std::vector<ModelScore> scores;
};

struct RankTable {
    std::vector<std::string> models;
    std::vector<double> average_rank;             // aligned with models
    std::vector<std::vector<double>> ranks;       // [portfolio][model]
    std::vector<std::string> portfolios;
};

/// Ranks of `values` in descending order, 1 = largest; equal values share
/// the mean of the ranks they span. Missing values rank after all present ones.
inline std::vector<double> descending_ranks(const std::vector<std::optional<double>>& values) {
    const std::size_t k = values.size();
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    auto key_less = [&](std::size_t a, std::size_t b) {
        const auto& x = values[a];
        const auto& y = values[b];
        if (x.has_value() != y.has_value()) return x.has_value();
        if (!x) return false;
        return *x > *y;
    };
    std::stable_sort(order.begin(), order.end(), key_less);
    std::vector<double> ranks(k);
    for (std::size_t i = 0; i < k;) {
        std::size_t j = i + 1;
        while (j < k && !key_less(order[i], order[j]) && !key_less(order[j], order[i])) ++j;
        const double shared = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (std::size_t m = i; m < j; ++m) ranks[order[m]] = shared;
        i = j;
    }
    return ranks;
}

inline RankTable rank_report(const std::vector<PortfolioScores>& portfolios) {
    if (portfolios.size() < 2) throw DataError("rank_report: need at least 2 portfolios");
    RankTable table;
    for (const auto& s : portfolios.front().scores) table.models.push_back(s.model);
    if (table.models.empty()) throw DataError("rank_report: no models");
    std::vector<std::string> sorted_models = table.models;
    std::sort(sorted_models.begin(), sorted_models.end());
    if (std::adjacent_find(sorted_models.begin(), sorted_models.end()) != sorted_models.end()) {
        throw DataError("rank_report: duplicate model name");
    }
    table.average_rank.assign(table.models.size(), 0.0);
    for (const auto& p : portfolios) {
        std::vector<std::optional<double>> values(table.models.size());
        if (p.scores.size() != table.models.size()) throw DataError("rank_report: inconsistent model sets in " + p.name);
        for (const auto& s : p.scores) {
            const auto it = std::find(table.models.begin(), table.models.end(), s.model);
            if (it == table.models.end()) throw DataError("rank_report: inconsistent model sets in " + p.name);
            values[static_cast<std::size_t>(it - table.models.begin())] = s.loglik;
        }
        auto ranks = descending_ranks(values);
        for (std::size_t m = 0; m < ranks.size(); ++m) table.average_rank[m] += ranks[m];
        table.ranks.push_back(std::move(ranks));
        table.portfolios.push_back(p.name);
    }
    for (double& r : table.average_rank) r /= static_cast<double>(portfolios.size());
    return table;
}

inline std::string format_fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    return buf;
}

/// "SYM1, SYM2 | MODEL -1013.489 | MODEL failed | ..."
inline std::string format_portfolio_row(const PortfolioScores& p) {
    std::string row = p.name;
    for (const auto& s : p.scores) row += " | " + s.model + " " + (s.loglik ? format_fixed(*s.loglik, 3) : "failed");
    return row;
}

inline std::string format_rank_table(const RankTable& t) {
    std::string out = "average rank over " + std::to_string(t.portfolios.size()) + " portfolios\n";
    std::vector<std::size_t> order(t.models.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t.average_rank[a] < t.average_rank[b]; });
    for (std::size_t i : order) out += t.models[i] + " " + format_fixed(t.average_rank[i], 2) + "\n";
    return out;
}

inline nlohmann::ordered_json to_json(const RankTable& t) {
    nlohmann::ordered_json j;
    j["models"] = t.models;
    j["average_rank"] = t.average_rank;
    auto& rows = j["portfolios"] = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < t.portfolios.size(); ++p) {
        rows.push_back({{"name", t.portfolios[p]}, {"ranks", t.ranks[p]}});
    }
    return j;
}

/// Reads {"models": [...], "portfolios": [{"name", "scores": {model: ll|null}}]}.
inline std::vector<PortfolioScores> scores_from_json(const nlohmann::ordered_json& j) {
    try {
        const auto models = j.at("models").get<std::vector<std::string>>();
        std::vector<PortfolioScores> out;
        for (const auto& p : j.at("portfolios")) {
            PortfolioScores ps{p.at("name").get<std::string>(), {}};
            const auto& scores = p.at("scores");
            for (const auto& m : models) {
                if (!scores.contains(m)) throw DataError("scores: portfolio '" + ps.name + "' lacks model " + m);
                const auto& v = scores.at(m);
                ps.scores.push_back({m, v.is_null() ? std::nullopt : std::optional<double>(v.get<double>())});
            }
            if (scores.size() != models.size()) throw DataError("scores: portfolio '" + ps.name + "' has extra models");
            out.push_back(std::move(ps));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("scores file: ") + e.what());
    }
}

}  // namespace varvol::harness
