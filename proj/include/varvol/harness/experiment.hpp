#pragma once

// Experiment configuration, per-model runs and evaluation reports.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "varvol/baselines.hpp"
#include "varvol/covparam/covparam.hpp"
#include "varvol/errors.hpp"
#include "varvol/harness/panel.hpp"
#include "varvol/harness/rank.hpp"
#include "varvol/simlab/io.hpp"
#include "varvol/vhvm.hpp"

namespace varvol::harness {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& known_models() {
    static const std::vector<std::string> names{"vhvm", "dcc", "ewma", "constant"};
    return names;
}

inline std::string display_name(const std::string& model) {
    if (model == "vhvm") return "VHVM";
    if (model == "dcc") return "DCC-GARCH";
    if (model == "ewma") return "EWMA";
    if (model == "constant") return "Constant";
    return model;
}

struct VhvmSettings {
    std::size_t gru_hidden = 64;
    std::vector<std::size_t> mlp_hidden{64};
    std::string activation = "tanh";
    vhvm::TrainConfig train;
};

struct DataSource {
    enum class Kind { panel, prices, simulate } kind = Kind::panel;
    std::vector<std::string> paths;  // panel: one CSV of returns; prices: date,price CSVs
    json simulate;                   // simulator spec for Kind::simulate
};

struct ExperimentConfig {
    std::string name;
    DataSource data;
    std::vector<std::string> symbols;  // empty: all columns
    SplitRatios split;
    std::vector<std::string> models{"vhvm", "dcc", "ewma", "constant"};
    VhvmSettings vhvm;
    double ewma_lambda = 0.94;
    std::uint64_t seed = 0;
    bool include_2pi = false;
    std::string output_dir;

    void validate() const {
        split.validate();
        if (models.empty()) throw ConfigError("experiment: at least one model is required");
        for (const auto& m : models) {
            if (std::find(known_models().begin(), known_models().end(), m) == known_models().end()) {
                throw ConfigError("experiment: unknown model '" + m + "'");
            }
        }
        if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
            throw ConfigError("experiment: duplicate model");
        }
        if (!(ewma_lambda > 0.0 && ewma_lambda < 1.0)) throw ConfigError("experiment: ewma lambda must lie in (0, 1)");
        vhvm.train.validate();
        try {
            (void)nn::activation_from_string(vhvm.activation);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("experiment: ") + e.what());
        }
    }
};

namespace detail {

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
    const std::filesystem::path p(path);
    return p.is_absolute() || base.empty() ? p.string() : (base / p).lexically_normal().string();
}

}  // namespace detail

/// Parses an experiment object. Relative data paths resolve against `base_dir`.
///
///   {"name", "data": {"panel": "r.csv"} | {"prices": ["a.csv", ...]} | {"simulate": {...}},
///    "symbols": [...], "split": [0.8, 0.1, 0.1], "models": [...], "seed", "include_2pi",
///    "vhvm": {"gru_hidden", "mlp_hidden", "activation", "epochs", "lr", "tbptt_window",
///             "kl_weight", "grad_clip", "standardize"},
///    "ewma": {"lambda"}, "output_dir"}
inline ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    try {
        ExperimentConfig c;
        c.name = j.value("name", "");
        const auto& d = j.at("data");
        if (d.contains("panel")) {
            c.data.kind = DataSource::Kind::panel;
            c.data.paths = {detail::resolve(d.at("panel").get<std::string>(), base_dir)};
        } else if (d.contains("prices")) {
            c.data.kind = DataSource::Kind::prices;
            for (const auto& p : d.at("prices")) c.data.paths.push_back(detail::resolve(p.get<std::string>(), base_dir));
        } else if (d.contains("simulate")) {
            c.data.kind = DataSource::Kind::simulate;
            c.data.simulate = d.at("simulate");
        } else {
            throw ConfigError("experiment: data needs one of 'panel', 'prices' or 'simulate'");
        }
        if (j.contains("symbols")) c.symbols = j.at("symbols").get<std::vector<std::string>>();
        if (j.contains("split")) {
            const auto r = j.at("split").get<std::vector<double>>();
            if (r.size() != 3) throw ConfigError("experiment: split needs three ratios");
            c.split = SplitRatios{r[0], r[1], r[2]};
        }
        if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
        c.seed = j.value("seed", std::uint64_t{0});
        c.include_2pi = j.value("include_2pi", false);
        c.output_dir = j.contains("output_dir") ? detail::resolve(j.at("output_dir").get<std::string>(), base_dir) : "";
        if (j.contains("vhvm")) {
            const auto& v = j.at("vhvm");
            c.vhvm.gru_hidden = v.value("gru_hidden", c.vhvm.gru_hidden);
            if (v.contains("mlp_hidden")) c.vhvm.mlp_hidden = v.at("mlp_hidden").get<std::vector<std::size_t>>();
            c.vhvm.activation = v.value("activation", c.vhvm.activation);
            auto& t = c.vhvm.train;
            t.epochs = v.value("epochs", t.epochs);
            t.lr = v.value("lr", t.lr);
            t.tbptt_window = v.value("tbptt_window", t.tbptt_window);
            t.kl_weight = v.value("kl_weight", t.kl_weight);
            t.grad_clip = v.value("grad_clip", t.grad_clip);
            t.standardize = v.value("standardize", t.standardize);
        }
        if (j.contains("ewma")) c.ewma_lambda = j.at("ewma").value("lambda", c.ewma_lambda);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline ReturnsPanel load_panel(const ExperimentConfig& c) {
    ReturnsPanel panel;
    switch (c.data.kind) {
        case DataSource::Kind::panel: panel = read_panel_csv(c.data.paths.at(0)); break;
        case DataSource::Kind::prices: panel = ingest(c.data.paths); break;
        case DataSource::Kind::simulate: {
            const auto spec = simlab::sim_spec_from_json(c.data.simulate);
            panel = simlab::to_panel(simlab::run_simulation(spec, spec.seed), spec.symbols);
            break;
        }
    }
    if (!c.symbols.empty()) panel = panel.select(c.symbols);
    panel.validate();
    return panel;
}

struct ModelOutcome {
    std::string model;
    bool ok = false;
    std::string error;
    double cumulative_ll = 0.0;
    std::vector<double> per_step;
    std::vector<Matrix> forecasts;
    json details = json::object();
    double seconds = 0.0;  // wall time; kept out of the report
};

struct SegmentInfo {
    Eigen::Index rows = 0;
    std::string start;
    std::string end;
};

struct EvalReport {
    std::string name;
    std::vector<std::string> symbols;
    std::uint64_t seed = 0;
    bool include_2pi = false;
    SegmentInfo train, valid, test;
    std::vector<ModelOutcome> outcomes;

    PortfolioScores scores() const {
        PortfolioScores p{name, {}};
        for (const auto& o : outcomes) {
            p.scores.push_back({display_name(o.model), o.ok ? std::optional<double>(o.cumulative_ll) : std::nullopt});
        }
        return p;
    }
};

/// Scores forecasts against realised rows with the shared metric; the
/// cumulative value is accumulated in row order.
inline void score_outcome(ModelOutcome& o, const Matrix& test, bool include_2pi) {
    if (static_cast<Eigen::Index>(o.forecasts.size()) != test.rows()) {
        throw ModelError(o.model + ": produced " + std::to_string(o.forecasts.size()) + " forecasts for " +
                         std::to_string(test.rows()) + " test rows");
    }
    o.per_step.clear();
    o.cumulative_ll = 0.0;
    for (Eigen::Index t = 0; t < test.rows(); ++t) {
        const double ll = covparam::score_forecast(test.row(t).transpose(), o.forecasts[static_cast<std::size_t>(t)], include_2pi);
        if (!std::isfinite(ll)) throw NonFiniteError(o.model + ": non-finite test log likelihood", static_cast<std::size_t>(t));
        o.per_step.push_back(ll);
        o.cumulative_ll += ll;
    }
}

inline vhvm::VhvmModel make_vhvm(const ExperimentConfig& c, std::size_t assets) {
    return vhvm::VhvmModel(vhvm::VhvmConfig{.assets = assets,
                                            .gru_hidden = c.vhvm.gru_hidden,
                                            .mlp_hidden = c.vhvm.mlp_hidden,
                                            .activation = nn::activation_from_string(c.vhvm.activation),
                                            .seed = c.seed});
}

struct VhvmRun {
    vhvm::VhvmModel model;
    vhvm::TrainResult training;
};

inline VhvmRun train_vhvm(const ExperimentConfig& c, const PanelSplit& parts,
                          const std::function<void(const vhvm::TrainLogEntry&)>& on_epoch = {}) {
    VhvmRun run{make_vhvm(c, parts.train.symbols.size()), {}};
    vhvm::TrainConfig tc = c.vhvm.train;
    tc.seed = c.seed;
    run.training = vhvm::train(run.model, parts.train.values, parts.valid.values, tc, on_epoch);
    return run;
}

struct ExperimentHooks {
    std::function<void(const std::string& model)> on_model_start;
    std::function<void(const vhvm::TrainLogEntry&)> on_epoch;
    /// Receives the trained VHVM (for checkpointing) before scoring.
    std::function<void(const VhvmRun&)> on_vhvm_trained;
};

/// Fits every configured model on the training segment and scores one-step
/// forecasts over the test segment. All models condition on train + valid
/// before the first test step. A failing model is recorded, not fatal.
inline EvalReport run_experiment(const ExperimentConfig& c, const ReturnsPanel& panel, const ExperimentHooks& hooks = {}) {
    c.validate();
    const PanelSplit parts = split(panel, c.split);
    const ReturnsPanel history = concat({&parts.train, &parts.valid});
    const Eigen::Index test_begin = history.rows();

    EvalReport report;
    report.name = c.name;
    if (report.name.empty()) {
        for (std::size_t i = 0; i < panel.symbols.size(); ++i) report.name += (i ? ", " : "") + panel.symbols[i];
    }
    report.symbols = panel.symbols;
    report.seed = c.seed;
    report.include_2pi = c.include_2pi;
    auto info = [](const ReturnsPanel& p) { return SegmentInfo{p.rows(), p.timestamps.front(), p.timestamps.back()}; };
    report.train = info(parts.train);
    report.valid = info(parts.valid);
    report.test = info(parts.test);

    for (const auto& name : c.models) {
        if (hooks.on_model_start) hooks.on_model_start(name);
        ModelOutcome o;
        o.model = name;
        const auto start = std::chrono::steady_clock::now();
        try {
            if (name == "vhvm") {
                const VhvmRun run = train_vhvm(c, parts, hooks.on_epoch);
                if (hooks.on_vhvm_trained) hooks.on_vhvm_trained(run);
                o.forecasts = vhvm::evaluate_sequence(run.model, parts.test.values, history.values, c.include_2pi, true).forecasts;
                json log = json::array();
                for (const auto& e : run.training.log) log.push_back(vhvm::to_json(e));
                o.details["best_epoch"] = run.training.best_epoch;
                o.details["skipped_steps"] = run.training.skipped_steps;
                o.details["training_log"] = std::move(log);
            } else if (name == "dcc") {
                const auto model = baselines::dcc_fit(parts.train.values, panel.symbols);
                o.forecasts = baselines::dcc_forecast(model, panel.values, test_begin, panel.rows());
                o.details = baselines::to_json(model);
                o.details["warning"] = model.warning;
            } else if (name == "ewma") {
                const Matrix seed = baselines::sample_covariance(parts.train.values);
                o.forecasts = baselines::ewma_forecast(panel.values, seed, test_begin, panel.rows(), c.ewma_lambda);
                o.details["lambda"] = c.ewma_lambda;
            } else if (name == "constant") {
                o.forecasts.assign(static_cast<std::size_t>(parts.test.rows()), baselines::constant_forecast(parts.train.values));
            }
            score_outcome(o, parts.test.values, c.include_2pi);
            o.ok = true;
        } catch (const std::exception& e) {
            o.ok = false;
            o.error = e.what();
            o.per_step.clear();
            o.forecasts.clear();
            o.cumulative_ll = 0.0;
        }
        o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.outcomes.push_back(std::move(o));
    }
    return report;
}

inline json to_json(const SegmentInfo& s) { return {{"rows", s.rows}, {"start", s.start}, {"end", s.end}}; }

inline json to_json(const EvalReport& r) {
    json j;
    j["name"] = r.name;
    j["symbols"] = r.symbols;
    j["seed"] = r.seed;
    j["include_2pi"] = r.include_2pi;
    j["split"] = {{"train", to_json(r.train)}, {"valid", to_json(r.valid)}, {"test", to_json(r.test)}};
    auto& models = j["models"] = json::array();
    for (const auto& o : r.outcomes) {
        json m;
        m["model"] = o.model;
        m["status"] = o.ok ? "ok" : "failed";
        if (o.ok) {
            m["cumulative_ll"] = o.cumulative_ll;
            m["per_step"] = o.per_step;
            m["details"] = o.details;
        } else {
            m["error"] = o.error;
        }
        models.push_back(std::move(m));
    }
    return j;
}

inline json timings_json(const EvalReport& r) {
    json j = json::object();
    for (const auto& o : r.outcomes) j[o.model] = o.seconds;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

/// report.json, timings.json and forecasts/<model>.jsonl under `dir`.
inline void write_report(const EvalReport& r, const std::filesystem::path& dir, const std::vector<std::string>& test_dates) {
    std::filesystem::create_directories(dir / "forecasts");
    write_text(dir / "report.json", to_json(r).dump(1) + "\n");
    write_text(dir / "timings.json", timings_json(r).dump(1) + "\n");
    for (const auto& o : r.outcomes) {
        if (!o.ok) continue;
        std::ofstream out(dir / "forecasts" / (o.model + ".jsonl"));
        if (!out) throw DataError("cannot write forecasts for " + o.model);
        for (std::size_t t = 0; t < o.forecasts.size(); ++t) {
            json line;
            line["date"] = test_dates.at(t);
            line["cov"] = simlab::matrix_to_json(o.forecasts[t]);
            out << line.dump() << '\n';
        }
    }
}

struct BenchmarkResult {
    std::vector<EvalReport> reports;
    std::optional<RankTable> ranks;
};

/// Top-level fields are defaults; each entry of "portfolios" overrides them.
inline std::vector<ExperimentConfig> benchmark_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.contains("portfolios") || !j.at("portfolios").is_array() || j.at("portfolios").empty()) {
        throw ConfigError("benchmark: 'portfolios' must be a non-empty array");
    }
    json defaults = j;
    defaults.erase("portfolios");
    std::vector<ExperimentConfig> out;
    for (const auto& p : j.at("portfolios")) {
        json merged = defaults;
        merged.merge_patch(p);
        out.push_back(experiment_from_json(merged, base_dir));
    }
    return out;
}

inline json to_json(const BenchmarkResult& b) {
    json j;
    auto& list = j["portfolios"] = json::array();
    for (const auto& r : b.reports) list.push_back(to_json(r));
    auto& rows = j["table"] = json::array();
    for (const auto& r : b.reports) rows.push_back(format_portfolio_row(r.scores()));
    j["ranks"] = b.ranks ? to_json(*b.ranks) : json();
    return j;
}

inline std::string directory_slug(std::size_t index, const std::string& name) {
    std::string slug;
    for (char ch : name) slug += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
    if (slug.size() > 60) slug.resize(60);
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02zu_", index + 1);
    return prefix + slug;
}

/// Runs the portfolio experiments on up to `jobs` threads (0: hardware
/// concurrency) and ranks the models when there are at least two portfolios.
/// Results are collected in config order, so output does not depend on
/// scheduling. Writes report.json, timings.json and per-portfolio directories
/// when `out_dir` is set.
inline BenchmarkResult run_benchmark(const std::vector<ExperimentConfig>& configs, const std::string& out_dir,
                                     const ExperimentHooks& hooks = {}, unsigned jobs = 0) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(configs.size()));
    struct Slot {
        std::optional<ReturnsPanel> panel;
        std::optional<EvalReport> report;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                slots[i].panel = load_panel(configs[i]);
                slots[i].report = run_experiment(configs[i], *slots[i].panel, hooks);
            } catch (...) {
                slots[i].error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    BenchmarkResult result;
    json timings = json::array();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (slots[i].error) std::rethrow_exception(slots[i].error);
        EvalReport& r = *slots[i].report;
        if (!out_dir.empty()) {
            const auto test = split(*slots[i].panel, configs[i].split).test;
            write_report(r, std::filesystem::path(out_dir) / directory_slug(i, r.name), test.timestamps);
        }
        timings.push_back({{"name", r.name}, {"seconds", timings_json(r)}});
        result.reports.push_back(std::move(r));
    }
    if (result.reports.size() >= 2) {
        std::vector<PortfolioScores> scores;
        for (const auto& r : result.reports) scores.push_back(r.scores());
        result.ranks = rank_report(scores);
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(std::filesystem::path(out_dir) / "report.json", to_json(result).dump(1) + "\n");
        write_text(std::filesystem::path(out_dir) / "timings.json", timings.dump(1) + "\n");
    }
    return result;
}

/// Portfolio scores from a benchmark or single-experiment report.json, or
/// from a plain scores file.
inline std::vector<PortfolioScores> scores_from_report_json(const json& j) {
    if (j.contains("models") && j.contains("portfolios") && j.at("models").is_array() &&
        !j.at("models").empty() && j.at("models").front().is_string()) {
        return scores_from_json(j);
    }
    try {
        std::vector<PortfolioScores> out;
        const json single = json::array({j});
        const json& list = j.contains("portfolios") ? j.at("portfolios") : single;
        for (const auto& p : list) {
            PortfolioScores ps{p.at("name").get<std::string>(), {}};
            for (const auto& m : p.at("models")) {
                const bool ok = m.at("status").get<std::string>() == "ok";
                ps.scores.push_back({display_name(m.at("model").get<std::string>()),
                                     ok ? std::optional<double>(m.at("cumulative_ll").get<double>()) : std::nullopt});
            }
            out.push_back(std::move(ps));
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("report file: ") + e.what());
    }
}

}  // namespace varvol::harness
