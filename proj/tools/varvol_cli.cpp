// varvol: simulate, ingest, train, forecast, evaluate, benchmark and report.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 model failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varvol/harness.hpp"
#include "varvol/simlab/io.hpp"
#include "varvol/vhvm.hpp"

namespace fs = std::filesystem;
using namespace varvol;
using json = nlohmann::ordered_json;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kModel = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool include_2pi = false;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "JSON config file");
    if (needs_config) opt->required();
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_flag("--include-2pi", c.include_2pi, "include the -n/2 log(2 pi) constant in log likelihoods");
    cmd->add_option("--out", c.out, "output path");
}

fs::path config_dir(const std::string& path) { return fs::absolute(path).parent_path(); }

harness::ExperimentConfig load_experiment(const Common& c) {
    auto cfg = harness::experiment_from_json(harness::read_json_file(c.config), config_dir(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (c.include_2pi) cfg.include_2pi = true;
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

std::mutex print_mutex;

void print_epoch(const vhvm::TrainLogEntry& e) {
    std::lock_guard lock(print_mutex);
    std::fprintf(stderr, "epoch %3d  train elbo %.6f  valid ll %.6f\n", e.epoch, e.train_elbo, e.valid_ll);
}

harness::ExperimentHooks verbose_hooks(bool quiet) {
    harness::ExperimentHooks hooks;
    if (quiet) return hooks;
    hooks.on_model_start = [](const std::string& m) {
        std::lock_guard lock(print_mutex);
        std::fprintf(stderr, "running %s\n", m.c_str());
    };
    hooks.on_epoch = print_epoch;
    return hooks;
}

int failures_to_code(const std::vector<harness::EvalReport>& reports) {
    int code = 0;
    for (const auto& r : reports) {
        for (const auto& o : r.outcomes) {
            if (!o.ok) {
                std::fprintf(stderr, "%s: %s failed: %s\n", r.name.c_str(), o.model.c_str(), o.error.c_str());
                code = kModel;
            }
        }
    }
    return code;
}

int cmd_simulate(const Common& c) {
    const json j = harness::read_json_file(c.config);
    const auto spec = simlab::sim_spec_from_json(j);
    const std::uint64_t seed = c.seed ? *c.seed : spec.seed;
    const auto sim = simlab::run_simulation(spec, seed);
    const auto panel = simlab::to_panel(sim, spec.symbols);
    const std::string stem = c.out.empty() ? j.value("name", "simulated") : c.out;
    if (fs::path(stem).has_parent_path()) fs::create_directories(fs::path(stem).parent_path());
    simlab::write_sim_output(sim, panel, stem);
    std::printf("wrote %s.csv and %s_cov.jsonl (%ld rows, %ld assets)\n", stem.c_str(), stem.c_str(),
                static_cast<long>(panel.rows()), static_cast<long>(panel.cols()));
    return 0;
}

int cmd_ingest(const Common& c, std::vector<std::string> files) {
    if (!c.config.empty()) {
        const json j = harness::read_json_file(c.config);
        for (const auto& p : j.at("prices")) files.push_back(harness::detail::resolve(p.get<std::string>(), config_dir(c.config)));
    }
    if (files.empty()) throw ConfigError("ingest: give price files or a config with 'prices'");
    const auto panel = harness::ingest(files);
    const std::string out = c.out.empty() ? "returns.csv" : c.out;
    harness::write_panel_csv(panel, out);
    std::printf("wrote %s (%ld rows, %ld assets)\n", out.c_str(), static_cast<long>(panel.rows()),
                static_cast<long>(panel.cols()));
    return 0;
}

int cmd_train(const Common& c, bool quiet) {
    auto cfg = load_experiment(c);
    const auto panel = harness::load_panel(cfg);
    const auto parts = harness::split(panel, cfg.split);
    const auto run = harness::train_vhvm(cfg, parts, quiet ? std::function<void(const vhvm::TrainLogEntry&)>{} : print_epoch);
    const fs::path dir = cfg.output_dir.empty() ? fs::path("vhvm_run") : fs::path(cfg.output_dir);
    fs::create_directories(dir);
    vhvm::save_model(run.model, (dir / "model.json").string());
    vhvm::write_training_log(run.training.log, (dir / "training_log.jsonl").string());
    std::printf("best epoch %d; wrote %s\n", run.training.best_epoch, (dir / "model.json").string().c_str());
    return 0;
}

int cmd_forecast(const Common& c, const std::string& model_path, const std::string& data_path) {
    const auto model = vhvm::load_model(model_path);
    const auto panel = harness::read_panel_csv(data_path);
    if (static_cast<std::size_t>(panel.cols()) != model.config().assets) {
        throw DataError("forecast: model has " + std::to_string(model.config().assets) + " assets, data has " +
                        std::to_string(panel.cols()));
    }
    json j;
    j["after"] = panel.timestamps.back();
    j["symbols"] = panel.symbols;
    j["cov"] = simlab::matrix_to_json(vhvm::forecast_one_step(model, panel.values));
    if (c.out.empty()) {
        std::cout << j.dump(1) << '\n';
    } else {
        harness::write_text(c.out, j.dump(1) + "\n");
    }
    return 0;
}

int cmd_evaluate(const Common& c, bool quiet) {
    auto cfg = load_experiment(c);
    const auto panel = harness::load_panel(cfg);
    const auto report = harness::run_experiment(cfg, panel, verbose_hooks(quiet));
    if (!cfg.output_dir.empty()) harness::write_report(report, cfg.output_dir, harness::split(panel, cfg.split).test.timestamps);
    std::printf("%s\n", harness::format_portfolio_row(report.scores()).c_str());
    return failures_to_code({report});
}

int cmd_benchmark(const Common& c, unsigned jobs, bool quiet) {
    auto configs = harness::benchmark_from_json(harness::read_json_file(c.config), config_dir(c.config));
    for (auto& cfg : configs) {
        if (c.seed) cfg.seed = *c.seed;
        if (c.include_2pi) cfg.include_2pi = true;
    }
    const std::string out = c.out.empty() ? configs.front().output_dir : c.out;
    const auto result = harness::run_benchmark(configs, out, verbose_hooks(quiet), jobs);
    for (const auto& r : result.reports) std::printf("%s\n", harness::format_portfolio_row(r.scores()).c_str());
    if (result.ranks) std::printf("\n%s", harness::format_rank_table(*result.ranks).c_str());
    return failures_to_code(result.reports);
}

int cmd_report(const Common& c, const std::vector<std::string>& files) {
    std::vector<harness::PortfolioScores> scores;
    for (const auto& f : files) {
        const auto part = harness::scores_from_report_json(harness::read_json_file(f));
        scores.insert(scores.end(), part.begin(), part.end());
    }
    for (const auto& p : scores) std::printf("%s\n", harness::format_portfolio_row(p).c_str());
    const auto table = harness::rank_report(scores);
    std::printf("\n%s", harness::format_rank_table(table).c_str());
    if (!c.out.empty()) harness::write_text(c.out, harness::to_json(table).dump(1) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational covariance forecasting: simulation, training and evaluation"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress output");

    Common sim, ing, trn, fc, ev, bench, rep;
    auto* s = app.add_subcommand("simulate", "write a simulated returns panel and its true covariances");
    add_common(s, sim, true);

    auto* i = app.add_subcommand("ingest", "join price files into a log-return panel");
    add_common(i, ing, false);
    std::vector<std::string> price_files;
    i->add_option("files", price_files, "date,price CSV files");

    auto* t = app.add_subcommand("train", "train the variational model on an experiment's data");
    add_common(t, trn, true);

    auto* f = app.add_subcommand("forecast", "one-step covariance forecast from a saved model");
    add_common(f, fc, false);
    std::string model_path, data_path;
    f->add_option("--model", model_path, "model.json from train")->required();
    f->add_option("--data", data_path, "returns CSV whose rows are conditioned on")->required();

    auto* e = app.add_subcommand("evaluate", "fit and score the configured models on one portfolio");
    add_common(e, ev, true);

    auto* b = app.add_subcommand("benchmark", "evaluate models over several portfolios and rank them");
    add_common(b, bench, true);
    unsigned jobs = 0;
    b->add_option("--jobs", jobs, "portfolios run in parallel (0: all cores)");

    auto* r = app.add_subcommand("report", "average-rank table from benchmark reports or score files");
    add_common(r, rep, false);
    std::vector<std::string> report_files;
    r->add_option("files", report_files, "report.json or scores JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (s->parsed()) return cmd_simulate(sim);
        if (i->parsed()) return cmd_ingest(ing, price_files);
        if (t->parsed()) return cmd_train(trn, quiet);
        if (f->parsed()) return cmd_forecast(fc, model_path, data_path);
        if (e->parsed()) return cmd_evaluate(ev, quiet);
        if (b->parsed()) return cmd_benchmark(bench, jobs, quiet);
        if (r->parsed()) return cmd_report(rep, report_files);
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "config error: %s\n", err.what());
        return kUsage;
    } catch (const DataError& err) {
        std::fprintf(stderr, "data error: %s\n", err.what());
        return kData;
    } catch (const ModelError& err) {
        std::fprintf(stderr, "model error: %s\n", err.what());
        return kModel;
    } catch (const nlohmann::json::exception& err) {
        std::fprintf(stderr, "config error: %s\n", err.what());
        return kUsage;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kModel;
    }
    return kUsage;
}
