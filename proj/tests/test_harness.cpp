#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "varvol/harness.hpp"
#include "varvol/random.hpp"
#include "varvol/simlab/io.hpp"

using namespace varvol;
using namespace varvol::harness;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("varvol_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_prices(const fs::path& dir, const std::string& file, const std::string& header,
                         const std::vector<std::string>& dates, const std::vector<double>& prices) {
    const fs::path p = dir / file;
    std::ofstream out(p);
    out << "date," << header << "\n";
    for (std::size_t i = 0; i < dates.size(); ++i) out << dates[i] << "," << simlab::json(prices[i]).dump() << "\n";
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ReturnsPanel iid_panel(Eigen::Index T, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix v(T, n);
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index j = 0; j < n; ++j) v(t, j) = rng.normal();
    return ReturnsPanel{simlab::synthetic_dates(static_cast<std::size_t>(T)),
                        simlab::default_symbols(static_cast<std::size_t>(n)), v};
}

ReturnsPanel counting_panel(Eigen::Index T) {
    Matrix v(T, 2);
    for (Eigen::Index t = 0; t < T; ++t) v.row(t) << 0.01 * static_cast<double>(t + 1), -0.001 * static_cast<double>(t + 1);
    return ReturnsPanel{simlab::synthetic_dates(static_cast<std::size_t>(T)), {"A", "B"}, v};
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.name = "SIM";
    c.models = {"vhvm", "dcc", "ewma", "constant"};
    c.vhvm.gru_hidden = 8;
    c.vhvm.mlp_hidden = {8};
    c.vhvm.train.epochs = 2;
    c.seed = 3;
    return c;
}

ReturnsPanel garch_panel(std::size_t T, std::uint64_t seed) {
    simlab::DccSimConfig cfg;
    cfg.garch = {{0.05, 0.1, 0.85}, {0.1, 0.05, 0.9}};
    cfg.a = 0.04;
    cfg.b = 0.9;
    cfg.qbar = Matrix::Identity(2, 2);
    cfg.qbar(0, 1) = cfg.qbar(1, 0) = 0.4;
    cfg.T = T;
    cfg.seed = seed;
    return simlab::to_panel(simlab::simulate_dcc(cfg));
}

std::vector<std::string> dates_of(std::size_t n) { return simlab::synthetic_dates(n); }

}  // namespace

TEST(Ingest, LogReturnOfTwoPrices) {
    const auto dir = scratch_dir("two_prices");
    std::vector<double> prices{100.0, 110.0};
    for (int i = 0; i < 12; ++i) prices.push_back(prices.back() * (i % 2 ? 1.01 : 0.99));
    const auto panel = ingest({write_prices(dir, "EURUSD.csv", "price", dates_of(prices.size()), prices)});
    EXPECT_EQ(panel.symbols, std::vector<std::string>{"EURUSD"});
    EXPECT_NEAR(panel.values(0, 0), 0.09531, 5e-6);
    EXPECT_EQ(panel.values(0, 0), std::log(110.0) - std::log(100.0));
    EXPECT_EQ(panel.timestamps.front(), dates_of(2)[1]);
}

TEST(Ingest, DropsOnlyAllZeroRows) {
    const auto dir = scratch_dir("zero_rows");
    const auto dates = dates_of(15);
    std::vector<double> a, b;
    for (int i = 0; i < 15; ++i) {
        a.push_back(100.0 + i);
        b.push_back(50.0 + 0.5 * i);
    }
    a[6] = a[5];  // row 6: A flat, B moves -> kept
    a[10] = a[9];
    b[10] = b[9];  // row 10: both flat -> dropped
    const auto panel = ingest({write_prices(dir, "a.csv", "AAA", dates, a), write_prices(dir, "b.csv", "BBB", dates, b)});
    EXPECT_EQ(panel.symbols, (std::vector<std::string>{"AAA", "BBB"}));
    EXPECT_EQ(panel.rows(), 13);
    EXPECT_EQ(std::count(panel.timestamps.begin(), panel.timestamps.end(), dates[10]), 0);
    const auto it = std::find(panel.timestamps.begin(), panel.timestamps.end(), dates[6]);
    ASSERT_NE(it, panel.timestamps.end());
    EXPECT_EQ(panel.values(it - panel.timestamps.begin(), 0), 0.0);
    EXPECT_NE(panel.values(it - panel.timestamps.begin(), 1), 0.0);
}

TEST(Ingest, InnerJoinOnDates) {
    const auto dir = scratch_dir("join");
    const auto dates = dates_of(20);
    std::vector<double> a(20), b;
    for (int i = 0; i < 20; ++i) a[static_cast<std::size_t>(i)] = 100.0 * std::exp(0.01 * i);
    std::vector<std::string> b_dates;
    for (int i = 0; i < 20; ++i) {
        if (i == 7) continue;
        b_dates.push_back(dates[static_cast<std::size_t>(i)]);
        b.push_back(20.0 + i);
    }
    const auto panel = ingest({write_prices(dir, "a.csv", "A", dates, a), write_prices(dir, "b.csv", "B", b_dates, b)});
    EXPECT_EQ(panel.rows(), 18);
    // The return across the gap spans two days.
    const auto it = std::find(panel.timestamps.begin(), panel.timestamps.end(), dates[8]);
    ASSERT_NE(it, panel.timestamps.end());
    EXPECT_NEAR(panel.values(it - panel.timestamps.begin(), 0), 0.02, 1e-12);
}

TEST(Ingest, FilterIsIdempotentAndReingestionRoundTrips) {
    const auto dir = scratch_dir("idempotent");
    const auto dates = dates_of(30);
    std::vector<double> a, b;
    Rng rng(4);
    double pa = 100.0, pb = 10.0;
    for (int i = 0; i < 30; ++i) {
        if (i % 7 != 3) {
            pa *= std::exp(0.01 * rng.normal());
            pb *= std::exp(0.01 * rng.normal());
        }
        a.push_back(pa);
        b.push_back(pb);
    }
    const auto panel = ingest({write_prices(dir, "a.csv", "A", dates, a), write_prices(dir, "b.csv", "B", dates, b)});
    EXPECT_EQ(drop_all_zero_rows(panel), panel);

    // Rebuild prices from the filtered returns and ingest again.
    std::vector<std::string> d2{"1999-12-31"};
    std::vector<double> a2{1.0}, b2{1.0};
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
        d2.push_back(panel.timestamps[static_cast<std::size_t>(t)]);
        a2.push_back(a2.back() * std::exp(panel.values(t, 0)));
        b2.push_back(b2.back() * std::exp(panel.values(t, 1)));
    }
    const auto again = ingest({write_prices(dir, "a2.csv", "A", d2, a2), write_prices(dir, "b2.csv", "B", d2, b2)});
    EXPECT_EQ(again.timestamps, panel.timestamps);
    EXPECT_LT((again.values - panel.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ingest, NonPositivePriceNamesTheLine) {
    const auto dir = scratch_dir("bad_price");
    std::vector<double> p(15, 100.0);
    p[4] = -1.0;
    const auto path = write_prices(dir, "x.csv", "X", dates_of(15), p);
    try {
        (void)ingest({path});
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
    }
}

TEST(Ingest, TooFewRowsAfterJoin) {
    const auto dir = scratch_dir("short");
    std::vector<double> p;
    for (int i = 0; i < 8; ++i) p.push_back(100.0 + i);
    EXPECT_THROW((void)ingest({write_prices(dir, "x.csv", "X", dates_of(8), p)}), DataError);
}

TEST(PanelCsv, RoundTripIsExact) {
    const auto panel = iid_panel(40, 3, 8);
    const auto dir = scratch_dir("csv");
    write_panel_csv(panel, (dir / "p.csv").string());
    EXPECT_EQ(read_panel_csv((dir / "p.csv").string()), panel);
}

TEST(Split, EightyTenTen) {
    const auto parts = split(counting_panel(100));
    EXPECT_EQ(parts.train.rows(), 80);
    EXPECT_EQ(parts.valid.rows(), 10);
    EXPECT_EQ(parts.test.rows(), 10);
}

TEST(Split, RemainderGoesToTest) {
    const auto parts = split(counting_panel(101));
    EXPECT_EQ(parts.train.rows(), 80);
    EXPECT_EQ(parts.valid.rows(), 10);
    EXPECT_EQ(parts.test.rows(), 11);
}

TEST(Split, ConcatenationReproducesInput) {
    const auto panel = counting_panel(137);
    const auto parts = split(panel);
    EXPECT_EQ(concat({&parts.train, &parts.valid, &parts.test}), panel);
}

TEST(Split, ShortSegmentsAndBadRatiosRejected) {
    EXPECT_THROW((void)split(counting_panel(60)), DataError);
    EXPECT_THROW((void)split(counting_panel(100), SplitRatios{0.8, 0.3, 0.1}), ConfigError);
    EXPECT_THROW((void)split(counting_panel(100), SplitRatios{0.9, 0.0, 0.1}), ConfigError);
}

TEST(Rank, TiesShareTheMeanRank) {
    const auto r = descending_ranks({-10.0, -5.0, -10.0, std::nullopt});
    EXPECT_EQ(r, (std::vector<double>{2.5, 1.0, 2.5, 4.0}));
    const auto t = rank_report({{"P1", {{"A", -1.0}, {"B", -1.0}}}, {"P2", {{"A", -2.0}, {"B", -2.0}}}});
    EXPECT_EQ(t.average_rank, (std::vector<double>{1.5, 1.5}));
}

TEST(Rank, SingleModelRanksFirstEverywhere) {
    const auto t = rank_report({{"P1", {{"A", -3.0}}}, {"P2", {{"A", -1.0}}}, {"P3", {{"A", std::nullopt}}}});
    EXPECT_EQ(t.average_rank, std::vector<double>{1.0});
}

TEST(Rank, BestInSeventeenSecondInThree) {
    std::vector<PortfolioScores> ps;
    for (int i = 0; i < 20; ++i) {
        const double a = i < 17 ? -1.0 : -3.0;
        ps.push_back({"P" + std::to_string(i), {{"A", a}, {"B", -2.0}}});
    }
    EXPECT_NEAR(rank_report(ps).average_rank[0], 1.15, 1e-12);
}

TEST(Rank, InconsistentModelSetsRejected) {
    EXPECT_THROW((void)rank_report({{"P1", {{"A", -1.0}}}}), DataError);
    EXPECT_THROW((void)rank_report({{"P1", {{"A", -1.0}, {"B", -2.0}}}, {"P2", {{"A", -1.0}}}}), DataError);
    EXPECT_THROW((void)rank_report({{"P1", {{"A", -1.0}, {"B", -2.0}}}, {"P2", {{"A", -1.0}, {"C", -2.0}}}}), DataError);
    EXPECT_THROW((void)rank_report({{"P1", {{"A", -1.0}, {"A", -2.0}}}, {"P2", {{"A", -1.0}, {"A", -2.0}}}}), DataError);
}

TEST(Rank, FixturePortfolios) {
    std::ifstream in(std::string(VARVOL_FIXTURE_DIR) + "/fx_portfolios_5d.json");
    ASSERT_TRUE(in);
    const auto scores = scores_from_json(nlohmann::ordered_json::parse(in));
    ASSERT_EQ(scores.size(), 20u);
    const auto t = rank_report(scores);
    ASSERT_EQ(t.models, (std::vector<std::string>{"VHVM", "NSVM", "DCC-GARCH", "MCMC-SV"}));
    EXPECT_NEAR(t.average_rank[0], 1.25, 1e-12);
    EXPECT_NEAR(t.average_rank[1], 3.55, 1e-12);
    EXPECT_NEAR(t.average_rank[2], 3.0, 1e-12);
    EXPECT_NEAR(t.average_rank[3], 2.2, 1e-12);
    double total = 0.0;
    for (double r : t.average_rank) total += r;
    EXPECT_NEAR(total, 10.0, 1e-12);  // 1 + 2 + 3 + 4 per portfolio
}

TEST(Report, PortfolioRowFormat) {
    const PortfolioScores p{"EURAUD, EURHKD", {{"VHVM", -1013.4891}, {"DCC-GARCH", std::nullopt}}};
    EXPECT_EQ(format_portfolio_row(p), "EURAUD, EURHKD | VHVM -1013.489 | DCC-GARCH failed");
}

TEST(Experiment, ConstantBaselineMatchesDirectFormula) {
    const auto panel = iid_panel(2000, 2, 21);
    ExperimentConfig c;
    c.models = {"constant"};
    const auto report = run_experiment(c, panel);
    ASSERT_TRUE(report.outcomes[0].ok) << report.outcomes[0].error;
    const auto test = split(panel).test;
    double direct = 0.0;
    for (Eigen::Index t = 0; t < test.rows(); ++t) direct += -0.5 * test.values.row(t).squaredNorm();
    EXPECT_NEAR(report.outcomes[0].cumulative_ll / direct, 1.0, 0.05);
}

TEST(Experiment, AllModelsProduceSpdForecastsAndConsistentTotals) {
    const auto panel = garch_panel(400, 5);
    const auto report = run_experiment(small_config(), panel);
    ASSERT_EQ(report.outcomes.size(), 4u);
    const auto test = split(panel).test;
    for (const auto& o : report.outcomes) {
        ASSERT_TRUE(o.ok) << o.model << ": " << o.error;
        ASSERT_EQ(static_cast<Eigen::Index>(o.forecasts.size()), test.rows());
        double sum = 0.0;
        for (std::size_t t = 0; t < o.forecasts.size(); ++t) {
            EXPECT_TRUE(covparam::is_spd(o.forecasts[t])) << o.model << " step " << t;
            EXPECT_EQ(o.per_step[t],
                      covparam::score_forecast(test.values.row(static_cast<Eigen::Index>(t)).transpose(), o.forecasts[t], false));
            sum += o.per_step[t];
        }
        EXPECT_NEAR(o.cumulative_ll, sum, 1e-9);
    }
}

TEST(Experiment, ForecastsUseOnlyPastRows) {
    auto panel = garch_panel(300, 6);
    ExperimentConfig c;
    c.models = {"ewma", "dcc"};
    const auto base = run_experiment(c, panel);
    panel.values.bottomRows(1).array() += 5.0;
    const auto bumped = run_experiment(c, panel);
    for (std::size_t m = 0; m < 2; ++m) {
        const auto& a = base.outcomes[m].forecasts;
        const auto& b = bumped.outcomes[m].forecasts;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a[t], b[t]) << base.outcomes[m].model << " step " << t;
    }
}

TEST(Experiment, FailingModelIsRecordedWithoutAbortingOthers) {
    // 80 training rows are too few for the GARCH stage; EWMA still runs.
    const auto panel = garch_panel(100, 7);
    ExperimentConfig c;
    c.models = {"dcc", "ewma"};
    const auto report = run_experiment(c, panel);
    EXPECT_FALSE(report.outcomes[0].ok);
    EXPECT_FALSE(report.outcomes[0].error.empty());
    EXPECT_TRUE(report.outcomes[1].ok) << report.outcomes[1].error;
    const auto j = to_json(report);
    EXPECT_EQ(j["models"][0]["status"], "failed");
    EXPECT_EQ(j["models"][1]["status"], "ok");
}

TEST(Experiment, ConfigParsingAndValidation) {
    const auto dir = scratch_dir("config");
    const auto j = nlohmann::ordered_json::parse(R"({
        "name": "demo", "data": {"panel": "returns.csv"}, "symbols": ["S2"],
        "split": [0.7, 0.15, 0.15], "models": ["ewma", "vhvm"], "seed": 9, "include_2pi": true,
        "vhvm": {"gru_hidden": 16, "mlp_hidden": [16, 8], "epochs": 3, "lr": 0.01},
        "ewma": {"lambda": 0.97}, "output_dir": "out"})");
    const auto c = experiment_from_json(j, dir);
    EXPECT_EQ(c.data.paths.at(0), (dir / "returns.csv").string());
    EXPECT_EQ(c.output_dir, (dir / "out").string());
    EXPECT_EQ(c.split.train, 0.7);
    EXPECT_EQ(c.vhvm.mlp_hidden, (std::vector<std::size_t>{16, 8}));
    EXPECT_EQ(c.vhvm.train.epochs, 3);
    EXPECT_EQ(c.ewma_lambda, 0.97);
    EXPECT_TRUE(c.include_2pi);

    auto bad = j;
    bad["models"] = nlohmann::ordered_json::array();
    EXPECT_THROW((void)experiment_from_json(bad), ConfigError);
    bad = j;
    bad["models"] = {"garch"};
    EXPECT_THROW((void)experiment_from_json(bad), ConfigError);
    bad = j;
    bad["split"] = {0.5, 0.5, 0.5};
    EXPECT_THROW((void)experiment_from_json(bad), ConfigError);
    bad = j;
    bad.erase("data");
    EXPECT_THROW((void)experiment_from_json(bad), ConfigError);
}

TEST(Experiment, ReportsAreByteIdentical) {
    const auto dir = scratch_dir("determinism");
    const auto panel = garch_panel(300, 8);
    write_panel_csv(panel, (dir / "returns.csv").string());
    auto j = nlohmann::ordered_json::parse(R"({"data": {"panel": "returns.csv"},
        "vhvm": {"gru_hidden": 8, "mlp_hidden": [8], "epochs": 2}, "seed": 4,
        "portfolios": [{"name": "first"}, {"name": "second", "models": ["ewma", "constant", "dcc", "vhvm"]}]})");
    const auto configs = benchmark_from_json(j, dir);
    ASSERT_EQ(configs.size(), 2u);
    (void)run_benchmark(configs, (dir / "run1").string(), {}, 2);
    const auto result = run_benchmark(configs, (dir / "run2").string(), {}, 1);
    const auto a = slurp(dir / "run1" / "report.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "run2" / "report.json"));
    for (const auto* sub : {"01_first", "02_second"}) {
        EXPECT_EQ(slurp(dir / "run1" / sub / "report.json"), slurp(dir / "run2" / sub / "report.json"));
        EXPECT_EQ(slurp(dir / "run1" / sub / "forecasts" / "vhvm.jsonl"), slurp(dir / "run2" / sub / "forecasts" / "vhvm.jsonl"));
    }
    ASSERT_TRUE(result.ranks.has_value());
    // Model order differs between portfolios; ranks are matched by name.
    const auto scores = scores_from_report_json(nlohmann::ordered_json::parse(a));
    EXPECT_EQ(rank_report(scores).average_rank, result.ranks->average_rank);
}

TEST(Experiment, ForecastFileHasOneMatrixPerTestRow) {
    const auto dir = scratch_dir("forecast_file");
    const auto panel = garch_panel(200, 9);
    ExperimentConfig c;
    c.models = {"ewma"};
    const auto report = run_experiment(c, panel);
    const auto test = split(panel).test;
    write_report(report, dir, test.timestamps);
    std::ifstream in(dir / "forecasts" / "ewma.jsonl");
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        const auto row = nlohmann::ordered_json::parse(line);
        EXPECT_EQ(row["date"], test.timestamps[count]);
        EXPECT_EQ(simlab::matrix_from_json(row["cov"], "cov"), report.outcomes[0].forecasts[count]);
        ++count;
    }
    EXPECT_EQ(count, static_cast<std::size_t>(test.rows()));
}
