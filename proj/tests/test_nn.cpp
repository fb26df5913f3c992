#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/plain_nets.hpp"
#include "varvol/nn/checkpoint.hpp"
#include "varvol/nn/layers.hpp"
#include "varvol/random.hpp"

using namespace varvol;
using namespace varvol::nn;
using autodiff::Tensor;
using namespace varvol::test_support;

namespace {

void zero_all(ParamStore& p) {
    for (const auto& e : p.entries()) {
        Tensor t = e.tensor;
        for (double& v : t.mutable_data()) v = 0.0;
    }
}

}  // namespace

TEST(Mlp, ZeroParametersGiveZeroOutput) {
    const MlpSpec spec{.input_dim = 3, .hidden_dims = {5}, .output_dim = 4};
    ParamStore p = init_params(spec, 1);
    zero_all(p);
    const Tensor y = mlp_forward(spec, p, Tensor::vector({0.3, -2.0, 7.0}));
    ASSERT_EQ(y.size(), 4u);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Mlp, IdentityLayer) {
    const MlpSpec spec{.input_dim = 2, .hidden_dims = {}, .output_dim = 2};
    ParamStore p = init_params(spec, 1);
    auto w = p.at("layer0.weight").mutable_data();
    w[0] = 1.0, w[1] = 0.0, w[2] = 0.0, w[3] = 1.0;
    const Tensor y = mlp_forward(spec, p, Tensor::vector({1.0, 2.0}));
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(Mlp, MatchesPlainLoopOracle) {
    const MlpSpec spec{.input_dim = 4, .hidden_dims = {7, 5}, .output_dim = 3};
    ParamStore p = init_params(spec, 42);
    // Non-zero biases so they are exercised too.
    Rng rng(9);
    for (const auto& e : p.entries()) {
        Tensor t = e.tensor;
        for (double& v : t.mutable_data()) v += rng.uniform(-0.3, 0.3);
    }
    const std::vector<double> x{0.5, -1.2, 0.1, 2.0};
    const Tensor y = mlp_forward(spec, p, Tensor::vector(x));
    const auto oracle = plain_mlp(spec, p, x);
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-12);
}

TEST(Mlp, DimensionMismatchThrows) {
    const MlpSpec spec{.input_dim = 2, .hidden_dims = {3}, .output_dim = 1};
    const ParamStore p = init_params(spec, 1);
    EXPECT_THROW((void)mlp_forward(spec, p, Tensor::vector({1, 2, 3})), ShapeError);
    EXPECT_THROW((void)init_params(MlpSpec{.input_dim = 0}, 1), std::invalid_argument);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
    const MlpSpec spec{.input_dim = 3, .hidden_dims = {4}, .output_dim = 2};
    ParamStore p = init_params(spec, 5);
    const Tensor x = Tensor::vector({0.2, -0.4, 0.9});
    std::vector<Tensor> leaves;
    for (const auto& e : p.entries()) leaves.push_back(e.tensor);
    const auto res = test_support::check_gradients(leaves, [&] {
        return autodiff::sum(autodiff::square(mlp_forward(spec, p, x)));
    });
    EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(Gru, ZeroParameters) {
    const GruSpec spec{.input_dim = 2, .hidden_dim = 1};
    ParamStore p = init_params(spec, 3);
    zero_all(p);
    const GruState h1 = gru_step(spec, p, Tensor::vector({5.0, -3.0}), GruState::zeros(1));
    EXPECT_DOUBLE_EQ(h1.h[0], 0.0);
    const GruState h2 = gru_step(spec, p, Tensor::vector({5.0, -3.0}), GruState{Tensor::vector({0.8})});
    EXPECT_DOUBLE_EQ(h2.h[0], 0.4);
}

TEST(Gru, ThreeStepRolloutMatchesPlainLoop) {
    const GruSpec spec{.input_dim = 3, .hidden_dim = 5};
    ParamStore p = init_params(spec, 77);
    Rng rng(4);
    for (const char* b : {"b_z", "b_r", "b_h"}) {
        for (double& v : p.at(b).mutable_data()) v = rng.uniform(-0.5, 0.5);
    }
    const std::vector<std::vector<double>> xs{{0.1, -0.2, 0.3}, {1.5, 0.0, -0.7}, {-0.4, 0.9, 0.2}};
    GruState state = GruState::zeros(5);
    std::vector<double> oracle(5, 0.0);
    for (const auto& x : xs) {
        state = gru_step(spec, p, Tensor::vector(x), state);
        oracle = plain_gru(p, x, oracle);
        for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(state.h[i], oracle[i], 1e-12);
    }
}

TEST(Gru, StateStaysInOpenUnitInterval) {
    const GruSpec spec{.input_dim = 2, .hidden_dim = 6};
    const ParamStore p = init_params(spec, 11);
    Rng rng(12);
    GruState state = GruState::zeros(6);
    for (int t = 0; t < 2000; ++t) {
        state = gru_step(spec, p, Tensor::vector({rng.normal() * 5.0, rng.normal() * 5.0}), state);
        for (double v : state.h.data()) {
            ASSERT_GT(v, -1.0);
            ASSERT_LT(v, 1.0);
        }
    }
}

TEST(Gru, RolloutIsDeterministic) {
    const GruSpec spec{.input_dim = 2, .hidden_dim = 4};
    const ParamStore a = init_params(spec, 8);
    const ParamStore b = init_params(spec, 8);
    GruState sa = GruState::zeros(4), sb = GruState::zeros(4);
    for (int t = 0; t < 50; ++t) {
        const Tensor x = Tensor::vector({std::sin(t * 0.3), std::cos(t * 0.7)});
        sa = gru_step(spec, a, x, sa);
        sb = gru_step(spec, b, x, sb);
        for (std::size_t i = 0; i < 4; ++i) ASSERT_EQ(sa.h[i], sb.h[i]);
    }
}

TEST(Gru, GradientsMatchFiniteDifferences) {
    const GruSpec spec{.input_dim = 2, .hidden_dim = 3};
    ParamStore p = init_params(spec, 21);
    std::vector<Tensor> leaves;
    for (const auto& e : p.entries()) leaves.push_back(e.tensor);
    const auto res = test_support::check_gradients(leaves, [&] {
        GruState s = GruState::zeros(3);
        s = gru_step(spec, p, Tensor::vector({0.3, -0.8}), s);
        s = gru_step(spec, p, Tensor::vector({-1.1, 0.4}), s);
        return autodiff::sum(autodiff::square(s.h));
    });
    EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(Gru, DimensionMismatchThrows) {
    const GruSpec spec{.input_dim = 2, .hidden_dim = 3};
    const ParamStore p = init_params(spec, 1);
    EXPECT_THROW((void)gru_step(spec, p, Tensor::vector({1.0}), GruState::zeros(3)), ShapeError);
    EXPECT_THROW((void)gru_step(spec, p, Tensor::vector({1.0, 2.0}), GruState::zeros(2)), ShapeError);
}

TEST(InitParams, DeterministicPerSeed) {
    const MlpSpec spec{.input_dim = 6, .hidden_dims = {8}, .output_dim = 3};
    EXPECT_TRUE(init_params(spec, 3).values_equal(init_params(spec, 3)));
    EXPECT_FALSE(init_params(spec, 3).values_equal(init_params(spec, 4)));
    const GruSpec gspec{.input_dim = 2, .hidden_dim = 3};
    EXPECT_TRUE(init_params(gspec, 3).values_equal(init_params(gspec, 3)));
}

TEST(InitParams, XavierBoundAndZeroBiases) {
    const MlpSpec spec{.input_dim = 10, .hidden_dims = {20}, .output_dim = 5};
    const ParamStore p = init_params(spec, 99);
    const double b0 = std::sqrt(6.0 / 30.0), b1 = std::sqrt(6.0 / 25.0);
    for (double v : p.at("layer0.weight").data()) EXPECT_LE(std::abs(v), b0);
    for (double v : p.at("layer1.weight").data()) EXPECT_LE(std::abs(v), b1);
    for (double v : p.at("layer0.bias").data()) EXPECT_EQ(v, 0.0);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
    const MlpSpec spec{.input_dim = 3, .hidden_dims = {4}, .output_dim = 2};
    const ParamStore p = init_params(spec, 17);
    const auto path = std::filesystem::temp_directory_path() / "varvol_ckpt_test.json";
    save_params(p, path.string());
    const ParamStore q = load_params(path.string());
    EXPECT_TRUE(p.values_equal(q));
    EXPECT_EQ(q.entries().front().name, "layer0.weight");
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsUnknownVersion) {
    auto j = params_to_json(init_params(GruSpec{1, 1}, 1));
    j["version"] = 99;
    EXPECT_THROW((void)params_from_json(j), DataError);
}
