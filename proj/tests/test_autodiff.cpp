#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/random_graph.hpp"
#include "varvol/autodiff.hpp"

using namespace varvol::autodiff;
using varvol::ShapeError;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(AutodiffForward, MatmulMatrixVector) {
    const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    const Tensor b = Tensor::matrix(2, 1, {1, 1});
    const Tensor c = matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 1}));
    EXPECT_EQ(values(c), (std::vector<double>{3, 7}));

    const Tensor v = matmul(a, Tensor::vector({1, 1}));
    EXPECT_EQ(v.shape(), (Shape{2}));
    EXPECT_EQ(values(v), (std::vector<double>{3, 7}));
}

TEST(AutodiffForward, ScalarFunctions) {
    EXPECT_NEAR(softplus(Tensor::scalar(0.0)).item(), 0.693147180559945, 1e-12);
    EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
    EXPECT_DOUBLE_EQ(tanh(Tensor::scalar(0.0)).item(), 0.0);
}

TEST(AutodiffForward, SoftplusStaysPositiveAndFiniteAtExtremes) {
    const Tensor y = softplus(Tensor::vector({-700.0, -50.0, 0.0, 50.0, 700.0}));
    for (double v : y.data()) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
    }
    EXPECT_DOUBLE_EQ(y[4], 700.0);
}

TEST(AutodiffForward, BroadcastRules) {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(values(m + Tensor::vector({10, 20, 30})), (std::vector<double>{11, 22, 33, 14, 25, 36}));
    EXPECT_EQ(values(Tensor::scalar(2.0) * m), (std::vector<double>{2, 4, 6, 8, 10, 12}));
    EXPECT_EQ(values(m - Tensor::scalar(1.0)), (std::vector<double>{0, 1, 2, 3, 4, 5}));
}

TEST(AutodiffForward, ShapeMismatchNamesOpAndShapes) {
    const Tensor a = Tensor::matrix(2, 3, std::vector<double>(6, 1.0));
    const Tensor b = Tensor::vector({1, 2});
    try {
        (void)matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_EQ(e.op(), "matmul");
        ASSERT_EQ(e.shapes().size(), 2u);
        EXPECT_EQ(e.shapes()[0], (Shape{2, 3}));
        EXPECT_EQ(e.shapes()[1], (Shape{2}));
    }
    EXPECT_THROW((void)add(a, b), ShapeError);
    EXPECT_THROW((void)slice(Tensor::vector({1, 2}), 1, 3), ShapeError);
    EXPECT_THROW((void)concat({a}), ShapeError);
    EXPECT_THROW(Tensor(Shape{2, 2}, {1.0, 2.0}), ShapeError);
}

TEST(AutodiffForward, ConcatAndSlice) {
    const Tensor c = concat({Tensor::vector({1, 2}), Tensor::vector({3})});
    EXPECT_EQ(values(c), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(values(slice(c, 1, 3)), (std::vector<double>{2, 3}));
}

TEST(AutodiffForward, NoTapeRecordWithoutGradInputs) {
    Tape::current().clear();
    (void)tanh(Tensor::vector({1, 2}) * Tensor::scalar(3.0));
    EXPECT_TRUE(Tape::current().empty());

    Tensor w = Tensor::vector({1.0}, true);
    {
        NoGradGuard guard;
        (void)square(w);
        EXPECT_TRUE(Tape::current().empty());
    }
    (void)square(w);
    EXPECT_EQ(Tape::current().size(), 1u);
    Tape::current().clear();
}

TEST(AutodiffBackward, SumOfSquares) {
    Tensor x = Tensor::vector({1, 2, 3}, true);
    backward(sum(square(x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
}

TEST(AutodiffBackward, SigmoidAtZero) {
    Tensor w = Tensor::scalar(0.0, true);
    backward(sigmoid(w) * Tensor::scalar(1.0));
    EXPECT_DOUBLE_EQ(w.grad()[0], 0.25);
}

TEST(AutodiffBackward, SumDistributesOverAdd) {
    Tensor a = Tensor::matrix(2, 2, {1, -2, 3, 0.5}, true);
    Tensor b = Tensor::matrix(2, 2, {4, 5, -6, 7}, true);
    backward(sum(a + b));
    for (double g : a.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
    for (double g : b.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(AutodiffBackward, BroadcastGradientsReduce) {
    Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}, true);
    Tensor v = Tensor::vector({1, 1, 1}, true);
    Tensor s = Tensor::scalar(2.0, true);
    backward(sum((m + v) * s));
    EXPECT_EQ(std::vector<double>(v.grad().begin(), v.grad().end()), (std::vector<double>{4, 4, 4}));
    EXPECT_DOUBLE_EQ(s.grad()[0], 21.0 + 6.0);
}

TEST(AutodiffBackward, NonScalarLossRejected) {
    Tensor x = Tensor::vector({1, 2}, true);
    Tensor y = square(x);
    EXPECT_THROW(backward(y), ShapeError);
    Tape::current().clear();
}

TEST(AutodiffBackward, DoubleBackwardRejected) {
    Tensor x = Tensor::vector({1, 2}, true);
    Tensor loss = sum(square(x));
    backward(loss);
    EXPECT_THROW(backward(loss), std::logic_error);
}

TEST(AutodiffBackward, LossWithoutGradRejected) {
    Tape::current().clear();
    const Tensor loss = sum(Tensor::vector({1, 2}));
    EXPECT_THROW(backward(loss), std::logic_error);
}

TEST(AutodiffBackward, LeafGradientsAccumulateAcrossBackwardCalls) {
    Tensor x = Tensor::scalar(3.0, true);
    backward(square(x));
    backward(square(x));
    EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(AutodiffBackward, RandomCompositeGraphsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        varvol::test_support::RandomGraph graph(1000 + seed);
        const auto result = varvol::test_support::check_gradients(graph.leaves(), [&] { return graph.evaluate(); });
        EXPECT_GT(result.checked, 0u);
        EXPECT_LE(result.max_rel_error, 1e-4) << "graph seed " << 1000 + seed;
    }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    ParamStore params;
    params.add("w", Tensor::vector({0.5, -1.5}));
    params.at("w").mutable_grad();  // all-zero gradient
    Adam adam;
    EXPECT_TRUE(adam.step(params));
    EXPECT_EQ(std::vector<double>(params.at("w").data().begin(), params.at("w").data().end()),
              (std::vector<double>{0.5, -1.5}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // t = 1: m̂ = g, v̂ = g², update = lr · g / (|g| + eps) = 0.1 / (1 + 1e-8).
    ParamStore params;
    params.add("w", Tensor::scalar(0.0));
    params.at("w").mutable_grad()[0] = 1.0;
    Adam adam(AdamConfig{.lr = 0.1});
    adam.step(params);
    EXPECT_NEAR(params.at("w").item(), -0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_FALSE(params.at("w").has_grad());
}

TEST(Adam, ConvergesOnConvexQuadratic) {
    ParamStore params;
    params.add("w", Tensor::scalar(0.0));
    Adam adam(AdamConfig{.lr = 0.05});
    const Tensor target = Tensor::scalar(3.0);
    for (int i = 0; i < 2000; ++i) {
        backward(square(params.at("w") - target));
        adam.step(params);
    }
    EXPECT_NEAR(params.at("w").item(), 3.0, 0.01);
}

TEST(Adam, NonFiniteGradientSkipsStep) {
    ParamStore params;
    params.add("w", Tensor::vector({1.0, 2.0}));
    auto g = params.at("w").mutable_grad();
    g[0] = 1.0;
    g[1] = std::nan("");
    Adam adam;
    EXPECT_FALSE(adam.step(params));
    EXPECT_EQ(adam.skipped_steps(), 1u);
    EXPECT_EQ(adam.steps(), 0u);
    EXPECT_DOUBLE_EQ(params.at("w")[0], 1.0);
    EXPECT_FALSE(params.at("w").has_grad());
}

TEST(ParamStore, CloneIsDeepAndMergeShares) {
    ParamStore a;
    a.add("w", Tensor::vector({1.0}));
    ParamStore copy = a.clone();
    a.at("w").mutable_data()[0] = 5.0;
    EXPECT_DOUBLE_EQ(copy.at("w")[0], 1.0);

    ParamStore merged;
    merged.merge(a, "net.");
    merged.at("net.w").mutable_data()[0] = 7.0;
    EXPECT_DOUBLE_EQ(a.at("w")[0], 7.0);
    EXPECT_THROW(merged.add("net.w", Tensor::scalar(0.0)), std::invalid_argument);
}

TEST(ParamStore, ClipGradNorm) {
    ParamStore p;
    p.add("a", Tensor::vector({0.0, 0.0}));
    auto g = p.at("a").mutable_grad();
    g[0] = 3.0;
    g[1] = 4.0;
    EXPECT_DOUBLE_EQ(clip_grad_norm(p, 1.0), 5.0);
    EXPECT_NEAR(p.at("a").grad()[0], 0.6, 1e-15);
    EXPECT_NEAR(p.at("a").grad()[1], 0.8, 1e-15);
}
