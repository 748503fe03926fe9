#include "flam/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "flam/errors.hpp"
#include "flam/oracles.hpp"
#include "test_support.hpp"

namespace flam {
namespace {

using testing::random_vector;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Largest violation of the optimality conditions theta - y + w D^T s = 0,
// |s| <= 1, s = sign(D theta) on jumps. The multiplier is recovered from
// cumulative sums of y - theta.
double kkt_violation(const Vector& y, const Vector& theta, double w) {
    const Index n = y.size();
    double worst = 0.0;
    double c = 0.0;
    for (Index k = 0; k + 1 < n; ++k) {
        c += y[k] - theta[k];
        worst = std::max(worst, std::abs(c) - w);
        const double jump = theta[k] - theta[k + 1];
        if (std::abs(jump) > 1e-9 * (1.0 + y.lpNorm<Eigen::Infinity>())) {
            worst = std::max(worst, std::abs(c - w * (jump > 0 ? 1.0 : -1.0)));
        }
    }
    c += y[n - 1] - theta[n - 1];
    return std::max(worst, std::abs(c));
}

Index block_count(const Vector& theta) {
    Index blocks = 1;
    for (Index k = 0; k + 1 < theta.size(); ++k) {
        if (std::abs(theta[k] - theta[k + 1]) > 1e-9) ++blocks;
    }
    return blocks;
}

TEST(FusedLasso1d, NoPenaltyReturnsTarget) {
    EXPECT_EQ(fused_lasso_1d(vec({1, 2, 3}), 0.0), vec({1, 2, 3}));
}

TEST(FusedLasso1d, TwoBlockExample) {
    // Two-block stationarity: a = 1 + w/2, b = 5 - w/2.
    const Vector theta = fused_lasso_1d(vec({1, 1, 5, 5}), 1.0);
    EXPECT_LT((theta - vec({1.5, 1.5, 4.5, 4.5})).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FusedLasso1d, FusesCompletelyAtThreshold) {
    const Vector theta = fused_lasso_1d(vec({0, 0, 10}), 20.0 / 3.0);
    EXPECT_LT((theta - Vector::Constant(3, 10.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FusedLasso1d, ProblemStructOverload) {
    FLProblem problem{vec({1, 1, 5, 5}), 1.0};
    EXPECT_LT((fused_lasso_1d(problem) - vec({1.5, 1.5, 4.5, 4.5})).norm(), 1e-12);
}

TEST(FusedLasso1d, SinglePointUnchanged) {
    EXPECT_EQ(fused_lasso_1d(vec({4.2}), 3.0), vec({4.2}));
}

TEST(FusedLasso1d, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(fused_lasso_1d(vec({1, std::numeric_limits<double>::quiet_NaN()}), 1.0), InvalidArgument);
    EXPECT_THROW(fused_lasso_1d(vec({1, std::numeric_limits<double>::infinity()}), 1.0), InvalidArgument);
    EXPECT_THROW(fused_lasso_1d(Vector(0), 1.0), InvalidArgument);
    EXPECT_THROW(fused_lasso_1d(vec({1, 2}), -1.0), InvalidArgument);
}

TEST(FusedLasso1d, AgreesWithDualOracleOnExamples) {
    const std::vector<std::pair<Vector, double>> cases{
        {vec({1, 2, 3}), 0.0}, {vec({1, 1, 5, 5}), 1.0}, {vec({0, 0, 10}), 20.0 / 3.0}};
    for (const auto& [y, w] : cases) {
        oracle::ProxGradientOptions opts;
        opts.step = 0.25;
        EXPECT_LT((fused_lasso_1d(y, w) - oracle::fused_lasso_dual(y, w, opts)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(FusedLasso1d, RandomN20MatchesOracleObjective) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector y = random_vector(rng, 20, 2.0);
        const double w = 0.1 + trial * 0.4;
        oracle::ProxGradientOptions opts;
        opts.step = 0.25;
        const double fast = fused_lasso_objective(y, fused_lasso_1d(y, w), w);
        const double slow = fused_lasso_objective(y, oracle::fused_lasso_dual(y, w, opts), w);
        EXPECT_LE(std::abs(fast - slow), 1e-6 * std::max(1.0, std::abs(slow)));
        EXPECT_LE(fast, slow + 1e-12);
    }
}

TEST(FusedLasso1d, MatchesMergePathOracle) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 60;
        const Vector y = random_vector(rng, n, 3.0);
        const double w = std::exp(-3.0 + 6.0 * (trial % 17) / 16.0);
        const Vector a = fused_lasso_1d(y, w);
        const Vector b = oracle::fused_lasso_path(y, w);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + y.lpNorm<Eigen::Infinity>())) << "trial " << trial;
    }
}

TEST(FusedLasso1d, KktHoldsOnLargeInstances) {
    std::mt19937_64 rng(37);
    for (Index n : {10, 100, 1000, 10000}) {
        for (double w : {0.01, 0.5, 5.0, 100.0}) {
            Vector y = random_vector(rng, n);
            for (Index i = n / 3; i < n; ++i) y[i] += 2.0;
            const Vector theta = fused_lasso_1d(y, w);
            EXPECT_LT(kkt_violation(y, theta, w), 1e-8 * (1.0 + y.lpNorm<Eigen::Infinity>())) << n << " " << w;
        }
    }
}

TEST(FusedLasso1d, BlockCountNonIncreasingInWeight) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector y = random_vector(rng, 30, 2.0);
        Index previous = y.size() + 1;
        for (int g = 0; g < 20; ++g) {
            const double w = 0.01 * std::pow(1.5, g);
            const Index blocks = block_count(fused_lasso_1d(y, w));
            EXPECT_LE(blocks, previous);
            previous = blocks;
        }
    }
}

TEST(FusedLasso1d, PreservesMean) {
    std::mt19937_64 rng(43);
    const Vector y = random_vector(rng, 50);
    EXPECT_NEAR(fused_lasso_1d(y, 0.7).mean(), y.mean(), 1e-12);
}

TEST(GridOracle, TwoBlockExample) {
    const Vector theta = oracle::grid_qp(vec({1, 1, 5, 5}), 1.0, 1e-3);
    EXPECT_LT((theta - vec({1.5, 1.5, 4.5, 4.5})).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(GridOracle, NoPenaltyRoundsToGrid) {
    const Vector y = vec({0.1234, -0.5, 2.0});
    const double step = 0.01;
    const Vector theta = oracle::grid_qp(y, 0.0, step);
    for (Index i = 0; i < y.size(); ++i) EXPECT_LE(std::abs(theta[i] - y[i]), 0.5 * step + 1e-12);
}

TEST(GridOracle, LargeWeightGivesMean) {
    const Vector y = vec({3, -1, 2, 0.5, 4});
    const Vector theta = oracle::grid_qp(y, 1e3, 1e-3);
    EXPECT_LT((theta.array() - y.mean()).abs().maxCoeff(), 1e-3);
}

TEST(GridOracle, RejectsLargeN) {
    EXPECT_THROW(oracle::grid_qp(Vector::Zero(7), 1.0, 0.1), InvalidArgument);
}

TEST(Oracles, ThreeWayAgreementOnTinyInstances) {
    std::mt19937_64 rng(47);
    oracle::ProxGradientOptions opts;
    opts.step = 0.25;
    opts.tol = 1e-12;
    for (int trial = 0; trial < 60; ++trial) {
        const Index n = 1 + trial % 6;
        const Vector y = random_vector(rng, n, 2.0);
        const double w = 0.05 + 0.3 * (trial % 10);
        const Vector fast = fused_lasso_1d(y, w);
        EXPECT_LT((fast - oracle::fused_lasso_dual(y, w, opts)).cwiseAbs().maxCoeff(), 1e-6);
        const double step = 1e-3;
        const Vector grid = oracle::grid_qp(y, w, step);
        const double gap = fused_lasso_objective(y, grid, w) - fused_lasso_objective(y, fast, w);
        EXPECT_GE(gap, -1e-12);
        EXPECT_LE(gap, oracle::grid_resolution_bound(y, fast, w, step));
    }
}

TEST(ProxGradientOracle, UnpenalisedSingleFeatureInterpolates) {
    std::mt19937_64 rng(53);
    const Dataset data = testing::random_dataset(rng, 15, 1);
    const auto res = oracle::flam_prox_gradient(data, 0.0, 1.0);
    EXPECT_NEAR(res.theta0, data.y().mean(), 1e-8);
    EXPECT_LT((res.thetas[0] - testing::centred(data.y())).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ProxGradientOracle, DivergenceThrows) {
    oracle::CompositeProblem problem;
    problem.smooth = [](const Vector& x) { return 5.0 * x.squaredNorm(); };
    problem.gradient = [](const Vector& x) -> Vector { return 10.0 * x; };
    problem.nonsmooth = [](const Vector&) { return 0.0; };
    problem.prox = [](const Vector& v, double) { return v; };
    oracle::ProxGradientOptions opts;
    opts.step = 1.0;
    opts.accelerate = false;
    EXPECT_THROW(oracle::prox_gradient(problem, Vector::Ones(3), opts), NumericFailure);
}

TEST(FusedLassoObjective, Evaluates) {
    EXPECT_DOUBLE_EQ(fused_lasso_objective(vec({1, 1, 5, 5}), vec({1.5, 1.5, 4.5, 4.5}), 1.0), 0.5 * 1.0 + 3.0);
}

}  // namespace
}  // namespace flam
