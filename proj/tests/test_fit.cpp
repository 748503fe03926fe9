#include "flam/fit.hpp"

#include <gtest/gtest.h>

#include <random>

#include "flam/errors.hpp"
#include "flam/modelsel.hpp"
#include "flam/oracles.hpp"
#include "test_support.hpp"

namespace flam {
namespace {

using testing::centred;
using testing::random_dataset;

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

FitConfig tight() {
    FitConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_sweeps = 100000;
    return cfg;
}

TEST(FlamBcd, CompletelySparseAboveThreshold) {
    std::mt19937_64 rng(101);
    const Dataset data = random_dataset(rng, 30, 3);
    for (double alpha : {0.0, 0.5, 1.0}) {
        const double threshold = lambda_sparse_threshold(data, alpha);
        const FlamFit fit = flam_bcd(data, PenaltySpec{threshold * 1.0001, alpha, 0.0});
        EXPECT_TRUE(fit.active_features.empty());
        for (const auto& t : fit.thetas) EXPECT_EQ(t.lpNorm<Eigen::Infinity>(), 0.0);
        EXPECT_NEAR(fit.theta0, data.y().mean(), 1e-12);
        EXPECT_NEAR(fit.objective, 0.5 * centred(data.y()).squaredNorm(), 1e-10);
    }
}

TEST(FlamBcd, UnpenalisedSingleFeatureInterpolates) {
    std::mt19937_64 rng(103);
    const Dataset data = random_dataset(rng, 20, 1);
    const FlamFit fit = flam_bcd(data, PenaltySpec{0.0, 1.0, 0.0});
    EXPECT_NEAR(fit.theta0, data.y().mean(), 1e-12);
    EXPECT_LT((fit.thetas[0] - centred(data.y())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FlamBcd, MatchesOracleN30P3) {
    std::mt19937_64 rng(107);
    const Dataset data = random_dataset(rng, 30, 3);
    const double lambda = 0.3 * lambda_sparse_threshold(data, 0.75);
    const FlamFit fit = flam_bcd(data, PenaltySpec{lambda, 0.75, 0.0}, tight());
    oracle::ProxGradientOptions opts;
    opts.tol = 1e-12;
    const auto ref = oracle::flam_prox_gradient(data, lambda, 0.75, opts);
    EXPECT_LT(rel_gap(fit.objective, ref.objective), 1e-6);
}

TEST(FlamBcd, GlobalOptimalityOnRandomInstances) {
    std::mt19937_64 rng(109);
    oracle::ProxGradientOptions opts;
    opts.tol = 1e-12;
    for (int trial = 0; trial < 12; ++trial) {
        const Index n = 10 + 3 * trial;
        const Index p = 1 + trial % 4;
        const double alpha = 0.25 * (trial % 5);
        const Dataset data = random_dataset(rng, n, p);
        const double lambda = std::pow(10.0, -1.5 + 0.25 * (trial % 7)) * lambda_sparse_threshold(data, alpha);
        const FlamFit fit = flam_bcd(data, PenaltySpec{lambda, alpha, 0.0}, tight());
        const auto ref = oracle::flam_prox_gradient(data, lambda, alpha, opts);
        EXPECT_LT(rel_gap(fit.objective, ref.objective), 1e-6) << "trial " << trial;
        EXPECT_LE(fit.objective, ref.objective + 1e-6 * std::max(1.0, ref.objective));
    }
}

TEST(FlamBcd, ObjectiveNeverIncreasesPerBlock) {
    std::mt19937_64 rng(113);
    const Dataset data = random_dataset(rng, 40, 4);
    FitConfig cfg;
    double last = std::numeric_limits<double>::infinity();
    int calls = 0;
    cfg.on_block_update = [&](Index, double value) {
        EXPECT_LE(value, last + 1e-12 * std::max(1.0, std::abs(last)));
        last = value;
        ++calls;
    };
    const double lambda = 0.05 * lambda_sparse_threshold(data, 0.5);
    const FlamFit fit = flam_bcd(data, PenaltySpec{lambda, 0.5, 0.0}, cfg);
    EXPECT_GT(calls, 4);
    for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
        EXPECT_LE(fit.objective_trace[s], fit.objective_trace[s - 1] + 1e-12 * fit.objective_trace[s - 1]);
    }
}

TEST(FlamBcd, BlocksAreCentredAndBetasConsistent) {
    std::mt19937_64 rng(127);
    const Dataset data = random_dataset(rng, 35, 3);
    const FlamFit fit = flam_bcd(data, PenaltySpec{2.0, 0.7, 0.0});
    const double tol = 1e-8 * static_cast<double>(data.n()) * data.y().lpNorm<Eigen::Infinity>();
    for (Index j = 0; j < data.p(); ++j) {
        const Vector& t = fit.thetas[static_cast<std::size_t>(j)];
        EXPECT_LT(std::abs(t.sum()), tol);
        EXPECT_LT((fit.betas[static_cast<std::size_t>(j)] - ordered_differences(t, data.ordering(j))).norm(), 1e-14);
    }
    EXPECT_LT(rel_gap(fit.objective, objective(data, PenaltySpec{2.0, 0.7, 0.0}, fit)), 1e-10);
}

TEST(FlamBcd, PermutingRowsPermutesFit) {
    std::mt19937_64 rng(131);
    const Dataset data = random_dataset(rng, 25, 2);
    const Permutation perm = testing::random_permutation(rng, data.n());
    const Dataset shuffled = data.subset(perm);
    const PenaltySpec pen{1.0, 0.8, 0.0};
    const FlamFit a = flam_bcd(data, pen, tight());
    const FlamFit b = flam_bcd(shuffled, pen, tight());
    EXPECT_NEAR(a.theta0, b.theta0, 1e-8);
    for (std::size_t j = 0; j < a.thetas.size(); ++j) {
        for (Index i = 0; i < data.n(); ++i) {
            EXPECT_NEAR(b.thetas[j][i], a.thetas[j][perm[static_cast<std::size_t>(i)]], 1e-6);
        }
    }
}

TEST(FlamBcd, LassoEquivalenceAtAlphaOne) {
    std::mt19937_64 rng(137);
    for (int trial = 0; trial < 5; ++trial) {
        const Index n = 8 + 3 * trial;
        const Index p = 1 + trial % 3;
        const Dataset data = random_dataset(rng, n, p);
        const double lambda = 0.2 * lambda_sparse_threshold(data, 1.0);
        Matrix V(n, (n - 1) * p);
        const Matrix U = build_U(n);
        for (Index j = 0; j < p; ++j) {
            for (Index k = 0; k < n - 1; ++k) {
                V.col(j * (n - 1) + k) = undo_ordering(U.col(k), data.ordering(j));
            }
        }
        const Vector b = oracle::lasso_coordinate_descent(V, centred(data.y()), lambda);
        FlamFit mapped;
        mapped.theta0 = data.y().mean();
        for (Index j = 0; j < p; ++j) {
            mapped.thetas.push_back(theta_from_beta(b.segment(j * (n - 1), n - 1), data.ordering(j)));
        }
        const double lasso_obj = objective(data, PenaltySpec{lambda, 1.0, 0.0}, mapped);
        const FlamFit fit = flam_bcd(data, PenaltySpec{lambda, 1.0, 0.0}, tight());
        EXPECT_LT(rel_gap(fit.objective, lasso_obj), 1e-6) << "trial " << trial;
    }
}

TEST(FlamBcd, FlagsNonConvergence) {
    std::mt19937_64 rng(139);
    const Dataset data = random_dataset(rng, 40, 4);
    FitConfig cfg;
    cfg.max_sweeps = 1;
    const FlamFit fit = flam_bcd(data, PenaltySpec{0.5, 0.9, 0.0}, cfg);
    EXPECT_FALSE(fit.converged);
    EXPECT_EQ(fit.iterations, 1);
}

TEST(FlamBcd, RejectsBadConfigAndWarmStart) {
    std::mt19937_64 rng(149);
    const Dataset data = random_dataset(rng, 10, 2);
    FitConfig cfg;
    cfg.tol = 0.0;
    EXPECT_THROW(flam_bcd(data, PenaltySpec{1.0, 1.0, 0.0}, cfg), InvalidArgument);
    FlamFit warm;
    warm.thetas.assign(3, Vector::Zero(10));
    EXPECT_THROW(flam_bcd(data, PenaltySpec{1.0, 1.0, 0.0}, {}, &warm), InvalidArgument);
    EXPECT_THROW(flam_bcd(data, PenaltySpec{1.0, 2.0, 0.0}), InvalidArgument);
}

TEST(Objective, ZeroFitAndUnpenalised) {
    std::mt19937_64 rng(151);
    const Dataset data = random_dataset(rng, 12, 2);
    FlamFit zero;
    zero.theta0 = data.y().mean();
    zero.thetas.assign(2, Vector::Zero(12));
    EXPECT_NEAR(objective(data, PenaltySpec{3.0, 0.5, 0.0}, zero), 0.5 * centred(data.y()).squaredNorm(), 1e-12);

    FlamFit some = zero;
    some.thetas[0] = centred(data.y());
    EXPECT_NEAR(objective(data, PenaltySpec{0.0, 0.5, 0.0}, some), 0.5 * rss(data, some), 1e-12);
}

TEST(Objective, AgreesWithOracleRecomputation) {
    std::mt19937_64 rng(157);
    const Dataset data = random_dataset(rng, 20, 3);
    const FlamFit fit = flam_bcd(data, PenaltySpec{1.3, 0.6, 0.0});
    const double again = oracle::flam_objective(data, 1.3, 0.6, fit.theta0, fit.thetas);
    EXPECT_LT(rel_gap(fit.objective, again), 1e-10);
}

TEST(Objective, RidgeTermOnlyWithPositiveEpsilon) {
    std::mt19937_64 rng(163);
    const Dataset data = random_dataset(rng, 20, 2);
    const FlamFit fit = flam_bcd(data, PenaltySpec{0.5, 1.0, 0.0});
    double ridge = 0.0;
    for (const auto& b : fit.betas) ridge += b.squaredNorm();
    EXPECT_NEAR(objective(data, PenaltySpec{0.5, 1.0, 0.2}, fit) - objective(data, PenaltySpec{0.5, 1.0, 0.0}, fit),
                0.1 * ridge, 1e-10);
}

TEST(LambdaGrid, LogSpacedAndValidated) {
    const auto grid = lambda_grid(10.0, 5, 1e-2);
    ASSERT_EQ(grid.size(), 5u);
    EXPECT_DOUBLE_EQ(grid.front(), 10.0);
    EXPECT_NEAR(grid.back(), 0.1, 1e-12);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(1e-2, 0.25), 1e-12);
    EXPECT_THROW(lambda_grid(10.0, 1, 0.1), InvalidArgument);
    EXPECT_THROW(lambda_grid(10.0, 5, 1.0), InvalidArgument);
    EXPECT_THROW(lambda_grid(0.0, 5, 0.1), InvalidArgument);
}

TEST(FlamPath, StartsSparseAndRssDecreases) {
    std::mt19937_64 rng(167);
    for (int trial = 0; trial < 5; ++trial) {
        const Dataset data = random_dataset(rng, 30, 3);
        const FitPath path = flam_path(data, 0.25 * (trial % 5), 20, 1e-3);
        ASSERT_EQ(path.fits.size(), 20u);
        EXPECT_DOUBLE_EQ(path.lambdas.front(), lambda_sparse_threshold(data, path.alpha));
        EXPECT_TRUE(path.fits.front().active_features.empty());
        for (std::size_t l = 1; l < path.fits.size(); ++l) {
            EXPECT_LE(rss(data, path.fits[l]), rss(data, path.fits[l - 1]) * (1.0 + 1e-6) + 1e-9);
        }
    }
}

TEST(FlamPath, WarmAndColdStartsAgree) {
    std::mt19937_64 rng(173);
    const Dataset data = random_dataset(rng, 30, 3);
    const FitPath path = flam_path(data, 0.5, 10, 1e-2, tight());
    for (std::size_t l = 0; l < path.fits.size(); ++l) {
        const FlamFit cold = flam_bcd(data, PenaltySpec{path.lambdas[l], 0.5, 0.0}, tight());
        EXPECT_LT(rel_gap(path.fits[l].objective, cold.objective), 1e-8);
    }
}

TEST(FlamPath, RejectsBadGrid) {
    std::mt19937_64 rng(179);
    const Dataset data = random_dataset(rng, 10, 1);
    const std::vector<double> up{1.0, 2.0};
    EXPECT_THROW(flam_path(data, 1.0, std::span<const double>(up)), InvalidArgument);
    EXPECT_THROW(flam_path(data, 1.0, 1, 0.1), InvalidArgument);
    EXPECT_THROW(flam_path(data, 1.0, 10, 1.5), InvalidArgument);
}

TEST(FlamPath, ConstantResponseStartsAtOne) {
    Matrix X(4, 1);
    X << 1, 2, 3, 4;
    const Dataset data(Vector::Constant(4, 2.5), X);
    const FitPath path = flam_path(data, 1.0, 5, 0.1);
    EXPECT_DOUBLE_EQ(path.lambdas.front(), 1.0);
    for (const auto& f : path.fits) EXPECT_TRUE(f.active_features.empty());
}

TEST(DebiasRefit, ZeroKnotsGivesMean) {
    std::mt19937_64 rng(181);
    const Dataset data = random_dataset(rng, 15, 2);
    FlamFit zero;
    zero.thetas.assign(2, Vector::Zero(15));
    const DebiasedFit out = debias_refit(data, zero);
    EXPECT_NEAR(out.fit.theta0, data.y().mean(), 1e-12);
    EXPECT_FALSE(out.rank_deficient);
}

TEST(DebiasRefit, OneKnotGivesBlockMeans) {
    Matrix X(4, 1);
    X << 1, 2, 3, 4;
    Vector y(4);
    y << 0.0, 2.0, 5.0, 7.0;
    const Dataset data(y, X);
    const FlamFit fit = flam_bcd(data, PenaltySpec{2.0, 1.0, 0.0});
    ASSERT_EQ(fit.betas[0].cwiseAbs().maxCoeff() > 0.0, true);
    const DebiasedFit out = debias_refit(data, fit);
    const Vector fitted = out.fit.fitted();
    EXPECT_NEAR(fitted[0], 1.0, 1e-10);
    EXPECT_NEAR(fitted[1], 1.0, 1e-10);
    EXPECT_NEAR(fitted[2], 6.0, 1e-10);
    EXPECT_NEAR(fitted[3], 6.0, 1e-10);
}

TEST(DebiasRefit, NeverIncreasesRss) {
    std::mt19937_64 rng(191);
    for (int trial = 0; trial < 20; ++trial) {
        const Dataset data = random_dataset(rng, 40, 2);
        const double lambda = (0.2 + 0.03 * trial) * lambda_sparse_threshold(data, 0.8);
        const FlamFit fit = flam_bcd(data, PenaltySpec{lambda, 0.8, 0.0});
        const DebiasedFit out = debias_refit(data, fit);
        EXPECT_LE(rss(data, out.fit), rss(data, fit) + 1e-9);
        for (const auto& t : out.fit.thetas) EXPECT_LT(std::abs(t.sum()), 1e-9);
    }
}

TEST(DebiasRefit, TooManyKnotsThrows) {
    std::mt19937_64 rng(193);
    const Dataset data = random_dataset(rng, 10, 1);
    const FlamFit interp = flam_bcd(data, PenaltySpec{0.0, 1.0, 0.0});
    EXPECT_THROW(debias_refit(data, interp), InvalidArgument);
}

}  // namespace
}  // namespace flam
