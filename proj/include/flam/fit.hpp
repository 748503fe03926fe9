#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flam/core.hpp"

namespace flam {

struct FitConfig {
    double tol = 1e-8;           // relative objective decrease over a full sweep
    int max_sweeps = 1000;
    bool use_active_sets = true;
    int active_set_cycle = 10;   // active-only sweeps between full passes

    // Called after every block update with the feature index and the
    // objective at that point. Costs one objective evaluation per call, so
    // leave empty outside of diagnostics.
    std::function<void(Index, double)> on_block_update;

    void validate() const;
};

struct FitPath {
    std::vector<double> lambdas;  // strictly decreasing
    double alpha = 1.0;
    std::vector<FlamFit> fits;
};

// Objective of the additive problem at `fit`. The ridge term
// (epsilon/2) sum ||D P_j theta_j||^2 is included only when penalty.epsilon > 0.
double objective(const Dataset& data, const PenaltySpec& penalty, const FlamFit& fit);

// Residual sum of squares ||y - fitted||^2.
double rss(const Dataset& data, const FlamFit& fit);

// Block coordinate descent. Per feature: fused lasso on the ordered partial
// residual, absorb the mean into the intercept, soft-scale. Stops when the
// relative decrease over a full sweep drops below config.tol with an
// unchanged active set, or after config.max_sweeps (converged = false).
//
// The fit solves the problem without the ridge term; penalty.epsilon is
// carried on the result for the df estimator only, and fit.objective is the
// objective with epsilon = 0.
FlamFit flam_bcd(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config = {},
                 const FlamFit* warm_start = nullptr);

// Log-spaced grid from lambda_max down to lambda_max * lambda_min_ratio.
std::vector<double> lambda_grid(double lambda_max, int n_lambda, double lambda_min_ratio);

// Warm-started path from the complete-sparsity threshold downward. When the
// threshold is zero (constant response) the grid starts at 1 instead.
FitPath flam_path(const Dataset& data, double alpha, int n_lambda = 50, double lambda_min_ratio = 1e-3,
                  const FitConfig& config = {});

// Warm-started path over a caller-supplied strictly decreasing grid.
FitPath flam_path(const Dataset& data, double alpha, std::span<const double> lambdas,
                  const FitConfig& config = {});

struct DebiasedFit {
    FlamFit fit;
    bool rank_deficient = false;
};

// Keeps the knots and the active set of `fit` and refits the levels by
// ordinary least squares on the implied step basis. A rank-deficient basis is
// solved with a 1e-10 ridge and flagged.
DebiasedFit debias_refit(const Dataset& data, const FlamFit& fit);

// Recomputes betas, the active set and the (epsilon = 0) objective from
// theta0 and thetas.
void finalize_fit(const Dataset& data, FlamFit& fit);

}  // namespace flam
