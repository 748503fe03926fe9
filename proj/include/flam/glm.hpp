#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flam/core.hpp"
#include "flam/fit.hpp"
#include "flam/modelsel.hpp"

namespace flam {

// A smooth loss of the linear predictor eta = theta0 + sum_j theta_j. The
// gradient with respect to any theta_j equals the gradient in eta, and the
// Hessian in the stacked (theta0 1, theta_1, ..., theta_p) is bounded by
// lipschitz * I.
struct LossSpec {
    LossKind kind = LossKind::squared;
    std::function<double(const Vector&)> evaluate;
    std::function<Vector(const Vector&)> gradient;
    double lipschitz = 1.0;
};

// Predictors beyond this magnitude are clamped before expit.
inline constexpr double kExpitCap = 30.0;

double expit(double eta);

// 1/2 ||y - eta||^2, L = p + 1.
LossSpec squared_loss(const Vector& y, Index p);
// sum log(1 + exp(eta)) - y eta, L = (p + 1) / 4.
LossSpec logistic_loss(const Vector& y, Index p);

// Q_j and its scaled prox: prox(v, t) = argmin 1/2||theta - v||^2 + t Q_j(theta).
struct FeaturePenalty {
    std::function<Vector(const Vector&, double)> prox;
    std::function<double(const Vector&)> value;
};

// alpha ||D P theta||_1 + (1 - alpha) ||theta||_2 for the given ordering.
FeaturePenalty flam_penalty(const Permutation& ordering, double alpha);

struct GgdConfig {
    double tol = 1e-8;
    int max_iter = 5000;
    int threads = 1;  // workers for the per-feature prox steps
    std::function<void(int, double)> on_iteration;

    void validate() const;
};

// Generalised gradient descent on loss(eta) + lambda sum_j Q_j(theta_j).
// Each iteration takes one gradient step of size 1/L on every block, applies
// the block prox with weight lambda/L, then moves each block mean into the
// intercept. Stops when the relative objective decrease falls below tol.
// An objective increase beyond 1e-10 relative slack throws NumericFailure.
FlamFit ggd_solve(const LossSpec& loss, const std::vector<FeaturePenalty>& penalties, double lambda,
                  const FlamFit& init, const GgdConfig& config = {});

// FLAM with logistic loss. y must be 0/1. Without a warm start the intercept
// starts at logit(ybar), clamped to the expit cap.
FlamFit logistic_flam(const Dataset& data, const PenaltySpec& penalty, const GgdConfig& config = {},
                      const FlamFit* warm_start = nullptr);

FitPath logistic_path(const Dataset& data, double alpha, std::span<const double> lambdas,
                      const GgdConfig& config = {});

double logistic_objective(const Dataset& data, const PenaltySpec& penalty, const FlamFit& fit);

// Throws InvalidArgument unless every entry is exactly 0 or 1.
void require_binary(const Vector& y);

// Mean response at new rows: the linear predictor for squared loss, its
// expit for logistic loss.
Vector predict_response(const FlamModel& model, const Matrix& X_new);
Vector predict_response(const FlamFit& fit, const Dataset& train, LossKind loss, const Matrix& X_new);

}  // namespace flam
