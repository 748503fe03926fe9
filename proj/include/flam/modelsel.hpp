#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flam/core.hpp"
#include "flam/fit.hpp"

namespace flam {

// Smallest lambda at which every theta_j is zero:
//   min(g_max / alpha, ||y - ybar||_2 / (1 - alpha)),  1/0 = +inf,
// with g_max the largest absolute partial sum of the centred response taken
// in each feature's order. Exact for alpha in {0, 1}, sufficient otherwise.
// The same value applies to logistic loss, whose gradient at the
// intercept-only optimum is ybar - y. Returns 0 for a constant response.
double lambda_sparse_threshold(const Dataset& data, double alpha);

// g(a) = max_k |a_1 + ... + a_k| over k = 1..n-1.
double max_partial_sum(const Vector& a);

// One step function per feature. Tied covariate values share the mean of
// their fitted values; knots sit at midpoints between adjacent distinct
// covariate values whose levels differ by more than kZeroThreshold.
std::vector<StepFunction> step_functions(const FlamFit& fit, const Dataset& data);

// Everything needed to predict without the training data.
struct FlamModel {
    double theta0 = 0.0;
    std::vector<StepFunction> components;
    LossKind loss = LossKind::squared;
    PenaltySpec penalty;
    std::vector<std::string> feature_names;
    std::string response_name;
    int iterations = 0;
    bool converged = true;
    bool hit_cap = false;
    double objective = 0.0;

    Index p() const { return static_cast<Index>(components.size()); }
};

FlamModel make_model(const FlamFit& fit, const Dataset& data, LossKind loss,
                     std::vector<std::string> feature_names = {}, std::string response_name = "y");

// theta0 + sum_j f_j(x_ij) for each row of X. Throws InvalidArgument on a
// column-count mismatch.
Vector predict_linear(const FlamModel& model, const Matrix& X);

double mse(const Vector& y, const Vector& y_hat);
// Mean binomial deviance -2/n sum [y log p + (1 - y) log(1 - p)], p clipped to [1e-15, 1 - 1e-15].
double mean_deviance(const Vector& y, const Vector& prob);
// Fraction of rows where (prob > 0.5) disagrees with y.
double misclassification(const Vector& y, const Vector& prob);

// Fold label per observation: a seeded shuffle of 0..n-1, then position mod k.
std::vector<int> assign_folds(Index n, int k_folds, std::uint64_t seed);

struct CvOptions {
    int threads = 1;
    FitConfig fit;
    double logistic_tol = 1e-8;
    int logistic_max_iter = 5000;
};

struct CvResult {
    std::vector<double> lambdas;
    std::vector<double> mean_loss;   // MSE, or mean deviance for logistic
    std::vector<double> se_loss;
    std::vector<double> mean_misclassification;  // logistic only, empty otherwise
    std::size_t chosen_index = 0;
    double chosen_lambda = 0.0;
    std::vector<int> folds;
};

// K-fold cross-validation over a strictly decreasing lambda grid. Each fold
// fits the whole path on its training rows with warm starts and scores the
// held-out rows. The chosen lambda minimises the mean loss; ties go to the
// larger lambda. Throws InvalidArgument when a training set has fewer than
// 2 rows or a fold is empty.
CvResult cross_validate(const Dataset& data, double alpha, int k_folds, std::span<const double> lambdas,
                        LossKind loss, std::uint64_t seed, const CvOptions& options = {});

}  // namespace flam
