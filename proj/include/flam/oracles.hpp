#pragma once

#include <functional>

#include "flam/core.hpp"

// Reference solvers used to check the production path. They share no code
// with fused_lasso_1d, soft_scale or the block coordinate descent.
namespace flam::oracle {

// smooth(x) + nonsmooth(x), where prox(v, t) = argmin 1/2||x - v||^2 + t * nonsmooth(x).
struct CompositeProblem {
    std::function<double(const Vector&)> smooth;
    std::function<Vector(const Vector&)> gradient;
    std::function<double(const Vector&)> nonsmooth;
    std::function<Vector(const Vector&, double)> prox;
};

struct ProxGradientOptions {
    double step = 1.0;          // 1 / L
    int max_iter = 200000;
    double tol = 1e-10;         // on the gradient-mapping norm, relative to max(1, ||x||_inf)
    bool accelerate = true;     // FISTA momentum with function-value restart
};

struct ProxGradientResult {
    Vector x;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Proximal gradient descent. Returns the best iterate seen. Throws
// NumericFailure if the objective increases on 100 consecutive steps.
ProxGradientResult prox_gradient(const CompositeProblem& problem, const Vector& init,
                                 const ProxGradientOptions& options = {});

// 1D fused lasso through its box-constrained dual,
//   min_z 1/2 ||y - D^T z||^2  s.t. |z_i| <= w,   theta = y - D^T z,
// solved by prox_gradient with projection as the prox and L = 4 >= ||D D^T||.
Vector fused_lasso_dual(const Vector& y, double w, const ProxGradientOptions& options = {});

// Exact 1D fused lasso by following the solution path in w from 0. Blocks
// move linearly between fusion events and never split, so tracking merges
// gives the solution. O(n^2).
Vector fused_lasso_path(const Vector& y, double w);

// Exact minimiser over the lattice {min(y) + k * grid_step}^n, computed by
// dynamic programming over the chain. Throws InvalidArgument for n > 6.
Vector grid_qp(const Vector& y, double w, double grid_step);

// Worst-case objective excess of the lattice minimiser over the true
// minimiser theta, from rounding theta onto the lattice.
double grid_resolution_bound(const Vector& y, const Vector& theta, double w, double grid_step);

struct FlamOracleResult {
    double theta0 = 0.0;
    std::vector<Vector> thetas;
    double objective = 0.0;
    int iterations = 0;
};

// The full additive problem
//   1/2||y - theta0 - sum theta_j||^2 + lambda sum [alpha ||D P_j theta_j||_1 + (1-alpha)||theta_j||_2]
// by accelerated proximal gradient on the theta_j blocks with the intercept
// profiled out (smooth part 1/2||C(y - sum theta_j)||^2, L = p). Each block
// prox is fused_lasso_path followed by a group shrink.
FlamOracleResult flam_prox_gradient(const Dataset& data, double lambda, double alpha,
                                    const ProxGradientOptions& options = {});

// Plain FLAM objective, recomputed from scratch.
double flam_objective(const Dataset& data, double lambda, double alpha, double theta0,
                      const std::vector<Vector>& thetas);

// Lasso min 1/2||r - A b||^2 + lambda ||b||_1 by cyclic coordinate descent
// on a dense design. Runs until the largest coordinate change < tol.
Vector lasso_coordinate_descent(const Matrix& A, const Vector& r, double lambda, double tol = 1e-13,
                                int max_sweeps = 1000000);

}  // namespace flam::oracle
