#pragma once

#include "flam/core.hpp"

namespace flam {

// minimize 1/2 ||target - theta||^2 + fuse_weight * ||D theta||_1
struct FLProblem {
    Vector target;
    double fuse_weight = 0.0;
};

// Exact O(n) solution of the 1D fused lasso (total-variation denoising).
//
// Forward pass: the derivative of the partial objective
//   f_k(b) = min over theta_1..theta_{k-1} with theta_k = b
// is piecewise linear and increasing. Clipping it to [-w, w] yields the
// message passed to the next coordinate; the two clip points are the
// back-pointers. Breakpoints of the derivative live in a deque: clipping
// pops from both ends, and each step pushes one breakpoint at each end, so
// the total work is linear. Backward pass: theta_k is theta_{k+1} clamped
// to the k-th clip interval.
Vector fused_lasso_1d(const FLProblem& problem);
Vector fused_lasso_1d(const Vector& target, double fuse_weight);

// 1/2 ||target - theta||^2 + w ||D theta||_1
double fused_lasso_objective(const Vector& target, const Vector& theta, double fuse_weight);

}  // namespace flam
