#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flam/core.hpp"

namespace flam {

// Nonzero differences of a fit and the dense pieces of the df formula,
// restricted to the active columns.
struct ActiveSetDecomposition {
    std::vector<std::vector<Index>> per_feature;  // A_j, sorted-order difference indices
    std::vector<Index> features;                  // features with nonempty A_j
    Matrix V;                                     // n x |A|, columns P_j^T U e_k
    Matrix S2;                                    // |A| x |A|, block diagonal
    Index size() const { return V.cols(); }
};

ActiveSetDecomposition decompose_active_set(const FlamFit& fit, const Dataset& data);

struct DfEstimate {
    double df = 1.0;
    bool ridge_retry = false;  // epsilon was zero and the system was singular
};

// Tr(V_A [V_A^T V_A + (1 - alpha) lambda S2 + epsilon I]^{-1} V_A^T) + 1 using
// the fit's penalty. Returns 1 for an empty active set.
DfEstimate df_flam(const FlamFit& fit, const Dataset& data);
DfEstimate df_flam(const FlamFit& fit, const PenaltySpec& penalty, const Dataset& data);

// Smallest singular value of V_A above 1e-8 times the largest.
bool va_full_rank(const ActiveSetDecomposition& decomposition);

// Total number of differences above kZeroThreshold.
Index knot_count(const FlamFit& fit);

// Fitted values for replicate `rep` given its response.
using Fitter = std::function<Vector(const Vector& y, std::size_t rep)>;

struct MonteCarloDf {
    double mean = 0.0;
    double se = 0.0;
    std::vector<double> per_replicate;
};

// (1/sigma^2) sum_i (yhat_i - mu_i)(y_i - mu_i), averaged over replicates
// y = mu + sigma z. Replicate r draws z from its own seeded stream, so the
// result does not depend on `threads`.
MonteCarloDf df_monte_carlo(const Vector& mu, double sigma, const Fitter& fitter, int n_reps,
                            std::uint64_t seed, int threads = 1);

// Gaussian noise vector for replicate `rep` of df_monte_carlo.
Vector replicate_noise(Index n, std::uint64_t seed, std::size_t rep);

}  // namespace flam
