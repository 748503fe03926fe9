#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "flam/core.hpp"

namespace flam::sim {

inline constexpr double kDomainLo = -2.5;
inline constexpr double kDomainHi = 2.5;

// Scenario 0 has no signal; 1: piecewise constant, 2: smooth, 3: two of
// each, 4: constant on [-2.5, 0), oscillating on [0, 2.5]. Features beyond
// the four signal columns are pure noise.
struct ScenarioSpec {
    int scenario = 1;
    int p_total = 4;
    Index n = 100;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

using Function1d = std::function<double(double)>;

// Signal f_j (j = 0..3) of a scenario, shifted and scaled so that its
// integral over [-2.5, 2.5] is 0 and its squared integral is 1.
Function1d signal_function(int scenario, int j);

// Composite 5-point Gauss-Legendre over `panels` equal panels.
double integrate(const Function1d& f, double lo, double hi, int panels = 400);

// Deterministic, well-mixed 64-bit seed for stream `index` under `base`.
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index);

struct SimDataset {
    Dataset data;
    Vector mu;                 // noiseless mean
    std::vector<Vector> truth; // f_j(x_ij), zero for noise features
};

// x_ij ~ U[-2.5, 2.5], y = sum f_j(x_j) + noise_sd * N(0, 1).
SimDataset generate(const ScenarioSpec& spec);

// y ~ Bernoulli(expit(f_1(x_1) + f_2(x_2))) with the first two signal
// functions of spec.scenario; further columns are noise features.
SimDataset generate_logistic(const ScenarioSpec& spec);

struct ConsistencyConfig {
    std::vector<Index> n_grid{50, 100, 200};
    int p = 4;
    int scenario = 1;
    double sigma = 1.0;
    double alpha = 1.0;
    int n_reps = 200;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct ConsistencyRow {
    Index n = 0;
    double lambda = 0.0;           // per-observation scale, 2 sigma sqrt(log((n-1)p)/n)
    double violation_rate = 0.0;
    double failure_bound = 0.0;    // 2/((n-1)p) + 1/n
    double binomial_se = 0.0;
    double mean_error = 0.0;       // mean of (1/n)||sum_j (theta_hat_j - theta0_j)||^2
    double error_se = 0.0;
    double sparse_rate = 0.0;      // fraction of fits with every block zero
};

// Prediction-error bound check. The bound is stated for
//   (1/2n)||y - theta0 - sum theta_j||^2 + lambda * penalty,
// so fits use lambda * n on the unscaled objective. The truth is centred
// empirically, matching the intercept the fit carries.
std::vector<ConsistencyRow> consistency_experiment(const ConsistencyConfig& config);

struct ScenarioExperimentConfig {
    int scenario = 1;
    int p_total = 4;
    Index n = 100;
    double sigma = 1.0;
    std::vector<double> alphas{0.5, 0.75, 1.0};
    int n_lambda = 30;
    double lambda_min_ratio = 1e-3;
    int n_reps = 100;
    std::uint64_t seed = 1;
    int threads = 1;
};

// One fitted (replicate, alpha, lambda) cell.
struct ScenarioRecord {
    int replicate = 0;
    double alpha = 0.0;
    double lambda = 0.0;
    double test_mse = 0.0;
    double validation_mse = 0.0;
    double df = 0.0;
    Index active = 0;
    double parameter_fit = 0.0;  // sum_j ||theta_j - theta_hat_j||^2 on the training set
};

struct AlphaSummary {
    double alpha = 0.0;
    double mean_test_mse = 0.0;        // at the test-optimal lambda
    double se_test_mse = 0.0;
    double mean_validation_mse = 0.0;  // at the test-optimal lambda
    double se_validation_mse = 0.0;
    double mean_df = 0.0;
    double mean_active = 0.0;
};

struct ScenarioExperiment {
    std::vector<ScenarioRecord> records;
    std::vector<AlphaSummary> summaries;
};

// Train, test and validation sets of size n per replicate. Each alpha is fit
// over a lambda path from its own sparsity threshold; the lambda with the
// lowest test MSE is scored on the validation set.
ScenarioExperiment scenario_experiment(const ScenarioExperimentConfig& config);

void write_records_csv(std::ostream& out, const std::vector<ScenarioRecord>& records);
void write_consistency_csv(std::ostream& out, const std::vector<ConsistencyRow>& rows);

}  // namespace flam::sim
