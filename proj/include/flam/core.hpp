#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace flam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Source indices in ascending covariate order: ordering[k] is the observation
// that sits at sorted position k.
using Permutation = std::vector<Index>;

enum class LossKind { squared, logistic };

// Entries of beta (and whole theta blocks) at or below this magnitude count as zero.
inline constexpr double kZeroThreshold = 1e-10;

// Stable ascending sort of x; ties keep their original relative order.
Permutation order_feature(std::span<const double> x);
Permutation order_feature(const Vector& x);

// rank[ordering[k]] == k
Permutation invert_permutation(const Permutation& ordering);

// Response plus covariates, with the sorting permutation of every column.
class Dataset {
public:
    Dataset(Vector y, Matrix X);

    const Vector& y() const { return y_; }
    const Matrix& X() const { return X_; }
    Index n() const { return y_.size(); }
    Index p() const { return X_.cols(); }
    const Permutation& ordering(Index j) const { return orderings_[static_cast<std::size_t>(j)]; }
    const Permutation& rank(Index j) const { return ranks_[static_cast<std::size_t>(j)]; }

    // Rows picked out by `rows`, in that order.
    Dataset subset(std::span<const Index> rows) const;

private:
    Vector y_;
    Matrix X_;
    std::vector<Permutation> orderings_;
    std::vector<Permutation> ranks_;
};

// lambda scales the whole penalty, alpha splits it between fusion (alpha) and
// group sparsity (1 - alpha). epsilon is the ridge stabiliser used by the
// degrees-of-freedom estimator.
struct PenaltySpec {
    double lambda = 0.0;
    double alpha = 1.0;
    double epsilon = 1e-8;

    void validate() const;
};

struct FlamFit {
    double theta0 = 0.0;
    std::vector<Vector> thetas;  // observation order, each sums to zero
    std::vector<Vector> betas;   // adjacent differences in sorted order, length n - 1
    std::vector<Index> active_features;
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
    // Logistic fits only: some linear predictor exceeded the expit cap.
    bool hit_cap = false;
    PenaltySpec penalty;
    std::vector<double> objective_trace;  // one entry per sweep / iteration

    Index p() const { return static_cast<Index>(thetas.size()); }
    // theta0 + sum_j theta_j
    Vector fitted() const;
};

// A fitted component as knots plus levels. Right-continuous: at a knot the
// level to the right applies. Constant beyond the outermost knots.
struct StepFunction {
    std::vector<double> knots;
    std::vector<double> levels;
    double domain_lo = 0.0;
    double domain_hi = 0.0;

    double operator()(double x) const;
    bool valid() const;
};

// O(n) products with the first-difference matrix D (rows (1, -1)) and its
// centred right inverse U. Nothing here materialises an n x n matrix.
class DiffMaps {
public:
    explicit DiffMaps(Index n);

    Index n() const { return n_; }

    Vector D(const Vector& theta) const;     // length n - 1
    Vector Dt(const Vector& s) const;        // length n
    Vector U(const Vector& beta) const;      // length n, sums to zero
    Vector Ut(const Vector& a) const;        // length n - 1

private:
    Index n_;
};

// Dense U: column k is the indicator of rows 0..k minus its mean.
Matrix build_U(Index n);

// Dense D, (n-1) x n. For tests and the df module only.
Matrix build_D(Index n);

// theta_j = P_j^T U beta_j.
Vector theta_from_beta(const Vector& beta, const Permutation& ordering);

// beta_j = D P_j theta_j. Throws PreconditionViolation when theta is not centred.
Vector beta_from_theta(const Vector& theta, const Permutation& ordering);

// Same as beta_from_theta without the centring check.
Vector ordered_differences(const Vector& theta, const Permutation& ordering);

Vector apply_ordering(const Vector& v, const Permutation& ordering);
Vector undo_ordering(const Vector& sorted, const Permutation& ordering);

}  // namespace flam
