#include "flam/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "flam/errors.hpp"

namespace flam {

Permutation order_feature(std::span<const double> x) {
    if (x.empty()) {
        throw InvalidArgument("order_feature: empty input");
    }
    Permutation idx(x.size());
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return x[static_cast<std::size_t>(a)] < x[static_cast<std::size_t>(b)]; });
    return idx;
}

Permutation order_feature(const Vector& x) {
    return order_feature(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Permutation invert_permutation(const Permutation& ordering) {
    Permutation rank(ordering.size());
    for (std::size_t k = 0; k < ordering.size(); ++k) {
        rank[static_cast<std::size_t>(ordering[k])] = static_cast<Index>(k);
    }
    return rank;
}

Dataset::Dataset(Vector y, Matrix X) : y_(std::move(y)), X_(std::move(X)) {
    if (y_.size() < 2) {
        throw InvalidArgument("Dataset: need at least 2 observations, got " + std::to_string(y_.size()));
    }
    if (X_.cols() < 1) {
        throw InvalidArgument("Dataset: need at least 1 feature");
    }
    if (X_.rows() != y_.size()) {
        throw InvalidArgument("Dataset: X has " + std::to_string(X_.rows()) + " rows but y has " +
                              std::to_string(y_.size()) + " entries");
    }
    if (!y_.allFinite() || !X_.allFinite()) {
        throw InvalidArgument("Dataset: non-finite values in y or X");
    }
    orderings_.reserve(static_cast<std::size_t>(X_.cols()));
    ranks_.reserve(static_cast<std::size_t>(X_.cols()));
    for (Index j = 0; j < X_.cols(); ++j) {
        Vector col = X_.col(j);
        orderings_.push_back(order_feature(col));
        ranks_.push_back(invert_permutation(orderings_.back()));
    }
}

Dataset Dataset::subset(std::span<const Index> rows) const {
    Vector y(static_cast<Index>(rows.size()));
    Matrix X(static_cast<Index>(rows.size()), X_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        y[static_cast<Index>(i)] = y_[rows[i]];
        X.row(static_cast<Index>(i)) = X_.row(rows[i]);
    }
    return Dataset(std::move(y), std::move(X));
}

void PenaltySpec::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("penalty: lambda must be finite and >= 0");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidArgument("penalty: alpha must lie in [0, 1]");
    }
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw InvalidArgument("penalty: epsilon must be finite and >= 0");
    }
}

Vector FlamFit::fitted() const {
    if (thetas.empty()) {
        return Vector();
    }
    Vector out = Vector::Constant(thetas.front().size(), theta0);
    for (const auto& t : thetas) {
        out += t;
    }
    return out;
}

double StepFunction::operator()(double x) const {
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    return levels[static_cast<std::size_t>(it - knots.begin())];
}

bool StepFunction::valid() const {
    if (levels.size() != knots.size() + 1) {
        return false;
    }
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (!(knots[k - 1] < knots[k])) {
            return false;
        }
    }
    return true;
}

DiffMaps::DiffMaps(Index n) : n_(n) {
    if (n < 2) {
        throw InvalidArgument("DiffMaps: n must be >= 2");
    }
}

Vector DiffMaps::D(const Vector& theta) const {
    return theta.head(n_ - 1) - theta.tail(n_ - 1);
}

Vector DiffMaps::Dt(const Vector& s) const {
    Vector out(n_);
    out[0] = s[0];
    for (Index i = 1; i < n_ - 1; ++i) {
        out[i] = s[i] - s[i - 1];
    }
    out[n_ - 1] = -s[n_ - 2];
    return out;
}

// (U beta)_i = sum_{k >= i} beta_k - (1/n) sum_k (k + 1) beta_k   (0-based k)
Vector DiffMaps::U(const Vector& beta) const {
    double weighted = 0.0;
    for (Index k = 0; k < n_ - 1; ++k) {
        weighted += static_cast<double>(k + 1) * beta[k];
    }
    const double shift = weighted / static_cast<double>(n_);
    Vector out(n_);
    double suffix = 0.0;
    out[n_ - 1] = -shift;
    for (Index i = n_ - 2; i >= 0; --i) {
        suffix += beta[i];
        out[i] = suffix - shift;
    }
    return out;
}

// (U^T a)_k = sum_{i <= k} a_i - ((k + 1) / n) sum_i a_i
Vector DiffMaps::Ut(const Vector& a) const {
    const double total = a.sum();
    Vector out(n_ - 1);
    double prefix = 0.0;
    for (Index k = 0; k < n_ - 1; ++k) {
        prefix += a[k];
        out[k] = prefix - static_cast<double>(k + 1) * total / static_cast<double>(n_);
    }
    return out;
}

Matrix build_U(Index n) {
    if (n < 2) {
        throw InvalidArgument("build_U: n must be >= 2");
    }
    Matrix U(n, n - 1);
    for (Index k = 0; k < n - 1; ++k) {
        const double mean = static_cast<double>(k + 1) / static_cast<double>(n);
        for (Index i = 0; i < n; ++i) {
            U(i, k) = (i <= k ? 1.0 : 0.0) - mean;
        }
    }
    return U;
}

Matrix build_D(Index n) {
    if (n < 2) {
        throw InvalidArgument("build_D: n must be >= 2");
    }
    Matrix D = Matrix::Zero(n - 1, n);
    for (Index i = 0; i < n - 1; ++i) {
        D(i, i) = 1.0;
        D(i, i + 1) = -1.0;
    }
    return D;
}

Vector apply_ordering(const Vector& v, const Permutation& ordering) {
    Vector out(v.size());
    for (std::size_t k = 0; k < ordering.size(); ++k) {
        out[static_cast<Index>(k)] = v[ordering[k]];
    }
    return out;
}

Vector undo_ordering(const Vector& sorted, const Permutation& ordering) {
    Vector out(sorted.size());
    for (std::size_t k = 0; k < ordering.size(); ++k) {
        out[ordering[k]] = sorted[static_cast<Index>(k)];
    }
    return out;
}

Vector theta_from_beta(const Vector& beta, const Permutation& ordering) {
    const auto n = static_cast<Index>(ordering.size());
    if (n < 2 || beta.size() != n - 1) {
        throw InvalidArgument("theta_from_beta: beta has length " + std::to_string(beta.size()) +
                              ", ordering has length " + std::to_string(n));
    }
    return undo_ordering(DiffMaps(n).U(beta), ordering);
}

Vector ordered_differences(const Vector& theta, const Permutation& ordering) {
    const auto n = static_cast<Index>(ordering.size());
    if (n < 2 || theta.size() != n) {
        throw InvalidArgument("ordered_differences: theta and ordering lengths differ");
    }
    return DiffMaps(n).D(apply_ordering(theta, ordering));
}

Vector beta_from_theta(const Vector& theta, const Permutation& ordering) {
    const auto n = static_cast<Index>(ordering.size());
    if (theta.size() != n) {
        throw InvalidArgument("beta_from_theta: theta and ordering lengths differ");
    }
    const double scale = std::max(1.0, theta.size() > 0 ? theta.cwiseAbs().maxCoeff() : 0.0);
    if (std::abs(theta.sum()) > 1e-8 * static_cast<double>(n) * scale) {
        throw PreconditionViolation("beta_from_theta: theta does not sum to zero");
    }
    return ordered_differences(theta, ordering);
}

}  // namespace flam
