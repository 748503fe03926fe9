#include "flam/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "flam/errors.hpp"

namespace flam {

namespace {

// Crossing this breakpoint left to right adds (slope, offset) to the
// current linear piece a * b + c of the derivative.
struct Breakpoint {
    double x;
    double slope;
    double offset;
};

}  // namespace

Vector fused_lasso_1d(const Vector& target, double fuse_weight) {
    const Index n = target.size();
    if (n < 1) {
        throw InvalidArgument("fused_lasso_1d: empty target");
    }
    if (!target.allFinite()) {
        throw InvalidArgument("fused_lasso_1d: non-finite target");
    }
    if (!(fuse_weight >= 0.0) || !std::isfinite(fuse_weight)) {
        throw InvalidArgument("fused_lasso_1d: fuse weight must be finite and >= 0");
    }
    if (n == 1 || fuse_weight == 0.0) {
        return target;
    }

    const double w = fuse_weight;
    std::deque<Breakpoint> bps;
    std::vector<double> clip_lo(static_cast<std::size_t>(n - 1));
    std::vector<double> clip_hi(static_cast<std::size_t>(n - 1));

    // Outermost pieces of f_k'. For k = 0 the derivative is b - y_0 everywhere.
    double first_a = 1.0;
    double first_c = -target[0];
    double last_a = 1.0;
    double last_c = -target[0];

    for (Index k = 0; k < n - 1; ++k) {
        double a = first_a;
        double c = first_c;
        while (!bps.empty() && a * bps.front().x + c <= -w) {
            a += bps.front().slope;
            c += bps.front().offset;
            bps.pop_front();
        }
        const double lo = (-w - c) / a;

        double ar = last_a;
        double cr = last_c;
        while (!bps.empty() && ar * bps.back().x + cr >= w) {
            ar -= bps.back().slope;
            cr -= bps.back().offset;
            bps.pop_back();
        }
        const double hi = (w - cr) / ar;

        clip_lo[static_cast<std::size_t>(k)] = lo;
        clip_hi[static_cast<std::size_t>(k)] = hi;

        // Clipped derivative: -w left of lo, w right of hi.
        bps.push_front({lo, a, c + w});
        bps.push_back({hi, -ar, w - cr});

        // Add the next data term b - y_{k+1}; breakpoint increments are unchanged.
        const double yk = target[k + 1];
        first_a = 1.0;
        first_c = -w - yk;
        last_a = 1.0;
        last_c = w - yk;
    }

    double a = first_a;
    double c = first_c;
    while (!bps.empty() && a * bps.front().x + c <= 0.0) {
        a += bps.front().slope;
        c += bps.front().offset;
        bps.pop_front();
    }

    Vector theta(n);
    theta[n - 1] = -c / a;
    for (Index k = n - 2; k >= 0; --k) {
        const auto kk = static_cast<std::size_t>(k);
        theta[k] = std::clamp(theta[k + 1], clip_lo[kk], clip_hi[kk]);
    }
    return theta;
}

Vector fused_lasso_1d(const FLProblem& problem) {
    return fused_lasso_1d(problem.target, problem.fuse_weight);
}

double fused_lasso_objective(const Vector& target, const Vector& theta, double fuse_weight) {
    double tv = 0.0;
    for (Index i = 0; i + 1 < theta.size(); ++i) {
        tv += std::abs(theta[i] - theta[i + 1]);
    }
    return 0.5 * (target - theta).squaredNorm() + fuse_weight * tv;
}

}  // namespace flam
