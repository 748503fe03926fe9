#include "flam/prox.hpp"

#include "flam/errors.hpp"
#include "flam/solvers.hpp"

namespace flam {

Vector soft_scale(const Vector& theta_hat, double group_weight) {
    const double norm = theta_hat.norm();
    if (norm <= group_weight || norm == 0.0) {
        return Vector::Zero(theta_hat.size());
    }
    return (1.0 - group_weight / norm) * theta_hat;
}

double centre_block(Vector& theta) {
    if (theta.size() == 0) return 0.0;
    if (theta.maxCoeff() == theta.minCoeff()) {
        const double level = theta[0];
        theta.setZero();
        return level;
    }
    const double mean = theta.mean();
    theta.array() -= mean;
    return mean;
}

Vector generic_sparse_prox(const Vector& y, const BaseProx& base_solver, double group_weight) {
    if (!(group_weight >= 0.0)) {
        throw InvalidArgument("generic_sparse_prox: group weight must be >= 0");
    }
    return soft_scale(base_solver(y), group_weight);
}

Vector flam_block_prox(const Vector& v, const Permutation& ordering, double fuse_weight,
                       double group_weight) {
    const BaseProx fused = [&](const Vector& target) {
        return undo_ordering(fused_lasso_1d(apply_ordering(target, ordering), fuse_weight), ordering);
    };
    return generic_sparse_prox(v, fused, group_weight);
}

}  // namespace flam
