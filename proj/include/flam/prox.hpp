#pragma once

#include <functional>

#include "flam/core.hpp"

namespace flam {

// (1 - group_weight / ||theta_hat||_2)_+ * theta_hat; zero when the norm is
// at most group_weight (including theta_hat == 0).
Vector soft_scale(const Vector& theta_hat, double group_weight);

// Exact minimiser of 1/2||y - theta||^2 + fuse * ||B theta|| for some fixed B and norm.
using BaseProx = std::function<Vector(const Vector&)>;

// Subtracts the mean of theta and returns it. A constant block becomes exactly
// zero rather than rounding noise.
double centre_block(Vector& theta);

// Minimiser of 1/2||y - theta||^2 + fuse * ||B theta|| + group_weight * ||theta||_2:
// the base solution, soft-scaled.
Vector generic_sparse_prox(const Vector& y, const BaseProx& base_solver, double group_weight);

// Prox of the FLAM block penalty in observation order:
//   argmin 1/2||v - theta||^2 + fuse_weight ||D P theta||_1 + group_weight ||theta||_2
Vector flam_block_prox(const Vector& v, const Permutation& ordering, double fuse_weight,
                       double group_weight);

}  // namespace flam
