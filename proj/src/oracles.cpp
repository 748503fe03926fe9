#include "flam/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flam/errors.hpp"

namespace flam::oracle {

namespace {

double sign_of(double v) {
    return (v > 0.0) - (v < 0.0);
}

double total_variation(const Vector& v) {
    double tv = 0.0;
    for (Index i = 0; i + 1 < v.size(); ++i) {
        tv += std::abs(v[i] - v[i + 1]);
    }
    return tv;
}

}  // namespace

ProxGradientResult prox_gradient(const CompositeProblem& problem, const Vector& init,
                                 const ProxGradientOptions& options) {
    const double step = options.step;
    auto F = [&](const Vector& x) { return problem.smooth(x) + problem.nonsmooth(x); };

    Vector x = init;
    double fx = F(x);
    if (!std::isfinite(fx)) {
        throw NumericFailure("prox_gradient: non-finite objective at the initial point");
    }
    Vector extrap = x;
    double momentum = 1.0;
    int increases = 0;

    ProxGradientResult result;
    result.x = x;
    result.objective = fx;

    for (int it = 1; it <= options.max_iter; ++it) {
        result.iterations = it;
        const Vector base = options.accelerate ? extrap : x;
        const Vector candidate = problem.prox(base - step * problem.gradient(base), step);
        const double fc = F(candidate);
        if (!std::isfinite(fc)) {
            throw NumericFailure("prox_gradient: non-finite objective");
        }
        const double mapping = (candidate - base).lpNorm<Eigen::Infinity>();
        const double slack = 1e-12 * std::max(1.0, std::abs(fx));

        if (fc > fx + slack) {
            if (++increases >= 100) {
                throw NumericFailure("prox_gradient: objective increased on 100 consecutive steps");
            }
            if (options.accelerate) {
                // Restart: drop momentum and retry from the last accepted point.
                momentum = 1.0;
                extrap = x;
                continue;
            }
        } else {
            increases = 0;
        }

        if (options.accelerate) {
            const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            extrap = candidate + ((momentum - 1.0) / next) * (candidate - x);
            momentum = next;
        }
        x = candidate;
        fx = fc;
        if (fx < result.objective) {
            result.objective = fx;
            result.x = x;
        }
        const double scale = std::max(1.0, x.size() > 0 ? x.lpNorm<Eigen::Infinity>() : 0.0);
        if (mapping <= options.tol * scale) {
            result.converged = true;
            break;
        }
    }
    return result;
}

Vector fused_lasso_dual(const Vector& y, double w, const ProxGradientOptions& options) {
    const Index n = y.size();
    if (n < 2 || w == 0.0) {
        return y;
    }
    auto Dt = [n](const Vector& z) {
        Vector out(n);
        out[0] = z[0];
        for (Index i = 1; i < n - 1; ++i) out[i] = z[i] - z[i - 1];
        out[n - 1] = -z[n - 2];
        return out;
    };
    auto Dx = [n](const Vector& v) {
        Vector out(n - 1);
        for (Index i = 0; i < n - 1; ++i) out[i] = v[i] - v[i + 1];
        return out;
    };
    CompositeProblem problem;
    problem.smooth = [&](const Vector& z) { return 0.5 * (y - Dt(z)).squaredNorm(); };
    problem.gradient = [&](const Vector& z) { return Vector(-Dx(y - Dt(z))); };
    problem.nonsmooth = [](const Vector&) { return 0.0; };
    problem.prox = [w](const Vector& v, double) { return Vector(v.cwiseMax(-w).cwiseMin(w)); };

    ProxGradientOptions opts = options;
    opts.step = 0.25;
    const auto res = prox_gradient(problem, Vector::Zero(n - 1), opts);
    return y - Dt(res.x);
}

Vector fused_lasso_path(const Vector& y, double w) {
    const Index n = y.size();
    if (n < 2 || w <= 0.0) {
        return y;
    }
    struct Block {
        double value;
        double size;
        Index start;
        Index count;
    };
    const double scale = std::max(1.0, y.lpNorm<Eigen::Infinity>());
    const double tie = 1e-13 * scale;

    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        blocks.push_back({y[i], 1.0, i, 1});
    }

    auto merge = [&](std::size_t b) {
        Block& left = blocks[b];
        const Block& right = blocks[b + 1];
        left.value = (left.size * left.value + right.size * right.value) / (left.size + right.size);
        left.size += right.size;
        left.count += right.count;
        blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    };
    auto merge_ties = [&]() {
        for (std::size_t b = 0; b + 1 < blocks.size();) {
            if (std::abs(blocks[b + 1].value - blocks[b].value) <= tie) {
                merge(b);
            } else {
                ++b;
            }
        }
    };

    merge_ties();
    double current = 0.0;
    std::vector<double> rate;
    while (true) {
        const std::size_t m = blocks.size();
        rate.assign(m, 0.0);
        for (std::size_t b = 0; b < m; ++b) {
            double s = 0.0;
            if (b > 0) s += sign_of(blocks[b].value - blocks[b - 1].value);
            if (b + 1 < m) s += sign_of(blocks[b].value - blocks[b + 1].value);
            rate[b] = -s / blocks[b].size;
        }
        double next_event = std::numeric_limits<double>::infinity();
        std::size_t event_pair = 0;
        for (std::size_t b = 0; b + 1 < m; ++b) {
            const double gap = blocks[b + 1].value - blocks[b].value;
            const double closing = rate[b + 1] - rate[b];
            if (gap * closing < 0.0) {
                const double t = -gap / closing;
                if (t < next_event) {
                    next_event = t;
                    event_pair = b;
                }
            }
        }
        const double remaining = w - current;
        const double advance = std::min(next_event, remaining);
        for (std::size_t b = 0; b < m; ++b) {
            blocks[b].value += advance * rate[b];
        }
        if (next_event >= remaining) {
            break;
        }
        current += advance;
        blocks[event_pair + 1].value = blocks[event_pair].value;
        merge(event_pair);
        merge_ties();
    }

    Vector theta(n);
    for (const auto& blk : blocks) {
        theta.segment(blk.start, blk.count).setConstant(blk.value);
    }
    return theta;
}

Vector grid_qp(const Vector& y, double w, double grid_step) {
    const Index n = y.size();
    if (n > 6) {
        throw InvalidArgument("grid_qp: n must be <= 6, got " + std::to_string(n));
    }
    if (n < 1 || !(grid_step > 0.0)) {
        throw InvalidArgument("grid_qp: need n >= 1 and a positive grid step");
    }
    const double lo = y.minCoeff();
    const double hi = y.maxCoeff();
    const auto levels = static_cast<std::size_t>(std::ceil((hi - lo) / grid_step)) + 1;
    auto level = [&](std::size_t k) { return lo + static_cast<double>(k) * grid_step; };
    const double jump = w * grid_step;

    std::vector<double> cost(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        cost[k] = 0.5 * (y[0] - level(k)) * (y[0] - level(k));
    }
    std::vector<std::vector<std::size_t>> back(static_cast<std::size_t>(n));
    std::vector<double> best(levels);
    std::vector<std::size_t> arg(levels);
    for (Index i = 1; i < n; ++i) {
        // Min-convolution of cost with jump * |k - k'| in two sweeps.
        for (std::size_t k = 0; k < levels; ++k) {
            best[k] = cost[k];
            arg[k] = k;
        }
        for (std::size_t k = 1; k < levels; ++k) {
            if (best[k - 1] + jump < best[k]) {
                best[k] = best[k - 1] + jump;
                arg[k] = arg[k - 1];
            }
        }
        for (std::size_t k = levels - 1; k-- > 0;) {
            if (best[k + 1] + jump < best[k]) {
                best[k] = best[k + 1] + jump;
                arg[k] = arg[k + 1];
            }
        }
        back[static_cast<std::size_t>(i)] = arg;
        for (std::size_t k = 0; k < levels; ++k) {
            const double r = y[i] - level(k);
            cost[k] = best[k] + 0.5 * r * r;
        }
    }
    std::size_t k = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    Vector theta(n);
    for (Index i = n - 1; i >= 0; --i) {
        theta[i] = level(k);
        if (i > 0) {
            k = back[static_cast<std::size_t>(i)][k];
        }
    }
    return theta;
}

double grid_resolution_bound(const Vector& y, const Vector& theta, double w, double grid_step) {
    const double half = 0.5 * grid_step;
    const double n = static_cast<double>(y.size());
    return (y - theta).cwiseAbs().sum() * half + n * half * half * 0.5 +
           w * (n - 1.0) * grid_step;
}

double flam_objective(const Dataset& data, double lambda, double alpha, double theta0,
                      const std::vector<Vector>& thetas) {
    Vector resid = data.y().array() - theta0;
    double penalty = 0.0;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        resid -= thetas[j];
        Vector sorted(data.n());
        const auto& ord = data.ordering(static_cast<Index>(j));
        for (Index k = 0; k < data.n(); ++k) sorted[k] = thetas[j][ord[static_cast<std::size_t>(k)]];
        penalty += alpha * total_variation(sorted) + (1.0 - alpha) * thetas[j].norm();
    }
    return 0.5 * resid.squaredNorm() + lambda * penalty;
}

FlamOracleResult flam_prox_gradient(const Dataset& data, double lambda, double alpha,
                                    const ProxGradientOptions& options) {
    const Index n = data.n();
    const Index p = data.p();
    auto centred_residual = [&](const Vector& x) {
        Vector r = data.y();
        for (Index j = 0; j < p; ++j) r -= x.segment(j * n, n);
        r.array() -= r.mean();
        return r;
    };
    auto sorted_block = [&](const Vector& v, Index j) {
        Vector s(n);
        const auto& ord = data.ordering(j);
        for (Index k = 0; k < n; ++k) s[k] = v[ord[static_cast<std::size_t>(k)]];
        return s;
    };

    CompositeProblem problem;
    problem.smooth = [&](const Vector& x) { return 0.5 * centred_residual(x).squaredNorm(); };
    problem.gradient = [&](const Vector& x) {
        const Vector r = centred_residual(x);
        Vector g(n * p);
        for (Index j = 0; j < p; ++j) g.segment(j * n, n) = -r;
        return g;
    };
    problem.nonsmooth = [&](const Vector& x) {
        double total = 0.0;
        for (Index j = 0; j < p; ++j) {
            const Vector block = x.segment(j * n, n);
            total += alpha * total_variation(sorted_block(block, j)) + (1.0 - alpha) * block.norm();
        }
        return lambda * total;
    };
    problem.prox = [&](const Vector& v, double t) {
        Vector out(n * p);
        for (Index j = 0; j < p; ++j) {
            const Vector fused = fused_lasso_path(sorted_block(v.segment(j * n, n), j), t * lambda * alpha);
            const double norm = fused.norm();
            const double group = t * lambda * (1.0 - alpha);
            const double factor = norm > group ? 1.0 - group / norm : 0.0;
            const auto& ord = data.ordering(j);
            for (Index k = 0; k < n; ++k) out[j * n + ord[static_cast<std::size_t>(k)]] = factor * fused[k];
        }
        return out;
    };

    ProxGradientOptions opts = options;
    opts.step = 1.0 / static_cast<double>(p);
    const auto res = prox_gradient(problem, Vector::Zero(n * p), opts);

    FlamOracleResult out;
    out.iterations = res.iterations;
    Vector resid = data.y();
    for (Index j = 0; j < p; ++j) {
        Vector block = res.x.segment(j * n, n);
        block.array() -= block.mean();
        out.thetas.push_back(block);
        resid -= block;
    }
    out.theta0 = resid.mean();
    out.objective = flam_objective(data, lambda, alpha, out.theta0, out.thetas);
    return out;
}

Vector lasso_coordinate_descent(const Matrix& A, const Vector& r, double lambda, double tol,
                                int max_sweeps) {
    const Index m = A.cols();
    Vector b = Vector::Zero(m);
    Vector resid = r;
    const Vector col_sq = A.colwise().squaredNorm().transpose();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double biggest = 0.0;
        for (Index k = 0; k < m; ++k) {
            if (col_sq[k] <= 0.0) continue;
            const double rho = A.col(k).dot(resid) + col_sq[k] * b[k];
            const double shrunk = sign_of(rho) * std::max(0.0, std::abs(rho) - lambda) / col_sq[k];
            const double delta = shrunk - b[k];
            if (delta != 0.0) {
                resid -= delta * A.col(k);
                b[k] = shrunk;
                biggest = std::max(biggest, std::abs(delta));
            }
        }
        if (biggest < tol) break;
    }
    return b;
}

}  // namespace flam::oracle
