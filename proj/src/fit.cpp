#include "flam/fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flam/errors.hpp"
#include "flam/modelsel.hpp"
#include "flam/prox.hpp"
#include "flam/solvers.hpp"

namespace flam {

namespace {

double block_penalty(const Vector& theta, const Permutation& ordering, double alpha) {
    double tv = 0.0;
    if (alpha > 0.0) {
        tv = ordered_differences(theta, ordering).lpNorm<1>();
    }
    return alpha * tv + (1.0 - alpha) * theta.norm();
}

double relative_decrease(double before, double after) {
    return (before - after) / std::max(1.0, std::abs(before));
}

std::vector<Index> active_of(const std::vector<Vector>& thetas) {
    std::vector<Index> active;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        if (thetas[j].size() > 0 && thetas[j].lpNorm<Eigen::Infinity>() > kZeroThreshold) {
            active.push_back(static_cast<Index>(j));
        }
    }
    return active;
}

// Working state of the coordinate descent: full residual plus cached block penalties.
class BlockDescent {
public:
    BlockDescent(const Dataset& data, const PenaltySpec& penalty, FlamFit& fit)
        : data_(data), penalty_(penalty), fit_(fit), block_pen_(static_cast<std::size_t>(data.p())) {
        resid_ = data.y().array() - fit.theta0;
        for (Index j = 0; j < data.p(); ++j) {
            resid_ -= fit.thetas[static_cast<std::size_t>(j)];
            block_pen_[static_cast<std::size_t>(j)] =
                block_penalty(fit.thetas[static_cast<std::size_t>(j)], data.ordering(j), penalty.alpha);
        }
    }

    double objective() const {
        double pen = 0.0;
        for (double b : block_pen_) pen += b;
        return 0.5 * resid_.squaredNorm() + penalty_.lambda * pen;
    }

    void update(Index j) {
        const auto jj = static_cast<std::size_t>(j);
        const auto& ord = data_.ordering(j);
        Vector& theta = fit_.thetas[jj];
        const Vector partial = resid_ + theta;

        Vector fused = fused_lasso_1d(apply_ordering(partial, ord), penalty_.alpha * penalty_.lambda);
        const double shift = centre_block(fused);
        theta = undo_ordering(soft_scale(fused, (1.0 - penalty_.alpha) * penalty_.lambda), ord);
        fit_.theta0 += shift;
        resid_ = partial - theta;
        resid_.array() -= shift;
        block_pen_[jj] = block_penalty(theta, ord, penalty_.alpha);
    }

private:
    const Dataset& data_;
    const PenaltySpec& penalty_;
    FlamFit& fit_;
    Vector resid_;
    std::vector<double> block_pen_;
};

}  // namespace

void FitConfig::validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("FitConfig: tol must be > 0");
    if (max_sweeps < 1) throw InvalidArgument("FitConfig: max_sweeps must be >= 1");
    if (active_set_cycle < 1) throw InvalidArgument("FitConfig: active_set_cycle must be >= 1");
}

double rss(const Dataset& data, const FlamFit& fit) {
    return (data.y() - fit.fitted()).squaredNorm();
}

double objective(const Dataset& data, const PenaltySpec& penalty, const FlamFit& fit) {
    if (fit.p() != data.p()) {
        throw InvalidArgument("objective: fit has " + std::to_string(fit.p()) + " features, data has " +
                              std::to_string(data.p()));
    }
    double fuse = 0.0;
    double group = 0.0;
    double ridge = 0.0;
    for (Index j = 0; j < data.p(); ++j) {
        const Vector& theta = fit.thetas[static_cast<std::size_t>(j)];
        if (theta.size() != data.n()) {
            throw InvalidArgument("objective: theta length does not match n");
        }
        const Vector diffs = ordered_differences(theta, data.ordering(j));
        fuse += diffs.lpNorm<1>();
        group += theta.norm();
        if (penalty.epsilon > 0.0) {
            ridge += diffs.squaredNorm();
        }
    }
    return 0.5 * rss(data, fit) + penalty.alpha * penalty.lambda * fuse +
           (1.0 - penalty.alpha) * penalty.lambda * group + 0.5 * penalty.epsilon * ridge;
}

void finalize_fit(const Dataset& data, FlamFit& fit) {
    fit.betas.clear();
    for (Index j = 0; j < data.p(); ++j) {
        fit.betas.push_back(ordered_differences(fit.thetas[static_cast<std::size_t>(j)], data.ordering(j)));
    }
    fit.active_features = active_of(fit.thetas);
    PenaltySpec plain = fit.penalty;
    plain.epsilon = 0.0;
    fit.objective = objective(data, plain, fit);
}

FlamFit flam_bcd(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config,
                 const FlamFit* warm_start) {
    penalty.validate();
    config.validate();
    const Index p = data.p();

    FlamFit fit;
    fit.penalty = penalty;
    if (warm_start != nullptr) {
        if (warm_start->p() != p ||
            std::any_of(warm_start->thetas.begin(), warm_start->thetas.end(),
                        [&](const Vector& t) { return t.size() != data.n(); })) {
            throw InvalidArgument("flam_bcd: warm start does not match the data dimensions");
        }
        fit.theta0 = warm_start->theta0;
        fit.thetas = warm_start->thetas;
    } else {
        fit.thetas.assign(static_cast<std::size_t>(p), Vector::Zero(data.n()));
    }

    BlockDescent descent(data, penalty, fit);
    double obj = descent.objective();
    fit.converged = false;

    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    auto sweep = [&](const std::vector<Index>& features) {
        for (Index j : features) {
            descent.update(j);
            if (config.on_block_update) {
                config.on_block_update(j, descent.objective());
            }
        }
        ++fit.iterations;
        const double value = descent.objective();
        if (!std::isfinite(value)) {
            throw NumericFailure("flam_bcd: objective became non-finite");
        }
        fit.objective_trace.push_back(value);
        return value;
    };

    std::vector<Index> previous_active = active_of(fit.thetas);
    while (fit.iterations < config.max_sweeps) {
        const double before = obj;
        obj = sweep(all);
        const std::vector<Index> active = active_of(fit.thetas);
        const bool stable = active == previous_active;
        previous_active = active;
        const bool small_step = relative_decrease(before, obj) < config.tol;
        if (small_step && (stable || !config.use_active_sets)) {
            fit.converged = true;
            break;
        }
        if (!config.use_active_sets || active.empty()) {
            continue;
        }
        for (int c = 0; c < config.active_set_cycle && fit.iterations < config.max_sweeps; ++c) {
            const double inner_before = obj;
            obj = sweep(active);
            if (relative_decrease(inner_before, obj) < config.tol) {
                break;
            }
        }
    }

    finalize_fit(data, fit);
    return fit;
}

std::vector<double> lambda_grid(double lambda_max, int n_lambda, double lambda_min_ratio) {
    if (n_lambda < 2) {
        throw InvalidArgument("lambda_grid: n_lambda must be >= 2");
    }
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw InvalidArgument("lambda_grid: lambda_min_ratio must lie in (0, 1)");
    }
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
        throw InvalidArgument("lambda_grid: lambda_max must be positive and finite");
    }
    std::vector<double> grid(static_cast<std::size_t>(n_lambda));
    const double log_ratio = std::log(lambda_min_ratio);
    for (int i = 0; i < n_lambda; ++i) {
        grid[static_cast<std::size_t>(i)] =
            lambda_max * std::exp(log_ratio * static_cast<double>(i) / static_cast<double>(n_lambda - 1));
    }
    grid.front() = lambda_max;
    return grid;
}

FitPath flam_path(const Dataset& data, double alpha, int n_lambda, double lambda_min_ratio,
                  const FitConfig& config) {
    double top = lambda_sparse_threshold(data, alpha);
    if (top == 0.0) {
        top = 1.0;
    }
    const auto grid = lambda_grid(top, n_lambda, lambda_min_ratio);
    return flam_path(data, alpha, std::span<const double>(grid), config);
}

FitPath flam_path(const Dataset& data, double alpha, std::span<const double> lambdas,
                  const FitConfig& config) {
    if (lambdas.empty()) {
        throw InvalidArgument("flam_path: empty lambda grid");
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0) || (i > 0 && !(lambdas[i] < lambdas[i - 1]))) {
            throw InvalidArgument("flam_path: lambdas must be positive and strictly decreasing");
        }
    }
    FitPath path;
    path.alpha = alpha;
    path.lambdas.assign(lambdas.begin(), lambdas.end());
    path.fits.reserve(lambdas.size());
    for (double lambda : lambdas) {
        PenaltySpec pen;
        pen.lambda = lambda;
        pen.alpha = alpha;
        const FlamFit* warm = path.fits.empty() ? nullptr : &path.fits.back();
        path.fits.push_back(flam_bcd(data, pen, config, warm));
    }
    return path;
}

DebiasedFit debias_refit(const Dataset& data, const FlamFit& fit) {
    if (fit.p() != data.p()) {
        throw InvalidArgument("debias_refit: fit and data feature counts differ");
    }
    const Index n = data.n();

    // Knot positions (sorted-order indices k: a level change between k and k+1).
    std::vector<std::vector<Index>> knots(static_cast<std::size_t>(data.p()));
    Index columns = 1;
    const auto active = active_of(fit.thetas);
    for (Index j : active) {
        const Vector diffs = ordered_differences(fit.thetas[static_cast<std::size_t>(j)], data.ordering(j));
        for (Index k = 0; k < diffs.size(); ++k) {
            if (std::abs(diffs[k]) > kZeroThreshold) {
                knots[static_cast<std::size_t>(j)].push_back(k);
            }
        }
        columns += static_cast<Index>(knots[static_cast<std::size_t>(j)].size());
    }
    if (columns + static_cast<Index>(active.size()) > n) {
        throw InvalidArgument("debias_refit: knots + active features + 1 exceeds n");
    }

    Matrix basis = Matrix::Zero(n, columns);
    basis.col(0).setOnes();
    Index col = 1;
    for (Index j : active) {
        const auto& rank = data.rank(j);
        for (Index k : knots[static_cast<std::size_t>(j)]) {
            for (Index i = 0; i < n; ++i) {
                basis(i, col) = rank[static_cast<std::size_t>(i)] > k ? 1.0 : 0.0;
            }
            ++col;
        }
    }

    DebiasedFit out;
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-10);
    Vector coef;
    if (qr.rank() == columns) {
        coef = qr.solve(data.y());
    } else {
        out.rank_deficient = true;
        const Matrix gram = basis.transpose() * basis + 1e-10 * Matrix::Identity(columns, columns);
        coef = gram.ldlt().solve(basis.transpose() * data.y());
    }

    FlamFit& refit = out.fit;
    refit.penalty = fit.penalty;
    refit.converged = true;
    refit.theta0 = coef[0];
    refit.thetas.assign(static_cast<std::size_t>(data.p()), Vector::Zero(n));
    col = 1;
    for (Index j : active) {
        const auto count = static_cast<Index>(knots[static_cast<std::size_t>(j)].size());
        Vector component = basis.middleCols(col, count) * coef.segment(col, count);
        const double shift = component.mean();
        component.array() -= shift;
        refit.theta0 += shift;
        refit.thetas[static_cast<std::size_t>(j)] = component;
        col += count;
    }
    finalize_fit(data, refit);
    return out;
}

}  // namespace flam
