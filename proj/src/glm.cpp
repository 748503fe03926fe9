#include "flam/glm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flam/errors.hpp"
#include "flam/parallel.hpp"
#include "flam/prox.hpp"

namespace flam {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Vector linear_predictor(const FlamFit& fit, Index n) {
    Vector eta = Vector::Constant(n, fit.theta0);
    for (const Vector& t : fit.thetas) eta += t;
    return eta;
}

}  // namespace

double expit(double eta) {
    const double c = std::clamp(eta, -kExpitCap, kExpitCap);
    return 1.0 / (1.0 + std::exp(-c));
}

LossSpec squared_loss(const Vector& y, Index p) {
    LossSpec loss;
    loss.kind = LossKind::squared;
    loss.evaluate = [y](const Vector& eta) { return 0.5 * (y - eta).squaredNorm(); };
    loss.gradient = [y](const Vector& eta) -> Vector { return eta - y; };
    loss.lipschitz = static_cast<double>(p + 1);
    return loss;
}

LossSpec logistic_loss(const Vector& y, Index p) {
    LossSpec loss;
    loss.kind = LossKind::logistic;
    loss.evaluate = [y](const Vector& eta) {
        double total = 0.0;
        for (Index i = 0; i < eta.size(); ++i) total += softplus(eta[i]) - y[i] * eta[i];
        return total;
    };
    loss.gradient = [y](const Vector& eta) {
        Vector g(eta.size());
        for (Index i = 0; i < eta.size(); ++i) g[i] = expit(eta[i]) - y[i];
        return g;
    };
    loss.lipschitz = 0.25 * static_cast<double>(p + 1);
    return loss;
}

FeaturePenalty flam_penalty(const Permutation& ordering, double alpha) {
    FeaturePenalty pen;
    pen.prox = [&ordering, alpha](const Vector& v, double t) {
        return flam_block_prox(v, ordering, alpha * t, (1.0 - alpha) * t);
    };
    pen.value = [&ordering, alpha](const Vector& theta) {
        double tv = alpha > 0.0 ? ordered_differences(theta, ordering).lpNorm<1>() : 0.0;
        return alpha * tv + (1.0 - alpha) * theta.norm();
    };
    return pen;
}

void GgdConfig::validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("GgdConfig: tol must be > 0");
    if (max_iter < 1) throw InvalidArgument("GgdConfig: max_iter must be >= 1");
}

FlamFit ggd_solve(const LossSpec& loss, const std::vector<FeaturePenalty>& penalties, double lambda,
                  const FlamFit& init, const GgdConfig& config) {
    config.validate();
    if (!(lambda >= 0.0)) throw InvalidArgument("ggd_solve: lambda must be >= 0");
    if (penalties.size() != init.thetas.size()) {
        throw InvalidArgument("ggd_solve: one penalty per feature required");
    }
    if (init.thetas.empty()) throw InvalidArgument("ggd_solve: no features");
    const Index n = init.thetas.front().size();
    const double L = loss.lipschitz;
    const std::size_t p = penalties.size();

    FlamFit fit = init;
    fit.objective_trace.clear();
    fit.iterations = 0;
    fit.converged = false;
    fit.hit_cap = false;

    auto total = [&](const Vector& eta) {
        double pen = 0.0;
        for (std::size_t j = 0; j < p; ++j) pen += penalties[j].value(fit.thetas[j]);
        return loss.evaluate(eta) + lambda * pen;
    };
    auto note_cap = [&](const Vector& eta) {
        if (loss.kind == LossKind::logistic && eta.lpNorm<Eigen::Infinity>() > kExpitCap) fit.hit_cap = true;
    };

    Vector eta = linear_predictor(fit, n);
    note_cap(eta);
    double obj = total(eta);
    while (fit.iterations < config.max_iter) {
        const Vector g = loss.gradient(eta);
        fit.theta0 -= g.mean() / L;
        std::vector<double> shifts(p, 0.0);
        parallel_for(p, config.threads, [&](std::size_t j) {
            Vector step = penalties[j].prox(fit.thetas[j] - g / L, lambda / L);
            shifts[j] = centre_block(step);
            fit.thetas[j] = std::move(step);
        });
        for (double s : shifts) fit.theta0 += s;
        ++fit.iterations;
        eta = linear_predictor(fit, n);
        note_cap(eta);
        const double next = total(eta);
        if (!std::isfinite(next)) throw NumericFailure("ggd_solve: objective became non-finite");
        if (next > obj + 1e-10 * std::max(1.0, std::abs(obj))) {
            throw NumericFailure("ggd_solve: objective increased from " + std::to_string(obj) + " to " +
                                 std::to_string(next));
        }
        fit.objective_trace.push_back(next);
        if (config.on_iteration) config.on_iteration(fit.iterations, next);
        const double rel = (obj - next) / std::max(1.0, std::abs(obj));
        obj = next;
        if (rel < config.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.objective = obj;
    return fit;
}

void require_binary(const Vector& y) {
    for (Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw InvalidArgument("logistic response must be 0/1; row " + std::to_string(i + 1) + " has " +
                                  std::to_string(y[i]));
        }
    }
}

double logistic_objective(const Dataset& data, const PenaltySpec& penalty, const FlamFit& fit) {
    if (fit.p() != data.p()) throw InvalidArgument("logistic_objective: feature count mismatch");
    const LossSpec loss = logistic_loss(data.y(), data.p());
    double pen = 0.0;
    for (Index j = 0; j < data.p(); ++j) {
        pen += flam_penalty(data.ordering(j), penalty.alpha).value(fit.thetas[static_cast<std::size_t>(j)]);
    }
    return loss.evaluate(linear_predictor(fit, data.n())) + penalty.lambda * pen;
}

FlamFit logistic_flam(const Dataset& data, const PenaltySpec& penalty, const GgdConfig& config,
                      const FlamFit* warm_start) {
    penalty.validate();
    require_binary(data.y());
    FlamFit init;
    if (warm_start != nullptr) {
        if (warm_start->p() != data.p()) throw InvalidArgument("logistic_flam: warm start has the wrong p");
        init.theta0 = warm_start->theta0;
        init.thetas = warm_start->thetas;
    } else {
        const double ybar = data.y().mean();
        double start = 0.0;
        if (ybar <= 0.0) {
            start = -kExpitCap;
        } else if (ybar >= 1.0) {
            start = kExpitCap;
        } else {
            start = std::clamp(std::log(ybar / (1.0 - ybar)), -kExpitCap, kExpitCap);
        }
        init.theta0 = start;
        init.thetas.assign(static_cast<std::size_t>(data.p()), Vector::Zero(data.n()));
    }
    std::vector<FeaturePenalty> penalties;
    penalties.reserve(static_cast<std::size_t>(data.p()));
    for (Index j = 0; j < data.p(); ++j) penalties.push_back(flam_penalty(data.ordering(j), penalty.alpha));

    FlamFit fit = ggd_solve(logistic_loss(data.y(), data.p()), penalties, penalty.lambda, init, config);
    fit.penalty = penalty;
    finalize_fit(data, fit);
    fit.objective = logistic_objective(data, penalty, fit);
    return fit;
}

FitPath logistic_path(const Dataset& data, double alpha, std::span<const double> lambdas,
                      const GgdConfig& config) {
    if (lambdas.empty()) throw InvalidArgument("logistic_path: empty lambda grid");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0) || (i > 0 && !(lambdas[i] < lambdas[i - 1]))) {
            throw InvalidArgument("logistic_path: lambdas must be positive and strictly decreasing");
        }
    }
    FitPath path;
    path.alpha = alpha;
    path.lambdas.assign(lambdas.begin(), lambdas.end());
    for (double lambda : lambdas) {
        PenaltySpec pen;
        pen.lambda = lambda;
        pen.alpha = alpha;
        const FlamFit* warm = path.fits.empty() ? nullptr : &path.fits.back();
        path.fits.push_back(logistic_flam(data, pen, config, warm));
    }
    return path;
}

Vector predict_response(const FlamModel& model, const Matrix& X_new) {
    Vector eta = predict_linear(model, X_new);
    if (model.loss == LossKind::logistic) {
        eta = eta.unaryExpr([](double v) { return expit(v); });
    }
    return eta;
}

Vector predict_response(const FlamFit& fit, const Dataset& train, LossKind loss, const Matrix& X_new) {
    return predict_response(make_model(fit, train, loss), X_new);
}

}  // namespace flam
