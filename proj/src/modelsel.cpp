#include "flam/modelsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "flam/errors.hpp"
#include "flam/glm.hpp"
#include "flam/parallel.hpp"

namespace flam {

double max_partial_sum(const Vector& a) {
    double run = 0.0;
    double best = 0.0;
    for (Index k = 0; k + 1 < a.size(); ++k) {
        run += a[k];
        best = std::max(best, std::abs(run));
    }
    return best;
}

double lambda_sparse_threshold(const Dataset& data, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidArgument("lambda_sparse_threshold: alpha must lie in [0, 1]");
    }
    Vector centred = data.y().array() - data.y().mean();
    const double scale = std::max(1.0, data.y().lpNorm<Eigen::Infinity>());
    if (centred.lpNorm<Eigen::Infinity>() <= 1e-14 * scale) {
        return 0.0;
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    double fuse_bound = inf;
    if (alpha > 0.0) {
        double g = 0.0;
        for (Index j = 0; j < data.p(); ++j) {
            g = std::max(g, max_partial_sum(apply_ordering(centred, data.ordering(j))));
        }
        fuse_bound = g / alpha;
    }
    const double group_bound = alpha < 1.0 ? centred.norm() / (1.0 - alpha) : inf;
    return std::min(fuse_bound, group_bound);
}

std::vector<StepFunction> step_functions(const FlamFit& fit, const Dataset& data) {
    if (fit.p() != data.p()) {
        throw InvalidArgument("step_functions: fit and data feature counts differ");
    }
    std::vector<StepFunction> out(static_cast<std::size_t>(data.p()));
    for (Index j = 0; j < data.p(); ++j) {
        const auto& ord = data.ordering(j);
        const Vector& theta = fit.thetas[static_cast<std::size_t>(j)];
        StepFunction& f = out[static_cast<std::size_t>(j)];
        f.domain_lo = data.X()(ord.front(), j);
        f.domain_hi = data.X()(ord.back(), j);

        std::vector<double> values;
        std::vector<double> levels;
        for (std::size_t k = 0; k < ord.size();) {
            const double x = data.X()(ord[k], j);
            std::size_t end = k;
            double sum = 0.0;
            while (end < ord.size() && data.X()(ord[end], j) == x) {
                sum += theta[ord[end]];
                ++end;
            }
            values.push_back(x);
            levels.push_back(sum / static_cast<double>(end - k));
            k = end;
        }
        f.levels.push_back(levels.front());
        for (std::size_t g = 1; g < levels.size(); ++g) {
            if (std::abs(levels[g] - f.levels.back()) > kZeroThreshold) {
                f.knots.push_back(0.5 * (values[g - 1] + values[g]));
                f.levels.push_back(levels[g]);
            } else {
                // Keep the latest group value so long constant runs do not drift.
                f.levels.back() = levels[g];
            }
        }
    }
    return out;
}

FlamModel make_model(const FlamFit& fit, const Dataset& data, LossKind loss,
                     std::vector<std::string> feature_names, std::string response_name) {
    FlamModel model;
    model.theta0 = fit.theta0;
    model.components = step_functions(fit, data);
    model.loss = loss;
    model.penalty = fit.penalty;
    if (feature_names.empty()) {
        for (Index j = 0; j < data.p(); ++j) feature_names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Index>(feature_names.size()) != data.p()) {
        throw InvalidArgument("make_model: one name per feature required");
    }
    model.feature_names = std::move(feature_names);
    model.response_name = std::move(response_name);
    model.iterations = fit.iterations;
    model.converged = fit.converged;
    model.hit_cap = fit.hit_cap;
    model.objective = fit.objective;
    return model;
}

Vector predict_linear(const FlamModel& model, const Matrix& X) {
    if (X.cols() != model.p()) {
        throw InvalidArgument("predict: model has " + std::to_string(model.p()) + " features, data has " +
                              std::to_string(X.cols()));
    }
    Vector eta = Vector::Constant(X.rows(), model.theta0);
    for (Index j = 0; j < model.p(); ++j) {
        const StepFunction& f = model.components[static_cast<std::size_t>(j)];
        for (Index i = 0; i < X.rows(); ++i) eta[i] += f(X(i, j));
    }
    return eta;
}

double mse(const Vector& y, const Vector& y_hat) {
    if (y.size() != y_hat.size()) throw InvalidArgument("mse: length mismatch");
    if (y.size() == 0) throw InvalidArgument("mse: empty input");
    return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

double mean_deviance(const Vector& y, const Vector& prob) {
    if (y.size() != prob.size()) throw InvalidArgument("mean_deviance: length mismatch");
    if (y.size() == 0) throw InvalidArgument("mean_deviance: empty input");
    double total = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double q = std::clamp(prob[i], 1e-15, 1.0 - 1e-15);
        total += y[i] * std::log(q) + (1.0 - y[i]) * std::log1p(-q);
    }
    return -2.0 * total / static_cast<double>(y.size());
}

double misclassification(const Vector& y, const Vector& prob) {
    if (y.size() != prob.size()) throw InvalidArgument("misclassification: length mismatch");
    if (y.size() == 0) throw InvalidArgument("misclassification: empty input");
    Index wrong = 0;
    for (Index i = 0; i < y.size(); ++i) {
        if ((prob[i] > 0.5 ? 1.0 : 0.0) != y[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(y.size());
}

std::vector<int> assign_folds(Index n, int k_folds, std::uint64_t seed) {
    if (k_folds < 2) throw InvalidArgument("assign_folds: need at least 2 folds");
    if (n < k_folds) throw InvalidArgument("assign_folds: more folds than observations");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    // Fisher-Yates by hand: std::shuffle's draw sequence is library-specific.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t r = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[r]);
    }
    std::vector<int> folds(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        folds[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));
    }
    return folds;
}

CvResult cross_validate(const Dataset& data, double alpha, int k_folds, std::span<const double> lambdas,
                        LossKind loss, std::uint64_t seed, const CvOptions& options) {
    if (lambdas.empty()) throw InvalidArgument("cross_validate: empty lambda grid");
    if (loss == LossKind::logistic) require_binary(data.y());
    CvResult result;
    result.lambdas.assign(lambdas.begin(), lambdas.end());
    result.folds = assign_folds(data.n(), k_folds, seed);

    std::vector<std::vector<Index>> train(static_cast<std::size_t>(k_folds));
    std::vector<std::vector<Index>> held(static_cast<std::size_t>(k_folds));
    for (Index i = 0; i < data.n(); ++i) {
        const int f = result.folds[static_cast<std::size_t>(i)];
        for (int g = 0; g < k_folds; ++g) {
            (g == f ? held : train)[static_cast<std::size_t>(g)].push_back(i);
        }
    }
    for (int g = 0; g < k_folds; ++g) {
        if (train[static_cast<std::size_t>(g)].size() < 2 || held[static_cast<std::size_t>(g)].empty()) {
            throw InvalidArgument("cross_validate: fold " + std::to_string(g + 1) +
                                  " leaves fewer than 2 training rows or no held-out rows");
        }
    }

    const std::size_t m = lambdas.size();
    const auto k = static_cast<std::size_t>(k_folds);
    std::vector<std::vector<double>> fold_loss(k, std::vector<double>(m));
    std::vector<std::vector<double>> fold_miss(k, std::vector<double>(m));

    parallel_for(k, options.threads, [&](std::size_t g) {
        const Dataset tr = data.subset(train[g]);
        const auto rows = static_cast<Index>(held[g].size());
        Matrix te_X(rows, data.p());
        Vector te_y(rows);
        for (Index r = 0; r < rows; ++r) {
            const Index i = held[g][static_cast<std::size_t>(r)];
            te_X.row(r) = data.X().row(i);
            te_y[r] = data.y()[i];
        }
        FitPath path;
        if (loss == LossKind::squared) {
            path = flam_path(tr, alpha, lambdas, options.fit);
        } else {
            GgdConfig cfg;
            cfg.tol = options.logistic_tol;
            cfg.max_iter = options.logistic_max_iter;
            path = logistic_path(tr, alpha, lambdas, cfg);
        }
        for (std::size_t l = 0; l < m; ++l) {
            const Vector pred = predict_response(path.fits[l], tr, loss, te_X);
            if (loss == LossKind::squared) {
                fold_loss[g][l] = mse(te_y, pred);
            } else {
                fold_loss[g][l] = mean_deviance(te_y, pred);
                fold_miss[g][l] = misclassification(te_y, pred);
            }
        }
    });

    result.mean_loss.assign(m, 0.0);
    result.se_loss.assign(m, 0.0);
    if (loss == LossKind::logistic) result.mean_misclassification.assign(m, 0.0);
    const double kd = static_cast<double>(k);
    for (std::size_t l = 0; l < m; ++l) {
        double sum = 0.0;
        double miss = 0.0;
        for (std::size_t g = 0; g < k; ++g) {
            sum += fold_loss[g][l];
            miss += fold_miss[g][l];
        }
        const double mean = sum / kd;
        double ss = 0.0;
        for (std::size_t g = 0; g < k; ++g) ss += (fold_loss[g][l] - mean) * (fold_loss[g][l] - mean);
        result.mean_loss[l] = mean;
        result.se_loss[l] = std::sqrt(ss / (kd - 1.0) / kd);
        if (loss == LossKind::logistic) result.mean_misclassification[l] = miss / kd;
    }
    // Strict improvement only, so equal losses keep the earlier, larger lambda.
    for (std::size_t l = 1; l < m; ++l) {
        if (result.mean_loss[l] < result.mean_loss[result.chosen_index]) result.chosen_index = l;
    }
    result.chosen_lambda = result.lambdas[result.chosen_index];
    return result;
}

}  // namespace flam
