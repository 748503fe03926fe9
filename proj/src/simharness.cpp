#include "flam/simharness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include "flam/csv.hpp"
#include "flam/errors.hpp"
#include "flam/fit.hpp"
#include "flam/glm.hpp"
#include "flam/inference.hpp"
#include "flam/modelsel.hpp"
#include "flam/parallel.hpp"

namespace flam::sim {

namespace {

using std::numbers::pi;

double piecewise(double x, std::initializer_list<double> cuts, std::initializer_list<double> levels) {
    std::size_t k = 0;
    for (double c : cuts) {
        if (x < c) break;
        ++k;
    }
    return *(levels.begin() + k);
}

// Breakpoints sit on multiples of 0.25 so the quadrature panels align with them.
double raw_piecewise(int j, double x) {
    switch (j) {
        case 0: return piecewise(x, {0.0}, {-1.0, 1.0});
        case 1: return piecewise(x, {-1.25, 0.75}, {-1.0, 1.0, -0.5});
        case 2: return piecewise(x, {-1.5, 0.5, 1.5}, {0.5, -1.0, 1.0, -0.5});
        default: return piecewise(x, {-2.0, -0.75, 0.25, 1.5}, {1.0, -0.5, 1.5, -1.0, 0.5});
    }
}

double raw_smooth(int j, double x) {
    switch (j) {
        case 0: return std::sin(2.0 * pi * x / 5.0);
        case 1: return std::cos(pi * x / 5.0);
        case 2: return std::sin(4.0 * pi * x / 5.0 + 0.5);
        default: return std::cos(3.0 * pi * x / 5.0) + 0.5 * std::sin(pi * x / 2.5);
    }
}

double raw_local(int j, double x) {
    const double k = 2.0 + j;
    if (j % 2 == 0) return x < 0.0 ? 0.0 : std::sin(k * pi * x);
    return x >= 0.0 ? 0.0 : std::sin(k * pi * x);
}

Function1d raw_function(int scenario, int j) {
    switch (scenario) {
        case 1: return [j](double x) { return raw_piecewise(j, x); };
        case 2: return [j](double x) { return raw_smooth(j, x); };
        case 3:
            if (j < 2) return [j](double x) { return raw_piecewise(j, x); };
            return [j](double x) { return raw_smooth(j - 2, x); };
        case 4: return [j](double x) { return raw_local(j, x); };
        default: throw InvalidArgument("unknown scenario " + std::to_string(scenario));
    }
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

int signal_count(int scenario) { return scenario == 0 ? 0 : 4; }

Matrix draw_covariates(std::mt19937_64& rng, Index n, int p) {
    std::uniform_real_distribution<double> unif(kDomainLo, kDomainHi);
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) X(i, j) = unif(rng);
    }
    return X;
}

Vector centred(const Vector& v) { return v.array() - v.mean(); }

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

void ScenarioSpec::validate() const {
    if (scenario < 0 || scenario > 4) {
        throw InvalidArgument("scenario must be 0-4, got " + std::to_string(scenario));
    }
    if (p_total < signal_count(scenario) || p_total < 1) {
        throw InvalidArgument("p_total must be at least the number of signal features");
    }
    if (n < 2) throw InvalidArgument("n must be >= 2");
    if (!(noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be >= 0");
}

double integrate(const Function1d& f, double lo, double hi, int panels) {
    static constexpr std::array<double, 5> nodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                 0.5384693101056831, 0.9061798459386640};
    static constexpr std::array<double, 5> weights{0.2369268850561891, 0.4786286704993665,
                                                   0.5688888888888889, 0.4786286704993665,
                                                   0.2369268850561891};
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double mid = lo + (k + 0.5) * h;
        for (std::size_t q = 0; q < nodes.size(); ++q) total += weights[q] * f(mid + 0.5 * h * nodes[q]);
    }
    return 0.5 * h * total;
}

Function1d signal_function(int scenario, int j) {
    if (scenario < 1 || scenario > 4) throw InvalidArgument("signal_function: scenario must be 1-4");
    if (j < 0 || j > 3) throw InvalidArgument("signal_function: j must be 0-3");
    Function1d raw = raw_function(scenario, j);
    const double width = kDomainHi - kDomainLo;
    const double shift = integrate(raw, kDomainLo, kDomainHi) / width;
    const double norm2 = integrate([&](double x) { return (raw(x) - shift) * (raw(x) - shift); }, kDomainLo, kDomainHi);
    const double scale = 1.0 / std::sqrt(norm2);
    return [raw, shift, scale](double x) { return (raw(x) - shift) * scale; };
}

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix(splitmix(base) ^ splitmix(index + 0x5851F42D4C957F2DULL));
}

SimDataset generate(const ScenarioSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    Matrix X = draw_covariates(rng, spec.n, spec.p_total);
    std::vector<Vector> truth(static_cast<std::size_t>(spec.p_total), Vector::Zero(spec.n));
    Vector mu = Vector::Zero(spec.n);
    for (int j = 0; j < signal_count(spec.scenario); ++j) {
        const Function1d f = signal_function(spec.scenario, j);
        for (Index i = 0; i < spec.n; ++i) truth[static_cast<std::size_t>(j)][i] = f(X(i, j));
        mu += truth[static_cast<std::size_t>(j)];
    }
    std::normal_distribution<double> normal;
    Vector y = mu;
    for (Index i = 0; i < spec.n; ++i) y[i] += spec.noise_sd * normal(rng);
    return SimDataset{Dataset(std::move(y), std::move(X)), std::move(mu), std::move(truth)};
}

SimDataset generate_logistic(const ScenarioSpec& spec) {
    if (spec.scenario < 1 || spec.scenario > 4) throw InvalidArgument("generate_logistic: scenario must be 1-4");
    if (spec.p_total < 2) throw InvalidArgument("generate_logistic: need at least 2 features");
    if (spec.n < 2) throw InvalidArgument("generate_logistic: n must be >= 2");
    std::mt19937_64 rng(spec.seed);
    Matrix X = draw_covariates(rng, spec.n, spec.p_total);
    std::vector<Vector> truth(static_cast<std::size_t>(spec.p_total), Vector::Zero(spec.n));
    Vector eta = Vector::Zero(spec.n);
    for (int j = 0; j < 2; ++j) {
        const Function1d f = signal_function(spec.scenario, j);
        for (Index i = 0; i < spec.n; ++i) truth[static_cast<std::size_t>(j)][i] = f(X(i, j));
        eta += truth[static_cast<std::size_t>(j)];
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector y(spec.n);
    Vector mu(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        mu[i] = expit(eta[i]);
        y[i] = unif(rng) < mu[i] ? 1.0 : 0.0;
    }
    return SimDataset{Dataset(std::move(y), std::move(X)), std::move(mu), std::move(truth)};
}

std::vector<ConsistencyRow> consistency_experiment(const ConsistencyConfig& config) {
    if (config.n_reps < 2) throw InvalidArgument("consistency_experiment: need at least 2 replicates");
    if (config.scenario < 0 || config.scenario > 4) throw InvalidArgument("consistency_experiment: scenario must be 0-4");
    std::vector<ConsistencyRow> rows;
    for (Index n : config.n_grid) {
        ConsistencyRow row;
        row.n = n;
        const double np = static_cast<double>(n - 1) * config.p;
        row.lambda = 2.0 * config.sigma * std::sqrt(std::log(np) / static_cast<double>(n));
        row.failure_bound = 2.0 / np + 1.0 / static_cast<double>(n);

        const auto reps = static_cast<std::size_t>(config.n_reps);
        std::vector<double> error(reps);
        std::vector<int> violated(reps);
        std::vector<int> sparse(reps);
        parallel_for(reps, config.threads, [&](std::size_t r) {
            ScenarioSpec spec;
            spec.scenario = config.scenario;
            spec.p_total = config.p;
            spec.n = n;
            spec.noise_sd = config.sigma;
            spec.seed = stream_seed(stream_seed(config.seed, static_cast<std::uint64_t>(n)), r);
            const SimDataset sim = generate(spec);
            PenaltySpec pen;
            pen.alpha = config.alpha;
            pen.lambda = row.lambda * static_cast<double>(n);
            const FlamFit fit = flam_bcd(sim.data, pen, FitConfig{});
            sparse[r] = fit.active_features.empty() ? 1 : 0;

            Vector diff = Vector::Zero(n);
            double rhs = 0.0;
            for (int j = 0; j < config.p; ++j) {
                const Vector truth = centred(sim.truth[static_cast<std::size_t>(j)]);
                diff += fit.thetas[static_cast<std::size_t>(j)] - truth;
                rhs += config.alpha * ordered_differences(truth, sim.data.ordering(j)).lpNorm<1>() +
                       (1.0 - config.alpha) * truth.norm();
            }
            error[r] = diff.squaredNorm() / static_cast<double>(n);
            violated[r] = error[r] > 3.0 * row.lambda * rhs ? 1 : 0;
        });
        double count = 0.0;
        for (int v : violated) count += v;
        row.violation_rate = count / static_cast<double>(reps);
        double none = 0.0;
        for (int s : sparse) none += s;
        row.sparse_rate = none / static_cast<double>(reps);
        row.binomial_se = std::sqrt(row.failure_bound * (1.0 - row.failure_bound) / static_cast<double>(reps));
        row.mean_error = mean_of(error);
        row.error_se = se_of(error);
        rows.push_back(row);
    }
    return rows;
}

ScenarioExperiment scenario_experiment(const ScenarioExperimentConfig& config) {
    if (config.n_reps < 1) throw InvalidArgument("scenario_experiment: need at least 1 replicate");
    if (config.alphas.empty()) throw InvalidArgument("scenario_experiment: no alpha values");
    const auto reps = static_cast<std::size_t>(config.n_reps);
    const std::size_t n_alpha = config.alphas.size();
    std::vector<std::vector<ScenarioRecord>> per_rep(reps);

    parallel_for(reps, config.threads, [&](std::size_t r) {
        ScenarioSpec spec;
        spec.scenario = config.scenario;
        spec.p_total = config.p_total;
        spec.n = config.n;
        spec.noise_sd = config.sigma;
        spec.seed = stream_seed(config.seed, 3 * r);
        const SimDataset train = generate(spec);
        spec.seed = stream_seed(config.seed, 3 * r + 1);
        const SimDataset test = generate(spec);
        spec.seed = stream_seed(config.seed, 3 * r + 2);
        const SimDataset validation = generate(spec);

        for (double alpha : config.alphas) {
            double top = lambda_sparse_threshold(train.data, alpha);
            if (top == 0.0) top = 1.0;
            const auto grid = lambda_grid(top, config.n_lambda, config.lambda_min_ratio);
            const FitPath path = flam_path(train.data, alpha, std::span<const double>(grid));
            for (std::size_t l = 0; l < grid.size(); ++l) {
                const FlamFit& fit = path.fits[l];
                const FlamModel model = make_model(fit, train.data, LossKind::squared);
                ScenarioRecord rec;
                rec.replicate = static_cast<int>(r);
                rec.alpha = alpha;
                rec.lambda = grid[l];
                rec.test_mse = mse(test.data.y(), predict_linear(model, test.data.X()));
                rec.validation_mse = mse(validation.data.y(), predict_linear(model, validation.data.X()));
                rec.df = df_flam(fit, train.data).df;
                rec.active = static_cast<Index>(fit.active_features.size());
                for (std::size_t j = 0; j < fit.thetas.size(); ++j) {
                    rec.parameter_fit += (centred(train.truth[j]) - fit.thetas[j]).squaredNorm();
                }
                per_rep[r].push_back(rec);
            }
        }
    });

    ScenarioExperiment out;
    for (auto& rows : per_rep) out.records.insert(out.records.end(), rows.begin(), rows.end());

    for (std::size_t a = 0; a < n_alpha; ++a) {
        std::vector<double> test;
        std::vector<double> val;
        std::vector<double> df;
        std::vector<double> active;
        for (const auto& rows : per_rep) {
            const ScenarioRecord* best = nullptr;
            for (const auto& rec : rows) {
                if (rec.alpha != config.alphas[a]) continue;
                if (best == nullptr || rec.test_mse < best->test_mse) best = &rec;
            }
            test.push_back(best->test_mse);
            val.push_back(best->validation_mse);
            df.push_back(best->df);
            active.push_back(static_cast<double>(best->active));
        }
        AlphaSummary s;
        s.alpha = config.alphas[a];
        s.mean_test_mse = mean_of(test);
        s.se_test_mse = se_of(test);
        s.mean_validation_mse = mean_of(val);
        s.se_validation_mse = se_of(val);
        s.mean_df = mean_of(df);
        s.mean_active = mean_of(active);
        out.summaries.push_back(s);
    }
    return out;
}

void write_records_csv(std::ostream& out, const std::vector<ScenarioRecord>& records) {
    csv::write_row(out, std::vector<std::string>{"replicate", "alpha", "lambda", "test_mse", "validation_mse", "df",
                                                 "active", "parameter_fit"});
    for (const auto& r : records) {
        csv::write_row(out, std::vector<double>{static_cast<double>(r.replicate), r.alpha, r.lambda, r.test_mse,
                                                r.validation_mse, r.df, static_cast<double>(r.active),
                                                r.parameter_fit});
    }
}

void write_consistency_csv(std::ostream& out, const std::vector<ConsistencyRow>& rows) {
    csv::write_row(out, std::vector<std::string>{"n", "lambda", "violation_rate", "failure_bound", "binomial_se",
                                                 "mean_error", "error_se", "sparse_rate"});
    for (const auto& r : rows) {
        csv::write_row(out, std::vector<double>{static_cast<double>(r.n), r.lambda, r.violation_rate,
                                                r.failure_bound, r.binomial_se, r.mean_error, r.error_se,
                                                r.sparse_rate});
    }
}

}  // namespace flam::sim
