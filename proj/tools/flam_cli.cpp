#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flam/csv.hpp"
#include "flam/errors.hpp"
#include "flam/fit.hpp"
#include "flam/glm.hpp"
#include "flam/inference.hpp"
#include "flam/model_io.hpp"
#include "flam/modelsel.hpp"
#include "flam/simharness.hpp"

namespace {

using namespace flam;

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumeric = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataSource {
    std::string path;
    std::string response;
    std::vector<std::string> features;
};

struct Loaded {
    Dataset data;
    std::vector<std::string> features;
};

Loaded load_data(const DataSource& src) {
    const csv::Table table = csv::read_file(src.path);
    if (!table.has_column(src.response)) {
        throw DataError(src.path + ": response column '" + src.response + "' not found");
    }
    std::vector<std::string> features = src.features;
    if (features.empty()) {
        for (const auto& h : table.header) {
            if (h != src.response) features.push_back(h);
        }
    }
    if (features.empty()) throw DataError(src.path + ": no feature columns");
    if (table.rows.size() < 2) throw DataError(src.path + ": need at least 2 data rows");
    return Loaded{csv::to_dataset(table, src.response, features), features};
}

LossKind parse_loss(const std::string& name) {
    if (name == "squared") return LossKind::squared;
    if (name == "logistic") return LossKind::logistic;
    throw UsageError("--loss must be 'squared' or 'logistic'");
}

// Output stream that is stdout for "-" or an empty path.
class Output {
public:
    explicit Output(const std::string& path) : path_(path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw IoError("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void finish() {
        stream().flush();
        if (!stream()) throw IoError("write to '" + (path_.empty() ? std::string("stdout") : path_) + "' failed");
    }

private:
    std::string path_;
    std::ofstream file_;
};

FlamFit fit_one(const Dataset& data, LossKind loss, const PenaltySpec& pen, const FlamFit* warm = nullptr) {
    return loss == LossKind::squared ? flam_bcd(data, pen, FitConfig{}, warm) : logistic_flam(data, pen, GgdConfig{}, warm);
}

FitPath fit_path(const Dataset& data, LossKind loss, double alpha, std::span<const double> grid) {
    return loss == LossKind::squared ? flam_path(data, alpha, grid) : logistic_path(data, alpha, grid);
}

std::vector<double> default_grid(const Dataset& data, double alpha, int n_lambda, double ratio) {
    double top = lambda_sparse_threshold(data, alpha);
    if (top == 0.0) top = 1.0;
    return lambda_grid(top, n_lambda, ratio);
}

// Rebuilds in-sample fitted blocks from a model evaluated at the rows of `data`.
FlamFit fit_from_model(const FlamModel& model, const Dataset& data) {
    if (model.p() != data.p()) throw DataError("model and data have different feature counts");
    FlamFit fit;
    fit.theta0 = model.theta0;
    fit.penalty = model.penalty;
    for (Index j = 0; j < data.p(); ++j) {
        const StepFunction& f = model.components[static_cast<std::size_t>(j)];
        Vector t(data.n());
        for (Index i = 0; i < data.n(); ++i) t[i] = f(data.X()(i, j));
        fit.thetas.push_back(std::move(t));
    }
    finalize_fit(data, fit);
    return fit;
}

void report(std::ostream& out, const FlamFit& fit, const Dataset& data, const std::vector<std::string>& names,
            LossKind loss, double threshold) {
    out << "lambda: " << csv::format_number(fit.penalty.lambda) << "\n";
    out << "alpha: " << csv::format_number(fit.penalty.alpha) << "\n";
    out << "sparsity threshold: " << csv::format_number(threshold) << "\n";
    out << "objective: " << csv::format_number(fit.objective) << "\n";
    out << "iterations: " << fit.iterations << (fit.converged ? " (converged)" : " (not converged)") << "\n";
    if (loss == LossKind::logistic && fit.hit_cap) out << "warning: linear predictor reached the expit cap\n";
    out << fit.active_features.size() << " active features of " << data.p() << "\n";
    for (Index j = 0; j < data.p(); ++j) {
        Index knots = 0;
        for (Index k = 0; k < fit.betas[static_cast<std::size_t>(j)].size(); ++k) {
            if (std::abs(fit.betas[static_cast<std::size_t>(j)][k]) > kZeroThreshold) ++knots;
        }
        out << "  " << names[static_cast<std::size_t>(j)] << ": " << knots << " knots\n";
    }
    if (loss == LossKind::squared) out << "df: " << csv::format_number(df_flam(fit, data).df) << "\n";
}

std::vector<std::string> split_names(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int threads_from_env(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("FLAM_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
        throw UsageError("FLAM_THREADS must be a positive integer");
    }
    return 1;
}

const FlamModel& pick(const io::ModelFile& file, int index) {
    const int count = static_cast<int>(file.models.size());
    const int i = index < 0 ? count + index : index;
    if (i < 0 || i >= count) {
        throw UsageError("--fit-index " + std::to_string(index) + " out of range (file has " + std::to_string(count) +
                         " fits)");
    }
    return file.models[static_cast<std::size_t>(i)];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fused lasso additive models: fitting, selection and simulation"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "Worker threads (default: FLAM_THREADS or 1)")->check(CLI::PositiveNumber);

    DataSource src;
    std::string features_list;
    std::string loss_name = "squared";
    double alpha = 1.0;
    std::optional<double> lambda;
    int n_lambda = 50;
    double ratio = 1e-3;
    std::string model_path;
    std::string out_path;
    int fit_index = -1;
    std::uint64_t seed = 0;

    auto add_data = [&](CLI::App* cmd, bool required) {
        auto* d = cmd->add_option("--data", src.path, "Input CSV with a header row");
        if (required) d->required();
        cmd->add_option("--response", src.response, "Response column name")->required();
        cmd->add_option("--features", features_list, "Comma-separated feature columns (default: all others)");
    };
    auto add_grid = [&](CLI::App* cmd) {
        cmd->add_option("--nlambda", n_lambda, "Grid size")->check(CLI::Range(2, 100000));
        cmd->add_option("--lambda-min-ratio", ratio, "Smallest lambda as a fraction of the threshold");
    };

    auto* fit_cmd = app.add_subcommand("fit", "Fit at one lambda or over a path and save the model");
    add_data(fit_cmd, true);
    fit_cmd->add_option("--loss", loss_name, "squared or logistic");
    fit_cmd->add_option("--alpha", alpha, "Fusion share of the penalty, in [0, 1]");
    fit_cmd->add_option("--lambda", lambda, "Single penalty level (default: a path)");
    add_grid(fit_cmd);
    fit_cmd->add_option("--model", model_path, "Output model JSON")->required();
    fit_cmd->add_option("--report", out_path, "Report file (default: stdout)");

    int folds = 10;
    std::string refit_path;
    auto* cv_cmd = app.add_subcommand("cv", "K-fold cross-validation over a lambda grid");
    add_data(cv_cmd, true);
    cv_cmd->add_option("--loss", loss_name, "squared or logistic");
    cv_cmd->add_option("--alpha", alpha, "Fusion share of the penalty, in [0, 1]");
    add_grid(cv_cmd);
    cv_cmd->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000000));
    cv_cmd->add_option("--seed", seed, "Fold assignment seed")->required();
    cv_cmd->add_option("--out", out_path, "CV curve CSV (default: stdout)");
    cv_cmd->add_option("--model", refit_path, "Also save the full-data fit at the chosen lambda");

    auto* predict_cmd = app.add_subcommand("predict", "Predict from a saved model");
    predict_cmd->add_option("--model", model_path, "Model JSON")->required();
    predict_cmd->add_option("--data", src.path, "CSV with the model's feature columns")->required();
    predict_cmd->add_option("--fit-index", fit_index, "Fit to use for path files (negative counts from the end)");
    predict_cmd->add_option("--out", out_path, "Output CSV (default: stdout)");

    std::string experiment = "data";
    sim::ScenarioSpec spec;
    int reps = 100;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate data or run a simulation experiment");
    sim_cmd->add_option("--experiment", experiment, "data, scenario or consistency")
        ->check(CLI::IsMember({"data", "scenario", "consistency"}));
    sim_cmd->add_option("--scenario", spec.scenario, "Scenario id 0-4");
    sim_cmd->add_option("--n", spec.n, "Observations per set");
    sim_cmd->add_option("--p", spec.p_total, "Total features");
    sim_cmd->add_option("--sigma", spec.noise_sd, "Noise standard deviation");
    sim_cmd->add_option("--reps", reps, "Replicates")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "Base seed");
    sim_cmd->add_option("--nlambda", n_lambda, "Grid size for the scenario experiment");
    sim_cmd->add_option("--out", out_path, "Output CSV (default: stdout)");

    int mc_reps = 0;
    auto* df_cmd = app.add_subcommand("df", "Degrees of freedom of a fit");
    df_cmd->add_option("--data", src.path, "Training CSV");
    df_cmd->add_option("--response", src.response, "Response column name");
    df_cmd->add_option("--features", features_list, "Comma-separated feature columns");
    df_cmd->add_option("--model", model_path, "Model JSON fit on --data (instead of --lambda)");
    df_cmd->add_option("--fit-index", fit_index, "Fit to use for path files");
    df_cmd->add_option("--alpha", alpha, "Fusion share of the penalty");
    df_cmd->add_option("--lambda", lambda, "Penalty level");
    df_cmd->add_option("--mc-reps", mc_reps, "Monte-Carlo replicates on a simulated scenario");
    df_cmd->add_option("--scenario", spec.scenario, "Scenario id for --mc-reps");
    df_cmd->add_option("--n", spec.n, "Observations for --mc-reps");
    df_cmd->add_option("--p", spec.p_total, "Features for --mc-reps");
    df_cmd->add_option("--sigma", spec.noise_sd, "Noise level for --mc-reps");
    df_cmd->add_option("--seed", seed, "Seed for --mc-reps");

    auto* lmax_cmd = app.add_subcommand("lambda-max", "Smallest lambda giving an all-zero fit");
    add_data(lmax_cmd, true);
    lmax_cmd->add_option("--alpha", alpha, "Fusion share of the penalty, in [0, 1]");

    double delta = 1e-6;
    auto* plot_cmd = app.add_subcommand("export-plot", "Long-format CSV of the fitted step functions");
    plot_cmd->add_option("--model", model_path, "Model JSON")->required();
    plot_cmd->add_option("--fit-index", fit_index, "Fit to use for path files");
    plot_cmd->add_option("--delta", delta, "Offset either side of each knot")->check(CLI::PositiveNumber);
    plot_cmd->add_option("--out", out_path, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        const int threads = threads_from_env(threads_flag);
        src.features = split_names(features_list);
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
        if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("--lambda-min-ratio must lie in (0, 1)");

        if (fit_cmd->parsed()) {
            const LossKind loss = parse_loss(loss_name);
            const Loaded in = load_data(src);
            if (loss == LossKind::logistic) require_binary(in.data.y());
            const double threshold = lambda_sparse_threshold(in.data, alpha);
            io::ModelFile file;
            Output out(out_path);
            if (lambda) {
                if (!(*lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
                PenaltySpec pen;
                pen.lambda = *lambda;
                pen.alpha = alpha;
                const FlamFit fit = fit_one(in.data, loss, pen);
                file.models.push_back(make_model(fit, in.data, loss, in.features, src.response));
                report(out.stream(), fit, in.data, in.features, loss, threshold);
            } else {
                const auto grid = default_grid(in.data, alpha, n_lambda, ratio);
                const FitPath path = fit_path(in.data, loss, alpha, grid);
                for (std::size_t l = 0; l < path.fits.size(); ++l) {
                    file.models.push_back(make_model(path.fits[l], in.data, loss, in.features, src.response));
                    out.stream() << "# fit " << l << "\n";
                    report(out.stream(), path.fits[l], in.data, in.features, loss, threshold);
                }
            }
            io::save(model_path, file);
            out.finish();
        } else if (cv_cmd->parsed()) {
            const LossKind loss = parse_loss(loss_name);
            const Loaded in = load_data(src);
            const auto grid = default_grid(in.data, alpha, n_lambda, ratio);
            CvOptions opts;
            opts.threads = threads;
            const CvResult cv = cross_validate(in.data, alpha, folds, grid, loss, seed, opts);
            Output out(out_path);
            std::vector<std::string> head{"lambda", "mean_loss", "se_loss"};
            if (loss == LossKind::logistic) head.push_back("misclassification");
            csv::write_row(out.stream(), head);
            for (std::size_t l = 0; l < grid.size(); ++l) {
                std::vector<double> row{cv.lambdas[l], cv.mean_loss[l], cv.se_loss[l]};
                if (loss == LossKind::logistic) row.push_back(cv.mean_misclassification[l]);
                csv::write_row(out.stream(), row);
            }
            out.finish();
            std::cerr << "chosen lambda: " << csv::format_number(cv.chosen_lambda) << " (index " << cv.chosen_index
                      << ")\n";
            if (!refit_path.empty()) {
                PenaltySpec pen;
                pen.lambda = cv.chosen_lambda;
                pen.alpha = alpha;
                io::ModelFile file;
                file.models.push_back(make_model(fit_one(in.data, loss, pen), in.data, loss, in.features, src.response));
                io::save(refit_path, file);
            }
        } else if (predict_cmd->parsed()) {
            const io::ModelFile file = io::load(model_path);
            const FlamModel& model = pick(file, fit_index);
            const csv::Table table = csv::read_file(src.path);
            const Matrix X = csv::to_matrix(table, model.feature_names);
            const Vector eta = predict_linear(model, X);
            Output out(out_path);
            if (model.loss == LossKind::logistic) {
                csv::write_row(out.stream(), std::vector<std::string>{"prediction", "probability"});
                for (Index i = 0; i < eta.size(); ++i) {
                    csv::write_row(out.stream(), std::vector<double>{eta[i], expit(eta[i])});
                }
            } else {
                csv::write_row(out.stream(), std::vector<std::string>{"prediction"});
                for (Index i = 0; i < eta.size(); ++i) csv::write_row(out.stream(), std::vector<double>{eta[i]});
            }
            out.finish();
        } else if (sim_cmd->parsed()) {
            if (spec.scenario < 0 || spec.scenario > 4) throw UsageError("--scenario must be 0-4");
            Output out(out_path);
            if (experiment == "data") {
                spec.seed = seed;
                const sim::SimDataset d = sim::generate(spec);
                std::vector<std::string> head;
                for (Index j = 0; j < d.data.p(); ++j) head.push_back("x" + std::to_string(j + 1));
                head.push_back("y");
                csv::write_row(out.stream(), head);
                for (Index i = 0; i < d.data.n(); ++i) {
                    std::vector<double> row;
                    for (Index j = 0; j < d.data.p(); ++j) row.push_back(d.data.X()(i, j));
                    row.push_back(d.data.y()[i]);
                    csv::write_row(out.stream(), row);
                }
            } else if (experiment == "scenario") {
                if (spec.scenario == 0) throw UsageError("the scenario experiment needs --scenario 1-4");
                sim::ScenarioExperimentConfig cfg;
                cfg.scenario = spec.scenario;
                cfg.p_total = spec.p_total;
                cfg.n = spec.n;
                cfg.sigma = spec.noise_sd;
                cfg.n_reps = reps;
                cfg.seed = seed;
                cfg.threads = threads;
                cfg.n_lambda = n_lambda;
                const auto result = sim::scenario_experiment(cfg);
                sim::write_records_csv(out.stream(), result.records);
            } else {
                if (spec.scenario == 0) throw UsageError("the consistency experiment needs --scenario 1-4");
                sim::ConsistencyConfig cfg;
                cfg.scenario = spec.scenario;
                cfg.p = spec.p_total;
                cfg.sigma = spec.noise_sd;
                cfg.n_reps = reps;
                cfg.seed = seed;
                cfg.threads = threads;
                sim::write_consistency_csv(out.stream(), sim::consistency_experiment(cfg));
            }
            out.finish();
        } else if (df_cmd->parsed()) {
            PenaltySpec pen;
            pen.alpha = alpha;
            if (mc_reps > 0) {
                if (spec.scenario < 0 || spec.scenario > 4) throw UsageError("--scenario must be 0-4");
                if (!lambda) throw UsageError("--mc-reps needs --lambda");
                pen.lambda = *lambda;
                spec.seed = seed;
                const sim::SimDataset base = sim::generate(spec);
                std::vector<double> estimates(static_cast<std::size_t>(mc_reps));
                const auto mc = df_monte_carlo(
                    base.mu, spec.noise_sd,
                    [&](const Vector& y, std::size_t r) {
                        const Dataset d(y, base.data.X());
                        const FlamFit fit = flam_bcd(d, pen);
                        estimates[r] = df_flam(fit, d).df;
                        return fit.fitted();
                    },
                    mc_reps, seed, threads);
                double mean_est = 0.0;
                for (double e : estimates) mean_est += e / mc_reps;
                std::cout << "df_estimate_mean: " << csv::format_number(mean_est) << "\n";
                std::cout << "df_monte_carlo: " << csv::format_number(mc.mean) << "\n";
                std::cout << "df_monte_carlo_se: " << csv::format_number(mc.se) << "\n";
            } else {
                if (src.path.empty() || src.response.empty()) throw UsageError("df needs --data and --response");
                const Loaded in = load_data(src);
                FlamFit fit;
                if (!model_path.empty()) {
                    const io::ModelFile file = io::load(model_path);
                    fit = fit_from_model(pick(file, fit_index), in.data);
                } else {
                    if (!lambda) throw UsageError("df needs --model or --lambda");
                    pen.lambda = *lambda;
                    fit = flam_bcd(in.data, pen);
                }
                std::cout << csv::format_number(df_flam(fit, in.data).df) << "\n";
            }
        } else if (lmax_cmd->parsed()) {
            const Loaded in = load_data(src);
            std::cout << csv::format_number(lambda_sparse_threshold(in.data, alpha)) << "\n";
        } else if (plot_cmd->parsed()) {
            const io::ModelFile file = io::load(model_path);
            const FlamModel& model = pick(file, fit_index);
            Output out(out_path);
            csv::write_row(out.stream(), std::vector<std::string>{"feature", "x", "level"});
            for (Index j = 0; j < model.p(); ++j) {
                const StepFunction& f = model.components[static_cast<std::size_t>(j)];
                std::vector<double> xs{f.domain_lo};
                for (double k : f.knots) {
                    xs.push_back(k - delta);
                    xs.push_back(k + delta);
                }
                xs.push_back(f.domain_hi);
                for (double x : xs) {
                    out.stream() << model.feature_names[static_cast<std::size_t>(j)] << ',' << csv::format_number(x)
                                 << ',' << csv::format_number(f(x)) << '\n';
                }
            }
            out.finish();
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kData;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const PreconditionViolation& e) {
        std::cerr << "precondition violated: " << e.what() << "\n";
        return kNumeric;
    }
    return 0;
}
