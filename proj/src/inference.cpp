#include "flam/inference.hpp"

#include <cmath>
#include <random>

#include "flam/errors.hpp"
#include "flam/parallel.hpp"

namespace flam {

ActiveSetDecomposition decompose_active_set(const FlamFit& fit, const Dataset& data) {
    if (fit.p() != data.p()) throw InvalidArgument("decompose_active_set: feature count mismatch");
    const Index n = data.n();
    ActiveSetDecomposition dec;
    dec.per_feature.resize(static_cast<std::size_t>(data.p()));
    Index total = 0;
    for (Index j = 0; j < data.p(); ++j) {
        const Vector beta = ordered_differences(fit.thetas[static_cast<std::size_t>(j)], data.ordering(j));
        auto& set = dec.per_feature[static_cast<std::size_t>(j)];
        for (Index k = 0; k < beta.size(); ++k) {
            if (std::abs(beta[k]) > kZeroThreshold) set.push_back(k);
        }
        if (!set.empty()) {
            dec.features.push_back(j);
            total += static_cast<Index>(set.size());
        }
    }
    dec.V = Matrix::Zero(n, total);
    dec.S2 = Matrix::Zero(total, total);

    Index col = 0;
    for (Index j : dec.features) {
        const auto& set = dec.per_feature[static_cast<std::size_t>(j)];
        const auto& ord = data.ordering(j);
        const auto m = static_cast<Index>(set.size());
        Matrix Uj(n, m);
        Vector b(m);
        const Vector beta = ordered_differences(fit.thetas[static_cast<std::size_t>(j)], ord);
        for (Index c = 0; c < m; ++c) {
            const Index k = set[static_cast<std::size_t>(c)];
            const double below = static_cast<double>(k + 1) / static_cast<double>(n);
            for (Index i = 0; i < n; ++i) Uj(i, c) = (i <= k ? 1.0 : 0.0) - below;
            b[c] = beta[k];
            for (Index i = 0; i < n; ++i) dec.V(ord[static_cast<std::size_t>(i)], col + c) = Uj(i, c);
        }
        const Matrix M = Uj.transpose() * Uj;
        const Vector u = Uj * b;
        const double norm = u.norm();
        if (norm > 0.0) {
            const Vector Mb = M * b;
            dec.S2.block(col, col, m, m) = M / norm - (Mb * Mb.transpose()) / (norm * norm * norm);
        }
        col += m;
    }
    return dec;
}

bool va_full_rank(const ActiveSetDecomposition& decomposition) {
    if (decomposition.size() == 0) return true;
    if (decomposition.size() > decomposition.V.rows()) return false;
    Eigen::JacobiSVD<Matrix> svd(decomposition.V);
    const Vector& s = svd.singularValues();
    return s[s.size() - 1] > 1e-8 * s[0];
}

namespace {

bool solve_trace(const Matrix& G, const Matrix& gram, double& trace) {
    Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success) return false;
    const Vector d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() <= 1e-13 * dmax) return false;
    trace = ldlt.solve(gram).trace();
    return std::isfinite(trace);
}

}  // namespace

DfEstimate df_flam(const FlamFit& fit, const Dataset& data) {
    return df_flam(fit, fit.penalty, data);
}

DfEstimate df_flam(const FlamFit& fit, const PenaltySpec& penalty, const Dataset& data) {
    penalty.validate();
    const ActiveSetDecomposition dec = decompose_active_set(fit, data);
    DfEstimate out;
    if (dec.size() == 0) return out;
    const Index m = dec.size();
    const Matrix gram = dec.V.transpose() * dec.V;
    const Matrix base = gram + (1.0 - penalty.alpha) * penalty.lambda * dec.S2;
    double trace = 0.0;
    bool ok = solve_trace(base + penalty.epsilon * Matrix::Identity(m, m), gram, trace);
    if (!ok && penalty.epsilon == 0.0) {
        out.ridge_retry = true;
        ok = solve_trace(base + 1e-8 * Matrix::Identity(m, m), gram, trace);
    }
    if (!ok) throw NumericFailure("df_flam: regularised Gram matrix is singular");
    out.df = trace + 1.0;
    return out;
}

Index knot_count(const FlamFit& fit) {
    Index count = 0;
    for (const Vector& b : fit.betas) {
        for (Index k = 0; k < b.size(); ++k) {
            if (std::abs(b[k]) > kZeroThreshold) ++count;
        }
    }
    return count;
}

Vector replicate_noise(Index n, std::uint64_t seed, std::size_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    Vector z(n);
    for (Index i = 0; i < n; ++i) z[i] = normal(rng);
    return z;
}

MonteCarloDf df_monte_carlo(const Vector& mu, double sigma, const Fitter& fitter, int n_reps,
                            std::uint64_t seed, int threads) {
    if (n_reps < 2) throw InvalidArgument("df_monte_carlo: need at least 2 replicates");
    if (!(sigma > 0.0)) throw InvalidArgument("df_monte_carlo: sigma must be > 0");
    MonteCarloDf out;
    out.per_replicate.assign(static_cast<std::size_t>(n_reps), 0.0);
    parallel_for(static_cast<std::size_t>(n_reps), threads, [&](std::size_t r) {
        const Vector noise = sigma * replicate_noise(mu.size(), seed, r);
        const Vector y = mu + noise;
        const Vector fitted = fitter(y, r);
        if (fitted.size() != mu.size()) throw InvalidArgument("df_monte_carlo: fitter returned wrong length");
        out.per_replicate[r] = (fitted - mu).dot(noise) / (sigma * sigma);
    });
    double sum = 0.0;
    for (double v : out.per_replicate) sum += v;
    out.mean = sum / n_reps;
    double ss = 0.0;
    for (double v : out.per_replicate) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (n_reps - 1) / n_reps);
    return out;
}

}  // namespace flam
