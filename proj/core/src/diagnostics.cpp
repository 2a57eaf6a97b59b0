#include "sppca/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sppca/errors.hpp"

namespace sppca {

SignFixResult fix_signs(const DenseMatrix& u) {
    SignFixResult out;
    out.U = u;
    out.flipped.assign(u.cols, false);
    out.ambiguous.assign(u.cols, false);
    for (std::size_t j = 0; j < u.cols; ++j) {
        const double first = u(0, j);
        if (std::abs(first) < 1e-12) {
            out.ambiguous[j] = true;
            continue;
        }
        if (first < 0.0) {
            out.flipped[j] = true;
            for (std::size_t i = 0; i < u.rows; ++i) out.U(i, j) = -out.U(i, j);
        }
    }
    return out;
}

namespace {

double mean_of(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s / static_cast<double>(n);
}

double var_of(const double* x, std::size_t n, double mean) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s / static_cast<double>(n - 1);
}

std::size_t common_length(const std::vector<DenseVector>& chains) {
    if (chains.empty()) throw DimensionMismatch("diagnostics: no chains");
    std::size_t n = chains[0].size();
    for (const auto& c : chains) n = std::min(n, c.size());
    return n;
}

}  // namespace

double split_rhat(const std::vector<DenseVector>& chains) {
    const std::size_t n = common_length(chains);
    if (n < 4) throw DimensionMismatch("split_rhat: need at least 4 draws per chain");
    const std::size_t half = n / 2;
    std::vector<const double*> groups;
    for (const auto& c : chains) {
        groups.push_back(c.data());
        groups.push_back(c.data() + half);
    }
    const std::size_t m = groups.size();

    DenseVector means(m), vars(m);
    for (std::size_t g = 0; g < m; ++g) {
        means[g] = mean_of(groups[g], half);
        vars[g] = var_of(groups[g], half, means[g]);
    }
    double w = 0.0;
    for (double v : vars) w += v;
    w /= static_cast<double>(m);
    // No within variance left: the chains are all frozen at the same values
    // and the ratio below is 0/0; report perfect mixing rather than NaN.
    if (w <= 1e-300) return 1.0;

    const double grand = mean_of(means.data(), m);
    const double b = static_cast<double>(half) * var_of(means.data(), m, grand);
    const double hn = static_cast<double>(half);
    const double var_plus = (hn - 1.0) / hn * w + b / hn;
    return std::sqrt(var_plus / w);
}

EssResult ess_bulk(const std::vector<DenseVector>& chains) {
    const std::size_t n = common_length(chains);
    const std::size_t n_chains = chains.size();
    if (n < 4) return EssResult{std::numeric_limits<double>::quiet_NaN(), false};

    DenseVector means(n_chains), vars(n_chains);
    for (std::size_t c = 0; c < n_chains; ++c) {
        means[c] = mean_of(chains[c].data(), n);
        vars[c] = var_of(chains[c].data(), n, means[c]);
    }
    double w = 0.0;
    for (double v : vars) w += v;
    w /= static_cast<double>(n_chains);
    if (w <= 1e-300) return EssResult{0.0, true};

    double b_over_n = 0.0;
    if (n_chains > 1) {
        const double grand = mean_of(means.data(), n_chains);
        b_over_n = var_of(means.data(), n_chains, grand);
    }
    const double dn = static_cast<double>(n);
    const double var_plus = (dn - 1.0) / dn * w + b_over_n;

    // Biased within-chain autocovariance at a given lag, averaged over
    // chains.
    auto mean_autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n_chains; ++c) {
            const double* x = chains[c].data();
            const double m = means[c];
            double s = 0.0;
            for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
            acc += s / dn;
        }
        return acc / static_cast<double>(n_chains);
    };
    auto rho = [&](std::size_t lag) {
        return 1.0 - (w - mean_autocov(lag)) / var_plus;
    };

    // Geyer: sum pairwise autocorrelations while the pair sums stay
    // positive, enforcing monotone decay.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1e-12);

    const double total = static_cast<double>(n_chains) * dn;
    return EssResult{std::min(total / tau, 1.05 * total), false};
}

namespace {

double quantile_sorted(const DenseVector& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<ParameterSummary> summarize(const std::vector<DenseMatrix>& chain_draws,
                                        const std::vector<std::string>& names) {
    if (chain_draws.empty()) throw DimensionMismatch("summarize: no chains");
    const std::size_t n_params = chain_draws[0].cols;
    if (names.size() != n_params)
        throw DimensionMismatch("summarize: name count differs from parameter count");
    for (const auto& m : chain_draws)
        if (m.cols != n_params) throw DimensionMismatch("summarize: column counts differ");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<ParameterSummary> out(n_params);
    std::vector<DenseVector> per_chain(chain_draws.size());
    DenseVector pooled;

    for (std::size_t j = 0; j < n_params; ++j) {
        pooled.clear();
        for (std::size_t c = 0; c < chain_draws.size(); ++c) {
            const DenseMatrix& m = chain_draws[c];
            per_chain[c].resize(m.rows);
            for (std::size_t i = 0; i < m.rows; ++i) {
                per_chain[c][i] = m(i, j);
                pooled.push_back(m(i, j));
            }
        }
        ParameterSummary& s = out[j];
        s.name = names[j];
        s.mean = mean_of(pooled.data(), pooled.size());
        s.sd = pooled.size() > 1 ? std::sqrt(var_of(pooled.data(), pooled.size(), s.mean))
                                 : 0.0;
        std::sort(pooled.begin(), pooled.end());
        s.q2_5 = quantile_sorted(pooled, 0.025);
        s.q50 = quantile_sorted(pooled, 0.5);
        s.q97_5 = quantile_sorted(pooled, 0.975);

        const std::size_t min_len = common_length(per_chain);
        s.rhat = min_len >= 4 ? split_rhat(per_chain) : nan;
        const EssResult ess = ess_bulk(per_chain);
        s.ess = ess.degenerate ? 0.0 : ess.ess;
    }
    return out;
}

}  // namespace sppca
