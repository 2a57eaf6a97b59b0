#include "sppca/hmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>

#include "sppca/errors.hpp"
#include "sppca/rng.hpp"

namespace sppca {

namespace {

constexpr double kDivergenceThreshold = 1000.0;

struct Eval {
    double logp = 0.0;
    DenseVector grad;
    bool ok = false;
};

// Model evaluation hardened for the integrator: library errors and
// non-finite results both come back as failures, which the caller treats
// as divergent proposals rather than crashes.
Eval safe_eval(const ModelPosterior& posterior, const DenseVector& q) {
    Eval e;
    e.grad.assign(q.size(), 0.0);
    try {
        e.logp = posterior.eval(q, e.grad);
    } catch (const Error&) {
        return e;
    }
    if (!std::isfinite(e.logp)) return e;
    for (double g : e.grad)
        if (!std::isfinite(g)) return e;
    e.ok = true;
    return e;
}

double kinetic(const DenseVector& p, const DenseVector& mass) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * p[i] / mass[i];
    return 0.5 * s;
}

struct Trajectory {
    DenseVector q;
    DenseVector p;
    Eval end;
    double delta_h = 0.0;  // H(end) - H(start), +inf on failure
    bool ok = false;
};

Trajectory integrate(const ModelPosterior& posterior, const DenseVector& q0,
                     const DenseVector& p0, const Eval& start, double step,
                     std::size_t steps, const DenseVector& mass) {
    Trajectory t;
    t.q = q0;
    t.p = p0;
    t.delta_h = std::numeric_limits<double>::infinity();
    const double h0 = -start.logp + kinetic(p0, mass);

    Eval cur = start;
    for (std::size_t i = 0; i < p0.size(); ++i) t.p[i] += 0.5 * step * cur.grad[i];
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < t.q.size(); ++i) t.q[i] += step * t.p[i] / mass[i];
        cur = safe_eval(posterior, t.q);
        if (!cur.ok) return t;
        const double half = (s + 1 == steps) ? 0.5 : 1.0;
        for (std::size_t i = 0; i < t.p.size(); ++i) t.p[i] += half * step * cur.grad[i];
    }
    const double h1 = -cur.logp + kinetic(t.p, mass);
    if (!std::isfinite(h1)) return t;
    t.end = std::move(cur);
    t.delta_h = h1 - h0;
    t.ok = true;
    return t;
}

// Nesterov-style dual averaging of log(step size).
struct DualAveraging {
    static constexpr double kGamma = 0.05;
    static constexpr double kT0 = 10.0;
    static constexpr double kKappa = 0.75;

    double mu = 0.0;
    double log_eps = 0.0;
    double log_eps_bar = 0.0;
    double h_bar = 0.0;
    std::size_t count = 0;

    void reset(double eps0) {
        mu = std::log(10.0 * eps0);
        log_eps = std::log(eps0);
        log_eps_bar = std::log(eps0);
        h_bar = 0.0;
        count = 0;
    }
    void update(double alpha, double target) {
        ++count;
        const double m = static_cast<double>(count);
        const double frac = 1.0 / (m + kT0);
        h_bar = (1.0 - frac) * h_bar + frac * (target - alpha);
        log_eps = mu - std::sqrt(m) / kGamma * h_bar;
        const double eta = std::pow(m, -kKappa);
        log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    }
    double current() const { return std::exp(log_eps); }
    double averaged() const { return std::exp(log_eps_bar); }
};

// Doubles or halves a unit step size until a single leapfrog step crosses
// the 0.5 acceptance boundary.
double find_reasonable_step_size(const ModelPosterior& posterior, const DenseVector& q,
                                 const Eval& cur, const DenseVector& mass,
                                 RandomStream& rng) {
    const std::size_t dim = q.size();
    DenseVector p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = std::sqrt(mass[i]) * rng.normal();

    double eps = 1.0;
    auto ratio_at = [&](double step) {
        const Trajectory t = integrate(posterior, q, p, cur, step, 1, mass);
        return t.ok ? std::exp(-t.delta_h) : 0.0;
    };
    double ratio = ratio_at(eps);
    const double dir = (ratio > 0.5) ? 1.0 : -1.0;
    for (int iter = 0; iter < 100; ++iter) {
        if (dir > 0.0 ? (ratio <= 0.5) : (ratio >= 0.5)) break;
        eps *= (dir > 0.0) ? 2.0 : 0.5;
        if (eps > 1e10 || eps < 1e-10) break;
        ratio = ratio_at(eps);
    }
    return eps;
}

// Running mean/variance over the mass estimation window.
struct RunningMoments {
    std::size_t count = 0;
    DenseVector mean;
    DenseVector m2;

    explicit RunningMoments(std::size_t dim) : mean(dim, 0.0), m2(dim, 0.0) {}

    void add(const DenseVector& x) {
        ++count;
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double delta = x[i] - mean[i];
            mean[i] += delta * inv;
            m2[i] += delta * (x[i] - mean[i]);
        }
    }

    // Regularized toward unit scale the way adaptive samplers usually do,
    // which keeps the mass finite for coordinates that barely moved.
    DenseVector regularized_mass() const {
        DenseVector mass(mean.size(), 1.0);
        if (count < 2) return mass;
        const double n = static_cast<double>(count);
        const double shrink = n / (n + 5.0);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double var = m2[i] / (n - 1.0);
            const double reg = shrink * var + 1e-3 * (5.0 / (n + 5.0));
            mass[i] = 1.0 / reg;
        }
        return mass;
    }
};

}  // namespace

LeapfrogResult leapfrog(const ModelPosterior& posterior, DenseVector q, DenseVector p,
                        double step_size, std::size_t steps,
                        const DenseVector& mass_diag) {
    if (q.size() != posterior.dim() || p.size() != q.size() ||
        mass_diag.size() != q.size())
        throw DimensionMismatch("leapfrog: state sizes differ from model dimension");
    const Eval start = safe_eval(posterior, q);
    if (!start.ok) return LeapfrogResult{std::move(q), std::move(p),
                                         std::numeric_limits<double>::infinity(), true};
    if (steps == 0) return LeapfrogResult{std::move(q), std::move(p), 0.0, false};
    Trajectory t = integrate(posterior, q, p, start, step_size, steps, mass_diag);
    if (!t.ok)
        return LeapfrogResult{std::move(t.q), std::move(t.p),
                              std::numeric_limits<double>::infinity(), true};
    const double err = std::abs(t.delta_h);
    return LeapfrogResult{std::move(t.q), std::move(t.p), err,
                          err > kDivergenceThreshold};
}

ChainOutput run_chain(const ModelPosterior& posterior, const SamplerConfig& config,
                      const DenseVector& init, std::uint64_t chain_index) {
    const std::size_t dim = posterior.dim();
    if (init.size() != dim && !init.empty())
        throw DimensionMismatch("run_chain: init size differs from model dimension");
    RandomStream rng(config.seed, chain_index);

    DenseVector q = init;
    Eval cur;
    if (!q.empty()) cur = safe_eval(posterior, q);
    if (!cur.ok) {
        bool found = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            q.resize(dim);
            for (double& x : q) x = rng.uniform(-config.init_radius, config.init_radius);
            cur = safe_eval(posterior, q);
            if (cur.ok) {
                found = true;
                break;
            }
        }
        if (!found)
            throw InitializationFailure(
                "run_chain: posterior evaluation failed at 100 jittered initial points");
    }

    DenseVector mass(dim, 1.0);
    const bool adapt = config.warmup >= 100;
    double eps = config.init_step_size;
    DualAveraging da;
    if (adapt) {
        eps = find_reasonable_step_size(posterior, q, cur, mass, rng);
        da.reset(eps);
    }
    const std::size_t collect_lo = config.warmup / 2;
    const std::size_t collect_hi = (7 * config.warmup) / 8;
    RunningMoments moments(dim);

    ChainOutput out;
    out.chain_index = chain_index;
    out.draws = DenseMatrix(config.draws, dim);
    out.log_densities.resize(config.draws);
    out.accept_stats.resize(config.draws);
    out.energy_errors.resize(config.draws);
    out.leapfrog_counts.resize(config.draws);

    const std::size_t total = config.warmup + config.draws;
    for (std::size_t iter = 0; iter < total; ++iter) {
        const bool warming = iter < config.warmup;
        const std::size_t steps =
            static_cast<std::size_t>(rng.uniform_int(1, config.max_leapfrog));
        DenseVector p(dim);
        for (std::size_t i = 0; i < dim; ++i) p[i] = std::sqrt(mass[i]) * rng.normal();

        const Trajectory t = integrate(posterior, q, p, cur, eps, steps, mass);
        const double abs_err =
            t.ok ? std::abs(t.delta_h) : std::numeric_limits<double>::infinity();
        const bool divergent = !t.ok || abs_err > kDivergenceThreshold;
        const double alpha = divergent ? 0.0 : std::min(1.0, std::exp(-t.delta_h));
        if (!divergent && rng.uniform() < alpha) {
            q = t.q;
            cur = t.end;
        }

        if (posterior.gibbs_refresh(q, rng)) {
            const Eval after = safe_eval(posterior, q);
            if (!after.ok)
                throw Error("run_chain: gibbs refresh left an unevaluable state");
            cur = after;
        }

        if (warming) {
            if (adapt) {
                da.update(alpha, config.target_accept);
                eps = da.current();
                if (iter >= collect_lo && iter < collect_hi) moments.add(q);
                if (iter + 1 == collect_hi) {
                    mass = moments.regularized_mass();
                    const double eps0 =
                        find_reasonable_step_size(posterior, q, cur, mass, rng);
                    da.reset(eps0);
                    eps = da.current();
                }
                if (iter + 1 == config.warmup) eps = da.averaged();
            }
        } else {
            const std::size_t k = iter - config.warmup;
            for (std::size_t i = 0; i < dim; ++i) out.draws(k, i) = q[i];
            out.log_densities[k] = cur.logp;
            out.accept_stats[k] = alpha;
            out.energy_errors[k] = abs_err;
            out.leapfrog_counts[k] = static_cast<std::uint32_t>(steps);
            if (divergent) ++out.divergences;
        }
    }
    out.adapted_step_size = eps;
    out.adapted_mass_diag = mass;
    return out;
}

ChainOutput run_chain(const ModelPosterior& posterior, const SamplerConfig& config,
                      std::uint64_t chain_index) {
    return run_chain(posterior, config, DenseVector{}, chain_index);
}

std::vector<ChainOutput> run_chains(const ModelPosterior& posterior,
                                    const SamplerConfig& config,
                                    const std::vector<DenseVector>& inits) {
    const std::size_t n_chains = config.chains;
    if (!inits.empty() && inits.size() != n_chains)
        throw DimensionMismatch("run_chains: need one init per chain, or none");
    std::vector<ChainOutput> results(n_chains);
    std::vector<std::exception_ptr> failures(n_chains);

    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t n_threads = config.max_threads == 0 ? hw : std::min(config.max_threads, hw);
    n_threads = std::max<std::size_t>(1, std::min(n_threads, n_chains));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chains) return;
            try {
                results[c] = inits.empty()
                                 ? run_chain(posterior, config,
                                             static_cast<std::uint64_t>(c))
                                 : run_chain(posterior, config, inits[c],
                                             static_cast<std::uint64_t>(c));
            } catch (...) {
                failures[c] = std::current_exception();
            }
        }
    };

    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::string failed;
    for (std::size_t c = 0; c < n_chains; ++c) {
        if (!failures[c]) continue;
        try {
            std::rethrow_exception(failures[c]);
        } catch (const std::exception& e) {
            failed += (failed.empty() ? "" : "; ") + std::string("chain ") +
                      std::to_string(c) + ": " + e.what();
        }
    }
    if (!failed.empty()) throw Error("run_chains: " + failed);
    return results;
}

std::vector<ChainOutput> run_chains(const ModelPosterior& posterior,
                                    const SamplerConfig& config) {
    return run_chains(posterior, config, {});
}

}  // namespace sppca
