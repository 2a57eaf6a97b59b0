#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sppca/model.hpp"
#include "sppca/tensor.hpp"

namespace sppca {

struct SamplerConfig {
    std::size_t chains = 4;
    std::size_t warmup = 1000;
    std::size_t draws = 1000;
    double target_accept = 0.8;
    std::size_t max_leapfrog = 64;   // steps per transition drawn uniformly from 1..max
    std::uint64_t seed = 0;
    double init_step_size = 0.1;     // used as-is when warmup < 100 (no adaptation)
    double init_radius = 1.0;        // initial points drawn uniformly from [-r, r]^dim
    std::size_t max_threads = 0;     // 0 means hardware concurrency
};

// Everything a finished chain hands back. Two runs with the same seed and
// chain index produce bit-identical contents.
struct ChainOutput {
    DenseMatrix draws;                         // draws x dim, post-warmup
    DenseVector log_densities;                 // per draw
    DenseVector accept_stats;                  // Metropolis alpha per transition
    DenseVector energy_errors;                 // |Delta H| per transition
    std::vector<std::uint32_t> leapfrog_counts;
    std::size_t divergences = 0;               // post-warmup divergent transitions
    double adapted_step_size = 0.0;
    DenseVector adapted_mass_diag;             // per-coordinate mass (inverse variance)
    std::uint64_t chain_index = 0;
};

struct LeapfrogResult {
    DenseVector q;
    DenseVector p;
    double energy_error = 0.0;  // |H(q', p') - H(q, p)|
    bool divergent = false;     // eval failure, non-finite state, or error > 1000
};

// Fixed-step leapfrog integration of Hamiltonian dynamics under a diagonal
// mass matrix. Exposed mostly for its own tests (reversibility, energy
// behavior); the sampler uses the same integrator internally.
LeapfrogResult leapfrog(const ModelPosterior& posterior, DenseVector q, DenseVector p,
                        double step_size, std::size_t steps,
                        const DenseVector& mass_diag);

// Single adaptive HMC chain. Steps per transition are jittered uniformly on
// {1, ..., max_leapfrog}; the step size follows dual averaging toward
// target_accept; the diagonal mass matrix is estimated from the middle
// portion of warmup. Adaptation engages only when warmup >= 100. The chain
// starts from `init` if given (falling back to as many as 100 random
// re-initializations when evaluation fails, then InitializationFailure).
ChainOutput run_chain(const ModelPosterior& posterior, const SamplerConfig& config,
                      const DenseVector& init, std::uint64_t chain_index = 0);
ChainOutput run_chain(const ModelPosterior& posterior, const SamplerConfig& config,
                      std::uint64_t chain_index = 0);

// Runs config.chains chains on a small thread pool (bounded by max_threads
// and hardware concurrency). Chain c uses RNG stream c of config.seed, so
// results do not depend on the interleaving. Failures are collected and
// reported together after all chains finish. `inits` is either empty (every
// chain draws its own random start) or one starting point per chain.
std::vector<ChainOutput> run_chains(const ModelPosterior& posterior,
                                    const SamplerConfig& config);
std::vector<ChainOutput> run_chains(const ModelPosterior& posterior,
                                    const SamplerConfig& config,
                                    const std::vector<DenseVector>& inits);

}  // namespace sppca
