#include <benchmark/benchmark.h>

#include "sppca/householder.hpp"
#include "sppca/rng.hpp"

using namespace sppca;

static void BM_apply_chain(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const std::size_t q = static_cast<std::size_t>(state.range(1));
    RandomStream rng(42);
    const HouseholderChain chain = HouseholderChain::random(d, q, rng);
    for (auto _ : state) {
        StiefelPoint u = apply_chain(chain);
        benchmark::DoNotOptimize(u.U.data.data());
    }
}
BENCHMARK(BM_apply_chain)
    ->Args({200, 4})
    ->Args({200, 8})
    ->Args({200, 16})
    ->Args({200, 32})
    ->Args({1000, 8});

static void BM_chain_gradient(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const std::size_t q = static_cast<std::size_t>(state.range(1));
    RandomStream rng(43);
    const HouseholderChain chain = HouseholderChain::random(d, q, rng);
    DenseMatrix cot(d, q);
    for (double& v : cot.data) v = rng.normal();
    for (auto _ : state) {
        auto grads = chain_gradient(chain, cot);
        benchmark::DoNotOptimize(grads.data());
    }
}
BENCHMARK(BM_chain_gradient)->Args({200, 8})->Args({200, 16})->Args({1000, 8});

BENCHMARK_MAIN();
