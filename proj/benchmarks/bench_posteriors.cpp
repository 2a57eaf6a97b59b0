#include <benchmark/benchmark.h>

#include "sppca/gplvm.hpp"
#include "sppca/ppca.hpp"
#include "sppca/rng.hpp"

using namespace sppca;

namespace {

DenseMatrix gaussian_data(std::size_t n, std::size_t d, std::uint64_t seed) {
    RandomStream rng(seed);
    DenseMatrix y(n, d);
    for (double& v : y.data) v = rng.normal();
    return y;
}

ParamVector random_point(std::size_t dim, std::uint64_t seed) {
    RandomStream rng(seed);
    ParamVector theta(dim);
    for (double& v : theta) v = 0.3 * rng.normal();
    return theta;
}

}  // namespace

static void BM_ppca_householder_eval(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = static_cast<std::size_t>(state.range(1));
    const std::size_t q = static_cast<std::size_t>(state.range(2));
    PpcaHouseholderPosterior posterior(PpcaData(gaussian_data(n, d, 1)), q);
    const ParamVector theta = random_point(posterior.dim(), 2);
    ParamVector grad(posterior.dim());
    for (auto _ : state) {
        const double v = posterior.eval(theta, grad);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_ppca_householder_eval)->Args({150, 5, 2})->Args({569, 30, 2});

static void BM_gplvm_householder_eval(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = static_cast<std::size_t>(state.range(1));
    GplvmHouseholderPosterior posterior(GplvmData(gaussian_data(n, d, 3)), 2);
    const ParamVector theta = random_point(posterior.dim(), 4);
    ParamVector grad(posterior.dim());
    for (auto _ : state) {
        const double v = posterior.eval(theta, grad);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_gplvm_householder_eval)->Args({30, 50})->Args({60, 100});
