#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "sppca/errors.hpp"
#include "sppca/householder.hpp"
#include "sppca/rng.hpp"
#include "sppca/tensor.hpp"
#include "test_support.hpp"

using namespace sppca;

namespace {

// Action of the signed reflection built from pivot v on a vector x:
// x -> -sgn(v_1) (x - 2 u (u^T x)).
DenseVector reflect(const DenseVector& v, const DenseVector& x) {
    const DenseVector u = reflector(v);
    const double sign = (v[0] < 0.0) ? -1.0 : 1.0;
    const double ux = dot(u, x);
    DenseVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -sign * (x[i] - 2.0 * u[i] * ux);
    return out;
}

HouseholderChain random_chain(std::size_t d, std::size_t q, std::uint64_t seed) {
    RandomStream rng(seed, 0);
    return HouseholderChain::random(d, q, rng);
}

double frame_loss(const HouseholderChain& chain, const DenseMatrix& cotangent) {
    const StiefelPoint p = apply_chain(chain);
    double s = 0.0;
    for (std::size_t i = 0; i < p.U.data.size(); ++i) s += cotangent.data[i] * p.U.data[i];
    return s;
}

DenseVector flatten_grads(const std::vector<DenseVector>& grads) {
    DenseVector flat;
    for (const auto& g : grads) flat.insert(flat.end(), g.begin(), g.end());
    return flat;
}

}  // namespace

TEST_CASE("reflector: hand-worked directions") {
    SUBCASE("v = e_1 gives u = e_1") {
        const DenseVector u = reflector({1.0, 0.0, 0.0});
        CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(u[1] == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(u[2] == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("v = (0, 1): sgn(0) is +1, so u = (1, 1)/sqrt(2)") {
        const DenseVector u = reflector({0.0, 1.0});
        const double r = 1.0 / std::sqrt(2.0);
        CHECK(u[0] == doctest::Approx(r).epsilon(1e-14));
        CHECK(u[1] == doctest::Approx(r).epsilon(1e-14));
    }
    SUBCASE("v = (-3, 4): negative leading entry flips the shift") {
        // v + sgn(v_1)|v| e_1 = (-3 - 5, 4) = (-8, 4), normalized (-2, 1)/sqrt(5).
        const DenseVector u = reflector({-3.0, 4.0});
        CHECK(u[0] == doctest::Approx(-2.0 / std::sqrt(5.0)).epsilon(1e-14));
        CHECK(u[1] == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-14));
    }
    SUBCASE("unit norm for random pivots") {
        RandomStream rng(11, 0);
        for (int t = 0; t < 50; ++t) {
            const DenseVector v = testsup::random_vector(6, rng);
            CHECK(norm2(reflector(v)) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("reflector: signed reflection maps v to |v| e_1") {
    RandomStream rng(23, 0);
    for (int t = 0; t < 50; ++t) {
        DenseVector v = testsup::random_vector(5, rng);
        const DenseVector image = reflect(v, v);
        CHECK(image[0] == doctest::Approx(norm2(v)).epsilon(1e-12));
        for (std::size_t i = 1; i < v.size(); ++i)
            CHECK(std::abs(image[i]) < 1e-12 * norm2(v));
    }
}

TEST_CASE("reflector: near-zero pivot raises DegenerateVector") {
    CHECK_THROWS_AS(reflector({0.0, 0.0, 0.0}), DegenerateVector);
    CHECK_THROWS_AS(reflector({1e-13, 0.0}), DegenerateVector);
    CHECK_NOTHROW(reflector({1e-11, 0.0}));
}

TEST_CASE("chain constructor validates vector lengths") {
    CHECK_NOTHROW(HouseholderChain(3, 2, {{1.0, 0.0, 0.0}, {1.0, 0.0}}));
    CHECK_THROWS_AS(HouseholderChain(3, 2, {{1.0, 0.0}, {1.0, 0.0}}), DimensionMismatch);
    CHECK_THROWS_AS(HouseholderChain(3, 2, {{1.0, 0.0, 0.0}}), DimensionMismatch);
}

TEST_CASE("apply_chain: D=2, Q=1 with pivot along e_1 gives the e_1 frame") {
    const HouseholderChain chain(2, 1, {{1.0, 0.0}});
    const StiefelPoint p = apply_chain(chain);
    REQUIRE(p.U.rows == 2);
    REQUIRE(p.U.cols == 1);
    CHECK(p.U(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.U(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("apply_chain: frames are orthonormal across shapes") {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {3, 1}, {5, 2}, {8, 3}, {4, 4}, {2, 2}, {12, 6}};
    std::uint64_t seed = 100;
    for (const auto& [d, q] : shapes) {
        const HouseholderChain chain = random_chain(d, q, seed++);
        const StiefelPoint p = apply_chain(chain);
        REQUIRE(p.U.rows == d);
        REQUIRE(p.U.cols == q);
        const DenseMatrix gtg = gram(p.U);
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < q; ++j)
                CHECK(gtg(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
}

TEST_CASE("apply_chain: invariant under positive rescaling of each pivot") {
    const HouseholderChain chain = random_chain(7, 3, 42);
    const StiefelPoint base = apply_chain(chain);
    const std::vector<double> scales = {3.7, 1e-6, 1e6};
    HouseholderChain scaled = chain;
    for (std::size_t k = 0; k < scaled.vs.size(); ++k)
        for (double& x : scaled.vs[k]) x *= scales[k % scales.size()];
    const StiefelPoint p = apply_chain(scaled);
    for (std::size_t i = 0; i < base.U.data.size(); ++i)
        CHECK(p.U.data[i] == doctest::Approx(base.U.data[i]).epsilon(1e-11));
}

TEST_CASE("flat round trip preserves the chain") {
    const HouseholderChain chain = random_chain(6, 3, 77);
    REQUIRE(chain.param_count() == 6 + 5 + 4);
    DenseVector flat(chain.param_count());
    chain.write_flat(flat);
    HouseholderChain other(6, 3, {DenseVector(6, 1.0), DenseVector(5, 1.0), DenseVector(4, 1.0)});
    other.set_from_flat(flat);
    const StiefelPoint a = apply_chain(chain);
    const StiefelPoint b = apply_chain(other);
    for (std::size_t i = 0; i < a.U.data.size(); ++i) CHECK(a.U.data[i] == b.U.data[i]);
}

TEST_CASE("standard normal pivots induce the rotation-invariant frame law") {
    // Compare the law of U(0,0) under the chain construction against the
    // QR-of-Gaussian sampler, which is uniform by construction.
    const std::size_t d = 5, q = 2, n = 4000;
    std::vector<double> chain_stat, qr_stat;
    chain_stat.reserve(n);
    qr_stat.reserve(n);
    RandomStream rng_chain(314, 0);
    RandomStream rng_qr(314, 1);
    for (std::size_t t = 0; t < n; ++t) {
        const HouseholderChain chain = HouseholderChain::random(d, q, rng_chain);
        chain_stat.push_back(apply_chain(chain).U(0, 0));
        qr_stat.push_back(qr_of_gaussian(d, q, rng_qr)(0, 0));
    }
    CHECK(testsup::ks_two_sample(chain_stat, qr_stat) < 0.05);
    // First two moments of a uniform-frame entry: mean 0, variance 1/D.
    CHECK(std::abs(testsup::mean_of(chain_stat)) < 0.025);
    CHECK(testsup::var_of(chain_stat) == doctest::Approx(1.0 / 5.0).epsilon(0.12));
}

TEST_CASE("chain_gradient: zero cotangent gives zero gradients") {
    const HouseholderChain chain = random_chain(5, 2, 9);
    const DenseMatrix zero(5, 2);
    const auto grads = chain_gradient(chain, zero);
    REQUIRE(grads.size() == 2);
    for (const auto& g : grads)
        for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("chain_gradient: sum of squared frame entries is flat") {
    // sum_ij U_ij^2 = Q identically, so its pullback must vanish.
    const HouseholderChain chain = random_chain(6, 3, 31);
    const StiefelPoint p = apply_chain(chain);
    DenseMatrix cot = p.U;
    for (double& x : cot.data) x *= 2.0;
    const auto grads = chain_gradient(chain, cot);
    for (const auto& g : grads)
        for (double x : g) CHECK(std::abs(x) < 1e-10);
}

TEST_CASE("chain_gradient matches central differences") {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{4, 2}, {6, 3}, {3, 3}};
    std::uint64_t seed = 500;
    for (const auto& [d, q] : shapes) {
        CAPTURE(d);
        CAPTURE(q);
        RandomStream rng(seed++, 0);
        const HouseholderChain chain = random_chain(d, q, seed);
        const DenseMatrix cot = testsup::random_matrix(d, q, rng);

        const DenseVector analytic = flatten_grads(chain_gradient(chain, cot));

        DenseVector flat(chain.param_count());
        chain.write_flat(flat);
        DenseVector numeric(flat.size());
        HouseholderChain work = chain;
        const double h = 1e-5;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double saved = flat[i];
            flat[i] = saved + h;
            work.set_from_flat(flat);
            const double up = frame_loss(work, cot);
            flat[i] = saved - h;
            work.set_from_flat(flat);
            const double down = frame_loss(work, cot);
            flat[i] = saved;
            numeric[i] = (up - down) / (2.0 * h);
        }
        CHECK(testsup::max_grad_rel_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("chain_from_frame: QR peeling inverts apply_chain on orthonormal frames") {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {3, 1}, {4, 2}, {5, 2}, {6, 3}, {4, 4}, {1, 1}};
    std::uint64_t seed = 900;
    for (const auto& [d, q] : shapes) {
        CAPTURE(d);
        CAPTURE(q);
        RandomStream rng(seed++, 0);
        const DenseMatrix u = qr_of_gaussian(d, q, rng);
        const HouseholderChain chain = chain_from_frame(u);
        const DenseMatrix rebuilt = apply_chain(chain).U;
        REQUIRE(rebuilt.rows == d);
        REQUIRE(rebuilt.cols == q);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < q; ++j)
                CHECK(rebuilt(i, j) == doctest::Approx(u(i, j)).epsilon(1e-11));
    }
}

TEST_CASE("chain_from_frame: recovered pivots have unit norm for orthonormal input") {
    RandomStream rng(910, 0);
    const DenseMatrix u = qr_of_gaussian(6, 3, rng);
    const HouseholderChain chain = chain_from_frame(u);
    for (const auto& v : chain.vs) CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("chain_from_frame: frames produced by random chains round trip") {
    std::uint64_t seed = 920;
    for (int t = 0; t < 10; ++t) {
        const HouseholderChain original = random_chain(5, 3, seed++);
        const DenseMatrix u = apply_chain(original).U;
        const DenseMatrix rebuilt = apply_chain(chain_from_frame(u)).U;
        for (std::size_t i = 0; i < u.data.size(); ++i)
            CHECK(rebuilt.data[i] == doctest::Approx(u.data[i]).epsilon(1e-11));
    }
}

TEST_CASE("chain_from_frame: shape validation and degenerate input") {
    CHECK_THROWS_AS(chain_from_frame(DenseMatrix(2, 3)), DimensionMismatch);
    CHECK_THROWS_AS(chain_from_frame(DenseMatrix(3, 0)), DimensionMismatch);

    // All-zero frame: the first deflated column vanishes.
    CHECK_THROWS_AS(chain_from_frame(DenseMatrix(4, 2)), DegenerateVector);
}
