#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sppca/rng.hpp"
#include "sppca/tensor.hpp"

namespace sppca {

// Unconstrained parameterization of a D x Q orthonormal frame as a product
// of Q Householder reflections. vs[k] has length D - k: vs[0] drives the
// outermost (full-dimension) reflection and vs[Q-1] the innermost one. The
// vectors are stored unnormalized; only their directions matter, which is
// what makes the parameterization smooth and lets a Gaussian prior on the
// vectors induce the uniform law on frames.
struct HouseholderChain {
    std::size_t D = 0;
    std::size_t Q = 0;
    std::vector<DenseVector> vs;

    HouseholderChain() = default;
    HouseholderChain(std::size_t d, std::size_t q, std::vector<DenseVector> vectors);

    static HouseholderChain random(std::size_t d, std::size_t q, RandomStream& rng);

    // Total number of free parameters, sum_{k<Q} (D - k).
    std::size_t param_count() const;

    void set_from_flat(std::span<const double> flat);
    void write_flat(std::span<double> flat) const;
};

// Point on the Stiefel manifold: U has orthonormal columns, D x Q.
struct StiefelPoint {
    DenseMatrix U;
};

// Normalized reflection direction for a pivot vector v:
//   u = (v + sgn(v_1) |v| e_1) / |v + sgn(v_1) |v| e_1|,   sgn(0) := +1.
// Throws DegenerateVector when |v| <= 1e-12.
DenseVector reflector(const DenseVector& v);

// U = first Q columns of H_D H_{D-1} ... H_{D-Q+1}, where H_n embeds the
// n-dimensional reflection -sgn(v_1)(I - 2 u u^T) in the lower-right block.
// Computed by sweeping the reflections over a D x Q slab, O(D Q^2) total.
StiefelPoint apply_chain(const HouseholderChain& chain);

// Pullback of a loss gradient dL/dU through apply_chain, returning dL/dv_k
// for each chain vector. Uses the involution property of the reflections to
// rebuild intermediate slabs in place, so memory stays O(D Q).
std::vector<DenseVector> chain_gradient(const HouseholderChain& chain,
                                        const DenseMatrix& cotangent);

// Inverse of apply_chain for a frame with orthonormal columns: one
// Householder QR sweep peels the reflections off, and the involution
// property makes each peeled pivot exactly the chain vector apply_chain
// consumes, so apply_chain(chain_from_frame(u)).U reproduces u to roundoff.
// Throws DegenerateVector when a deflated pivot column vanishes (u rank
// deficient).
HouseholderChain chain_from_frame(const DenseMatrix& u);

}  // namespace sppca
