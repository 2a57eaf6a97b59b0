#include "sppca/householder.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "sppca/errors.hpp"

namespace sppca {

HouseholderChain::HouseholderChain(std::size_t d, std::size_t q,
                                   std::vector<DenseVector> vectors)
    : D(d), Q(q), vs(std::move(vectors)) {
    if (q < 1 || q > d) throw DimensionMismatch("householder chain: need 1 <= Q <= D");
    if (vs.size() != q) throw DimensionMismatch("householder chain: expected Q vectors");
    for (std::size_t k = 0; k < q; ++k)
        if (vs[k].size() != d - k)
            throw DimensionMismatch("householder chain: vector " + std::to_string(k) +
                                    " must have length D - " + std::to_string(k));
}

HouseholderChain HouseholderChain::random(std::size_t d, std::size_t q, RandomStream& rng) {
    std::vector<DenseVector> vectors(q);
    for (std::size_t k = 0; k < q; ++k) {
        vectors[k].resize(d - k);
        for (double& x : vectors[k]) x = rng.normal();
    }
    return HouseholderChain(d, q, std::move(vectors));
}

std::size_t HouseholderChain::param_count() const {
    std::size_t n = 0;
    for (const auto& v : vs) n += v.size();
    return n;
}

void HouseholderChain::set_from_flat(std::span<const double> flat) {
    std::size_t pos = 0;
    for (auto& v : vs) {
        for (double& x : v) x = flat[pos++];
    }
}

void HouseholderChain::write_flat(std::span<double> flat) const {
    std::size_t pos = 0;
    for (const auto& v : vs) {
        for (double x : v) flat[pos++] = x;
    }
}

namespace {

struct Reflection {
    DenseVector u;  // unit direction
    double sign;    // sgn(v_1), with sgn(0) = +1
    double vnorm;   // |v|
    double wnorm;   // |v + sign |v| e_1|
};

Reflection make_reflection(const DenseVector& v) {
    const double vnorm = norm2(v);
    if (vnorm <= 1e-12)
        throw DegenerateVector("householder: chain vector norm below 1e-12");
    const double sign = (v[0] < 0.0) ? -1.0 : 1.0;
    DenseVector u = v;
    u[0] += sign * vnorm;
    const double wnorm = norm2(u);
    for (double& x : u) x /= wnorm;
    return Reflection{std::move(u), sign, vnorm, wnorm};
}

// In-place application of -sign (I - 2 u u^T) to rows [offset, D) of the
// slab. By construction the reflection maps v to -sign |v| e_1 relative to
// the sub-block, and it is its own inverse.
void apply_reflection(const Reflection& r, DenseMatrix& slab, std::size_t offset) {
    const std::size_t n = r.u.size();
    const std::size_t q = slab.cols;
    DenseVector ut_b(q, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double ui = r.u[i];
        const double* row = &slab.data[(offset + i) * q];
        for (std::size_t j = 0; j < q; ++j) ut_b[j] += ui * row[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double ui = r.u[i];
        double* row = &slab.data[(offset + i) * q];
        for (std::size_t j = 0; j < q; ++j)
            row[j] = r.sign * (2.0 * ui * ut_b[j] - row[j]);
    }
}

}  // namespace

DenseVector reflector(const DenseVector& v) {
    return make_reflection(v).u;
}

StiefelPoint apply_chain(const HouseholderChain& chain) {
    const std::size_t d = chain.D;
    const std::size_t q = chain.Q;
    DenseMatrix slab(d, q);
    for (std::size_t j = 0; j < q; ++j) slab(j, j) = 1.0;
    // Innermost reflection acts first, the full-dimension one last.
    for (std::size_t k = q; k-- > 0;) {
        const Reflection r = make_reflection(chain.vs[k]);
        apply_reflection(r, slab, k);
    }
    return StiefelPoint{std::move(slab)};
}

HouseholderChain chain_from_frame(const DenseMatrix& u) {
    const std::size_t d = u.rows;
    const std::size_t q = u.cols;
    if (q < 1 || q > d)
        throw DimensionMismatch("chain_from_frame: need 1 <= Q <= D");
    DenseMatrix work = u;
    std::vector<DenseVector> vectors(q);
    for (std::size_t k = 0; k < q; ++k) {
        DenseVector v(d - k);
        for (std::size_t i = 0; i < d - k; ++i) v[i] = work(k + i, k);
        const Reflection r = make_reflection(v);
        apply_reflection(r, work, k);
        vectors[k] = std::move(v);
    }
    return HouseholderChain(d, q, std::move(vectors));
}

std::vector<DenseVector> chain_gradient(const HouseholderChain& chain,
                                        const DenseMatrix& cotangent) {
    const std::size_t d = chain.D;
    const std::size_t q = chain.Q;
    if (cotangent.rows != d || cotangent.cols != q)
        throw DimensionMismatch("chain_gradient: cotangent must be D x Q");

    DenseMatrix slab = apply_chain(chain).U;
    DenseMatrix cot = cotangent;
    std::vector<DenseVector> grads(q);

    // Walk the reflections in reverse order of application. Each step first
    // undoes the reflection on the slab (it is an involution), leaving the
    // input that this reflection saw, then accumulates the pivot-vector
    // gradient and pushes the cotangent through.
    for (std::size_t k = 0; k < q; ++k) {
        const DenseVector& v = chain.vs[k];
        const Reflection r = make_reflection(v);
        const std::size_t n = v.size();
        const std::size_t offset = k;

        apply_reflection(r, slab, offset);

        // dL/du = 2 sign [ G (B^T u) + B (G^T u) ] over the active block,
        // where B is the pre-reflection slab and G the current cotangent.
        DenseVector bt_u(q, 0.0), gt_u(q, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ui = r.u[i];
            const double* brow = &slab.data[(offset + i) * q];
            const double* grow = &cot.data[(offset + i) * q];
            for (std::size_t j = 0; j < q; ++j) {
                bt_u[j] += ui * brow[j];
                gt_u[j] += ui * grow[j];
            }
        }
        DenseVector gu(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* brow = &slab.data[(offset + i) * q];
            const double* grow = &cot.data[(offset + i) * q];
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) s += grow[j] * bt_u[j] + brow[j] * gt_u[j];
            gu[i] = 2.0 * r.sign * s;
        }

        // u has unit norm, so dL/dw = (I - u u^T) gu / |w|; then the map
        // w = v + sign |v| e_1 contributes sign * (dL/dw_1) * v / |v|.
        double ugu = 0.0;
        for (std::size_t i = 0; i < n; ++i) ugu += r.u[i] * gu[i];
        DenseVector gv(n);
        for (std::size_t i = 0; i < n; ++i) gv[i] = (gu[i] - r.u[i] * ugu) / r.wnorm;
        const double g_first = gv[0];
        for (std::size_t i = 0; i < n; ++i) gv[i] += r.sign * g_first * v[i] / r.vnorm;
        grads[k] = std::move(gv);

        apply_reflection(r, cot, offset);
    }
    return grads;
}

}  // namespace sppca
