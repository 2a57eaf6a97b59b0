#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sppca/rng.hpp"

namespace sppca {

using ParamVector = std::vector<double>;

// Differentiable unnormalized log-density over an unconstrained parameter
// vector. This is the whole contract the sampler sees: eval returns
// log p(theta) up to an additive constant and writes d log p / d theta into
// grad (grad.size() == dim()). Implementations must be deterministic in
// theta and may throw sppca::Error for invalid regions; the sampler treats
// that as a rejected (divergent) proposal.
class ModelPosterior {
public:
    virtual ~ModelPosterior() = default;
    virtual std::size_t dim() const = 0;
    virtual double eval(std::span<const double> theta, std::span<double> grad) const = 0;

    // Exact redraw of any conditionally tractable parameter block given the
    // rest of theta. The sampler composes this with its own transition
    // (Metropolis-within-Gibbs), so implementations must draw from the block's
    // full conditional under the same density eval scores. Returns true when
    // theta was modified. The default leaves theta alone.
    virtual bool gibbs_refresh(ParamVector& theta, RandomStream& rng) const {
        (void)theta;
        (void)rng;
        return false;
    }
};

}  // namespace sppca
