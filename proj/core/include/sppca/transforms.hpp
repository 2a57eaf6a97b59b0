#pragma once

#include <cstddef>

#include "sppca/model.hpp"
#include "sppca/tensor.hpp"

namespace sppca {

// Strictly descending positive singular values, sigma_1 > ... > sigma_Q > 0.
struct OrderedSingularValues {
    DenseVector sigma;
};

// Unconstrained coordinates y for the ordered values: the smallest value is
// exp(y_Q) and each step up adds exp(y_q), so sigma_q = sum_{r >= q} exp(y_r).
struct UnconstrainedOrdered {
    DenseVector y;
};

struct OrderedForwardResult {
    OrderedSingularValues values;
    double log_jacobian;  // of the map y -> sigma, equals sum_q y_q
};

// Maps y to strictly descending positive values. Throws Overflow if any
// exp or partial sum leaves the finite range; nothing is clamped.
OrderedForwardResult ordered_forward(const UnconstrainedOrdered& y);

// Inverse map; requires strictly descending positive input.
UnconstrainedOrdered ordered_inverse(const OrderedSingularValues& values);

// Pullback of a gradient in sigma to a gradient in y (transform only; the
// log-Jacobian term contributes a further +1 per coordinate, added by the
// densities that include it).
DenseVector ordered_pullback(const UnconstrainedOrdered& y, const DenseVector& dsigma);

// Log density (up to a constant) of the descending singular values of a
// D x Q matrix with iid standard normal entries:
//   -1/2 sum sigma_q^2 + (D-Q-1) sum log sigma_q
//   + sum_{q<r} log|sigma_q^2 - sigma_r^2| + sum log(2 sigma_q).
// Throws DegenerateSpectrum when two values coincide to within 1e-300 in
// the squared scale.
double singular_value_log_density(const OrderedSingularValues& values,
                                  std::size_t d, std::size_t q);

// d/dsigma of the above.
DenseVector singular_value_log_density_grad(const OrderedSingularValues& values,
                                            std::size_t d, std::size_t q);

// log N(v | 0, I) up to the normalizing constant: -1/2 |v|^2.
double gaussian_log_density(const DenseVector& v);

// The singular-value law above expressed over unconstrained coordinates,
// log-Jacobian included. Small enough to sample directly, which gives an
// MCMC route to the same distribution the Gaussian-SVD construction samples
// exactly; agreement between the two is the key distributional check.
class SingularValueModel final : public ModelPosterior {
public:
    SingularValueModel(std::size_t d, std::size_t q);
    std::size_t dim() const override { return q_; }
    double eval(std::span<const double> theta, std::span<double> grad) const override;

private:
    std::size_t d_;
    std::size_t q_;
};

}  // namespace sppca
