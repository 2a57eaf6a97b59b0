#include "sppca/transforms.hpp"

#include <cmath>
#include <string>

#include "sppca/errors.hpp"

namespace sppca {

OrderedForwardResult ordered_forward(const UnconstrainedOrdered& y) {
    const std::size_t q = y.y.size();
    if (q == 0) throw DimensionMismatch("ordered_forward: empty input");
    DenseVector sigma(q);
    double acc = 0.0;
    double log_jac = 0.0;
    for (std::size_t k = q; k-- > 0;) {
        acc += std::exp(y.y[k]);
        sigma[k] = acc;
        log_jac += y.y[k];
    }
    if (!std::isfinite(acc))
        throw Overflow("ordered_forward: value overflowed the finite range");
    return OrderedForwardResult{OrderedSingularValues{std::move(sigma)}, log_jac};
}

UnconstrainedOrdered ordered_inverse(const OrderedSingularValues& values) {
    const std::size_t q = values.sigma.size();
    if (q == 0) throw DimensionMismatch("ordered_inverse: empty input");
    DenseVector y(q);
    if (!(values.sigma[q - 1] > 0.0))
        throw Error("ordered_inverse: values must be positive");
    y[q - 1] = std::log(values.sigma[q - 1]);
    for (std::size_t k = 0; k + 1 < q; ++k) {
        const double gap = values.sigma[k] - values.sigma[k + 1];
        if (!(gap > 0.0))
            throw Error("ordered_inverse: values must be strictly descending");
        y[k] = std::log(gap);
    }
    return UnconstrainedOrdered{std::move(y)};
}

DenseVector ordered_pullback(const UnconstrainedOrdered& y, const DenseVector& dsigma) {
    const std::size_t q = y.y.size();
    if (dsigma.size() != q) throw DimensionMismatch("ordered_pullback: lengths differ");
    DenseVector dy(q);
    double prefix = 0.0;  // sigma_k depends on y_r exactly when r >= k
    for (std::size_t r = 0; r < q; ++r) {
        prefix += dsigma[r];
        dy[r] = std::exp(y.y[r]) * prefix;
    }
    return dy;
}

double singular_value_log_density(const OrderedSingularValues& values,
                                  std::size_t d, std::size_t q) {
    const DenseVector& s = values.sigma;
    if (s.size() != q) throw DimensionMismatch("singular_value_log_density: size != Q");
    if (q < 1 || q > d) throw DimensionMismatch("singular_value_log_density: need 1 <= Q <= D");
    const double power = static_cast<double>(d) - static_cast<double>(q) - 1.0;

    double sq = 0.0, logs = 0.0, pairs = 0.0, jac = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
        if (!(s[i] > 0.0))
            throw Error("singular_value_log_density: values must be positive");
        sq += s[i] * s[i];
        logs += std::log(s[i]);
        jac += std::log(2.0 * s[i]);
        for (std::size_t j = i + 1; j < q; ++j) {
            const double gap = s[i] * s[i] - s[j] * s[j];
            if (std::abs(gap) < 1e-300)
                throw DegenerateSpectrum(
                    "singular_value_log_density: values " + std::to_string(i) + " and " +
                    std::to_string(j) + " coincide");
            pairs += std::log(std::abs(gap));
        }
    }
    return -0.5 * sq + power * logs + pairs + jac;
}

DenseVector singular_value_log_density_grad(const OrderedSingularValues& values,
                                            std::size_t d, std::size_t q) {
    const DenseVector& s = values.sigma;
    if (s.size() != q) throw DimensionMismatch("singular_value_log_density_grad: size != Q");
    const double power = static_cast<double>(d) - static_cast<double>(q) - 1.0;
    DenseVector g(q);
    for (std::size_t i = 0; i < q; ++i) {
        double repulsion = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            if (j == i) continue;
            const double gap = s[i] * s[i] - s[j] * s[j];
            if (std::abs(gap) < 1e-300)
                throw DegenerateSpectrum("singular_value_log_density_grad: values coincide");
            repulsion += 2.0 * s[i] / gap;
        }
        g[i] = -s[i] + power / s[i] + repulsion + 1.0 / s[i];
    }
    return g;
}

double gaussian_log_density(const DenseVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return -0.5 * s;
}

SingularValueModel::SingularValueModel(std::size_t d, std::size_t q) : d_(d), q_(q) {
    if (q < 1 || q > d) throw DimensionMismatch("SingularValueModel: need 1 <= Q <= D");
}

double SingularValueModel::eval(std::span<const double> theta,
                                std::span<double> grad) const {
    UnconstrainedOrdered y{DenseVector(theta.begin(), theta.end())};
    const OrderedForwardResult fwd = ordered_forward(y);
    const double value =
        singular_value_log_density(fwd.values, d_, q_) + fwd.log_jacobian;
    const DenseVector dsigma = singular_value_log_density_grad(fwd.values, d_, q_);
    const DenseVector dy = ordered_pullback(y, dsigma);
    for (std::size_t i = 0; i < q_; ++i) grad[i] = dy[i] + 1.0;
    return value;
}

}  // namespace sppca
