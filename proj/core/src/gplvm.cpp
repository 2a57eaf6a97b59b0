#include "sppca/gplvm.hpp"

#include <cmath>
#include <utility>

#include "sppca/errors.hpp"

namespace sppca {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

CholeskyFactor cholesky_with_jitter(const DenseMatrix& c) {
    try {
        return cholesky(c);
    } catch (const NotPositiveDefinite&) {
        double mean_diag = 0.0;
        for (std::size_t i = 0; i < c.rows; ++i) mean_diag += c(i, i);
        mean_diag /= static_cast<double>(c.rows);
        DenseMatrix jittered = c;
        for (std::size_t i = 0; i < c.rows; ++i) jittered(i, i) += 1e-8 * mean_diag;
        return cholesky(jittered);
    }
}

// Shared marginal-likelihood kernel over an explicit covariance C = K + nv I.
// Returns the value; if g_c is non-null it receives d(loglik)/dC, i.e.
// A = 1/2 (C^-1 S C^-1 - D C^-1) with S = (Y - mu 1^T)(Y - mu 1^T)^T.
double gp_loglik_core(const DenseMatrix& s, std::size_t n_rows, std::size_t n_out,
                      const DenseMatrix& k, double noise_var, DenseMatrix* g_c) {
    const std::size_t n = n_rows;
    const double d = static_cast<double>(n_out);
    if (k.rows != n || k.cols != n)
        throw DimensionMismatch("gplvm likelihood: kernel must be N x N");
    if (!(noise_var > 0.0)) throw Error("gplvm likelihood: noise_var must be positive");

    DenseMatrix c = k;
    for (std::size_t i = 0; i < n; ++i) c(i, i) += noise_var;
    const CholeskyFactor chol = cholesky_with_jitter(c);
    const DenseMatrix cinv = chol.inverse();

    double tr_cinv_s = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) tr_cinv_s += cinv.data[i] * s.data[i];

    const double value =
        -0.5 * d * static_cast<double>(n) * kLog2Pi - 0.5 * d * chol.log_det() -
        0.5 * tr_cinv_s;

    if (g_c) {
        DenseMatrix a = matmul(matmul(cinv, s), cinv);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (a(i, j) - d * cinv(i, j));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const double v = 0.5 * (a(i, j) + a(j, i));
                a(i, j) = v;
                a(j, i) = v;
            }
        *g_c = std::move(a);
    }
    return value;
}

DenseMatrix centered_outer(const DenseMatrix& y, const DenseVector& mu) {
    DenseMatrix centered = y;
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) centered(i, j) -= mu[i];
    return outer_gram(centered);
}

}  // namespace

GplvmData::GplvmData(DenseMatrix y) : Y(std::move(y)) {
    if (Y.rows < 2) throw DimensionMismatch("GplvmData: need at least 2 rows");
    if (Y.cols < 1) throw DimensionMismatch("GplvmData: need at least 1 column");
    for (double v : Y.data)
        if (!std::isfinite(v)) throw Error("GplvmData: non-finite entry");
}

DenseMatrix se_kernel_matrix(const DenseMatrix& x, const SeKernelConfig& cfg) {
    if (!(cfg.variance > 0.0) || !(cfg.lengthscale > 0.0))
        throw Error("se_kernel_matrix: variance and lengthscale must be positive");
    const std::size_t n = x.rows;
    const double inv2l2 = 0.5 / (cfg.lengthscale * cfg.lengthscale);
    DenseMatrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = cfg.variance;
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double diff = x(i, c) - x(j, c);
                d2 += diff * diff;
            }
            const double v = cfg.variance * std::exp(-d2 * inv2l2);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

double gplvm_log_likelihood(const GplvmData& data, const DenseMatrix& x,
                            const DenseVector& mu, double noise_var,
                            const SeKernelConfig& cfg) {
    if (x.rows != data.n()) throw DimensionMismatch("gplvm likelihood: X rows != N");
    if (mu.size() != data.n()) throw DimensionMismatch("gplvm likelihood: mu length != N");
    const DenseMatrix s = centered_outer(data.Y, mu);
    return gp_loglik_core(s, data.n(), data.d(), se_kernel_matrix(x, cfg), noise_var,
                          nullptr);
}

double gplvm_log_likelihood_kernel(const GplvmData& data, const DenseMatrix& k,
                                   const DenseVector& mu, double noise_var) {
    if (mu.size() != data.n()) throw DimensionMismatch("gplvm likelihood: mu length != N");
    const DenseMatrix s = centered_outer(data.Y, mu);
    return gp_loglik_core(s, data.n(), data.d(), k, noise_var, nullptr);
}

GplvmHouseholderPosterior::GplvmHouseholderPosterior(GplvmData data, std::size_t q,
                                                     SeKernelConfig kernel,
                                                     PriorConfig priors,
                                                     bool sample_kernel_hyperparams)
    : yyt_(outer_gram(data.Y)),
      n_(data.n()),
      d_(data.d()),
      q_(q),
      kernel_(kernel),
      priors_(priors),
      sample_hyper_(sample_kernel_hyperparams) {
    if (q < 1 || q > n_) throw DimensionMismatch("GplvmHouseholderPosterior: need 1 <= Q <= N");
    chain_params_ = 0;
    for (std::size_t k = 0; k < q_; ++k) chain_params_ += n_ - k;
}

std::size_t GplvmHouseholderPosterior::dim() const {
    return chain_params_ + q_ + 1 + (sample_hyper_ ? 2 : 0);
}

GplvmHouseholderPosterior::Decoded
GplvmHouseholderPosterior::decode(std::span<const double> theta) const {
    std::vector<DenseVector> vs(q_);
    for (std::size_t k = 0; k < q_; ++k) vs[k].resize(n_ - k);
    HouseholderChain chain(n_, q_, std::move(vs));
    chain.set_from_flat(theta.subspan(0, chain_params_));

    UnconstrainedOrdered y;
    y.y.assign(theta.begin() + chain_params_, theta.begin() + chain_params_ + q_);

    Decoded out;
    out.U = apply_chain(chain).U;
    out.sigma = ordered_forward(y).values.sigma;
    out.X = out.U;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < q_; ++j) out.X(i, j) *= out.sigma[j];
    out.sigma_noise = std::exp(theta[chain_params_ + q_]);
    out.kernel = kernel_;
    if (sample_hyper_) {
        out.kernel.variance = std::exp(2.0 * theta[chain_params_ + q_ + 1]);
        out.kernel.lengthscale = std::exp(theta[chain_params_ + q_ + 2]);
    }
    return out;
}

double GplvmHouseholderPosterior::eval(std::span<const double> theta,
                                       std::span<double> grad) const {
    std::vector<DenseVector> vs(q_);
    for (std::size_t k = 0; k < q_; ++k) vs[k].resize(n_ - k);
    HouseholderChain chain(n_, q_, std::move(vs));
    chain.set_from_flat(theta.subspan(0, chain_params_));

    UnconstrainedOrdered y;
    y.y.assign(theta.begin() + chain_params_, theta.begin() + chain_params_ + q_);
    const double log_noise = theta[chain_params_ + q_];
    const double noise_var = std::exp(2.0 * log_noise);

    SeKernelConfig kcfg = kernel_;
    double log_kern_sd = 0.0, log_length = 0.0;
    if (sample_hyper_) {
        log_kern_sd = theta[chain_params_ + q_ + 1];
        log_length = theta[chain_params_ + q_ + 2];
        kcfg.variance = std::exp(2.0 * log_kern_sd);
        kcfg.lengthscale = std::exp(log_length);
    }

    const StiefelPoint frame = apply_chain(chain);
    const OrderedForwardResult fwd = ordered_forward(y);
    const DenseVector& sigma = fwd.values.sigma;

    DenseMatrix x = frame.U;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < q_; ++j) x(i, j) *= sigma[j];

    const DenseMatrix k = se_kernel_matrix(x, kcfg);
    DenseMatrix a;
    double value = gp_loglik_core(yyt_, n_, d_, k, noise_var, &a);

    // Kernel adjoint: dL/dx_i = -(2 / l^2) sum_j A_ij K_ij (x_i - x_j).
    const double inv_l2 = 1.0 / (kcfg.lengthscale * kcfg.lengthscale);
    DenseMatrix g_x(n_, q_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            const double wij = a(i, j) * k(i, j);
            if (wij == 0.0) continue;
            for (std::size_t c = 0; c < q_; ++c)
                g_x(i, c) += -2.0 * inv_l2 * wij * (x(i, c) - x(j, c));
        }
    }

    DenseMatrix g_u(n_, q_);
    DenseVector g_sigma(q_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < q_; ++j) {
            g_u(i, j) = g_x(i, j) * sigma[j];
            g_sigma[j] += g_x(i, j) * frame.U(i, j);
        }

    const std::vector<DenseVector> g_vs = chain_gradient(chain, g_u);
    std::size_t pos = 0;
    for (std::size_t kv = 0; kv < q_; ++kv) {
        const DenseVector& v = chain.vs[kv];
        value += gaussian_log_density(v);
        for (std::size_t i = 0; i < v.size(); ++i) grad[pos++] = g_vs[kv][i] - v[i];
    }

    value += singular_value_log_density(fwd.values, n_, q_) + fwd.log_jacobian;
    const DenseVector g_prior_sigma =
        singular_value_log_density_grad(fwd.values, n_, q_);
    DenseVector g_sigma_total(q_);
    for (std::size_t i = 0; i < q_; ++i) g_sigma_total[i] = g_sigma[i] + g_prior_sigma[i];
    const DenseVector g_y = ordered_pullback(y, g_sigma_total);
    for (std::size_t i = 0; i < q_; ++i) grad[pos++] = g_y[i] + 1.0;

    double tr_a = 0.0;
    for (std::size_t i = 0; i < n_; ++i) tr_a += a(i, i);
    double g_noise_prior = 0.0;
    value += detail::noise_log_prior(log_noise, priors_, &g_noise_prior);
    grad[pos++] = tr_a * 2.0 * noise_var + g_noise_prior;

    if (sample_hyper_) {
        // d K_ij / d log(kernel sd) = 2 K_ij; d K_ij / d log(lengthscale)
        // = K_ij d_ij^2 / l^2, and d_ij^2 / l^2 = -2 log(K_ij / variance).
        double g_sd = 0.0, g_len = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                const double ak = a(i, j) * k(i, j);
                g_sd += 2.0 * ak;
                if (i != j) {
                    double d2 = 0.0;
                    for (std::size_t c = 0; c < q_; ++c) {
                        const double diff = x(i, c) - x(j, c);
                        d2 += diff * diff;
                    }
                    g_len += ak * d2 * inv_l2;
                }
            }
        value += -0.5 * log_kern_sd * log_kern_sd - 0.5 * log_length * log_length;
        grad[pos++] = g_sd - log_kern_sd;
        grad[pos++] = g_len - log_length;
    }
    return value;
}

GplvmStandardPosterior::GplvmStandardPosterior(GplvmData data, std::size_t q,
                                               SeKernelConfig kernel, PriorConfig priors)
    : yyt_(outer_gram(data.Y)),
      n_(data.n()),
      d_(data.d()),
      q_(q),
      kernel_(kernel),
      priors_(priors) {
    if (q < 1 || q > n_) throw DimensionMismatch("GplvmStandardPosterior: need 1 <= Q <= N");
}

std::size_t GplvmStandardPosterior::dim() const { return n_ * q_ + 1; }

DenseMatrix GplvmStandardPosterior::decode_x(std::span<const double> theta) const {
    DenseMatrix x(n_, q_);
    for (std::size_t i = 0; i < n_ * q_; ++i) x.data[i] = theta[i];
    return x;
}

double GplvmStandardPosterior::eval(std::span<const double> theta,
                                    std::span<double> grad) const {
    DenseMatrix x = decode_x(theta);
    const double log_noise = theta[n_ * q_];
    const double noise_var = std::exp(2.0 * log_noise);

    const DenseMatrix k = se_kernel_matrix(x, kernel_);
    DenseMatrix a;
    double value = gp_loglik_core(yyt_, n_, d_, k, noise_var, &a);

    const double inv_l2 = 1.0 / (kernel_.lengthscale * kernel_.lengthscale);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t c = 0; c < q_; ++c) grad[i * q_ + c] = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            const double wij = a(i, j) * k(i, j);
            if (wij == 0.0) continue;
            for (std::size_t c = 0; c < q_; ++c)
                grad[i * q_ + c] += -2.0 * inv_l2 * wij * (x(i, c) - x(j, c));
        }

    value += gaussian_log_density(x.data);
    for (std::size_t i = 0; i < n_ * q_; ++i) grad[i] -= x.data[i];

    double tr_a = 0.0;
    for (std::size_t i = 0; i < n_; ++i) tr_a += a(i, i);
    double g_noise_prior = 0.0;
    value += detail::noise_log_prior(log_noise, priors_, &g_noise_prior);
    grad[n_ * q_] = tr_a * 2.0 * noise_var + g_noise_prior;
    return value;
}

}  // namespace sppca
