#pragma once

#include <cstddef>

#include "sppca/householder.hpp"
#include "sppca/model.hpp"
#include "sppca/ppca.hpp"
#include "sppca/tensor.hpp"
#include "sppca/transforms.hpp"

namespace sppca {

struct GplvmData {
    DenseMatrix Y;  // N x D, one row per latent location

    explicit GplvmData(DenseMatrix y);

    std::size_t n() const { return Y.rows; }
    std::size_t d() const { return Y.cols; }
};

struct SeKernelConfig {
    double variance = 1.0;     // signal variance
    double lengthscale = 1.0;
};

// Squared-exponential kernel matrix over the rows of X:
//   K_ij = variance * exp(-|x_i - x_j|^2 / (2 lengthscale^2)).
DenseMatrix se_kernel_matrix(const DenseMatrix& x, const SeKernelConfig& cfg);

// Marginal likelihood with each output dimension an independent GP draw:
//   sum_d log N(Y_:,d | mu, K + noise_var I).
// The Cholesky of K + noise_var I is retried once with a jitter of
// 1e-8 * mean(diag) added before giving up.
double gplvm_log_likelihood(const GplvmData& data, const DenseMatrix& x,
                            const DenseVector& mu, double noise_var,
                            const SeKernelConfig& cfg);

// Same likelihood for an explicit kernel matrix. With K = X X^T this is the
// linear-kernel model, which coincides with the factor-model likelihood of
// the transposed data; that duality is what the transpose trick exploits.
double gplvm_log_likelihood_kernel(const GplvmData& data, const DenseMatrix& k,
                                   const DenseVector& mu, double noise_var);

// Rotation-free GP-LVM posterior: latent locations X = U diag(sigma) with
// U an N x Q frame from a Householder chain and sigma under the matched
// singular-value density with (N, Q). The latent mean is fixed at zero
// (rows of Y are assumed centered or standardized).
//   theta = [chain | y_sigma | log_noise | (log kernel sd, log lengthscale)],
// the kernel block present only when sample_kernel_hyperparams is set
// (standard normal priors on the logs; otherwise the config values are
// held fixed).
class GplvmHouseholderPosterior final : public ModelPosterior {
public:
    GplvmHouseholderPosterior(GplvmData data, std::size_t q, SeKernelConfig kernel = {},
                              PriorConfig priors = {},
                              bool sample_kernel_hyperparams = false);

    std::size_t dim() const override;
    double eval(std::span<const double> theta, std::span<double> grad) const override;

    struct Decoded {
        DenseMatrix U;       // N x Q, raw
        DenseVector sigma;
        DenseMatrix X;       // U diag(sigma)
        double sigma_noise;
        SeKernelConfig kernel;
    };
    Decoded decode(std::span<const double> theta) const;

    std::size_t n() const { return n_; }
    std::size_t q() const { return q_; }
    std::size_t chain_param_count() const { return chain_params_; }
    bool samples_kernel_hyperparams() const { return sample_hyper_; }

private:
    DenseMatrix yyt_;  // N x N
    std::size_t n_;
    std::size_t d_;
    std::size_t q_;
    std::size_t chain_params_;
    SeKernelConfig kernel_;
    PriorConfig priors_;
    bool sample_hyper_;
};

// Free-form GP-LVM posterior: theta = [X row-major | log_noise], with iid
// standard normal priors on the entries of X. The rotation-smeared baseline
// the structural comparison runs against.
class GplvmStandardPosterior final : public ModelPosterior {
public:
    GplvmStandardPosterior(GplvmData data, std::size_t q, SeKernelConfig kernel = {},
                           PriorConfig priors = {});

    std::size_t dim() const override;
    double eval(std::span<const double> theta, std::span<double> grad) const override;

    DenseMatrix decode_x(std::span<const double> theta) const;

    std::size_t n() const { return n_; }
    std::size_t q() const { return q_; }

private:
    DenseMatrix yyt_;
    std::size_t n_;
    std::size_t d_;
    std::size_t q_;
    SeKernelConfig kernel_;
    PriorConfig priors_;
};

}  // namespace sppca
