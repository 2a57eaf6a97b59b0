#pragma once

#include <cstddef>
#include <optional>

#include "sppca/householder.hpp"
#include "sppca/model.hpp"
#include "sppca/tensor.hpp"
#include "sppca/transforms.hpp"

namespace sppca {

// Observed data for the linear latent factor model, one row per observation.
struct PpcaData {
    DenseMatrix Y;  // N x D

    explicit PpcaData(DenseMatrix y);

    // Zero-observation dataset: the likelihood contributes nothing so the
    // posterior reduces to the prior. Exists for prior-predictive checks.
    static PpcaData prior_only(std::size_t d);

    std::size_t n() const { return Y.rows; }
    std::size_t d() const { return Y.cols; }

private:
    PpcaData() = default;
};

struct PriorConfig {
    double mu_sd = 10.0;

    enum class NoisePrior { LogNormal, HalfCauchy };
    NoisePrior noise_prior = NoisePrior::LogNormal;
    double half_cauchy_scale = 1.0;
};

// Marginal likelihood of the factor model with the latent coordinates
// integrated out: each row of Y is N(mu, W W^T + noise_var I). Only the
// sufficient statistics (Y^T Y, column sums, N) enter, so evaluation costs
// O(D^2 Q + D^3) regardless of N.
double ppca_log_likelihood(const PpcaData& data, const DenseMatrix& w,
                           const DenseVector& mu, double noise_var);

struct PpcaParamsStandard {
    DenseMatrix W;       // D x Q
    DenseVector mu;      // D
    double log_noise;    // log of the noise standard deviation
};

struct PpcaParamsHouseholder {
    HouseholderChain chain;
    UnconstrainedOrdered y_sigma;
    DenseVector mu;
    double log_noise;
};

namespace detail {

struct PpcaSuffStats {
    DenseMatrix yty;      // D x D
    DenseVector col_sum;  // D
    std::size_t n = 0;
    std::size_t d = 0;
};

PpcaSuffStats make_suff_stats(const PpcaData& data);

// Shared likelihood kernel; gradient outputs are optional and written only
// when non-null. g_noise_var is d/d(noise_var), not d/d(log sd).
double loglik_core(const PpcaSuffStats& ss, const DenseMatrix& w, const DenseVector& mu,
                   double noise_var, DenseMatrix* g_w, DenseVector* g_mu,
                   double* g_noise_var);

double noise_log_prior(double log_noise, const PriorConfig& priors, double* grad);

}  // namespace detail

// Posterior over the unconstrained parameterization with W free:
//   theta = [W row-major | mu | log_noise].
// Priors: W entries iid N(0,1), mu ~ N(0, mu_sd^2 I), noise per config.
class PpcaStandardPosterior final : public ModelPosterior {
public:
    PpcaStandardPosterior(PpcaData data, std::size_t q, PriorConfig priors = {});

    std::size_t dim() const override;
    double eval(std::span<const double> theta, std::span<double> grad) const override;

    // Conjugate location update: mu | W, noise, Y is Gaussian, so the block is
    // redrawn exactly between sampler transitions.
    bool gibbs_refresh(ParamVector& theta, RandomStream& rng) const override;

    ParamVector pack(const PpcaParamsStandard& params) const;
    PpcaParamsStandard unpack(std::span<const double> theta) const;

    std::size_t n() const { return ss_.n; }
    std::size_t d() const { return ss_.d; }
    std::size_t q() const { return q_; }

private:
    detail::PpcaSuffStats ss_;
    std::size_t q_;
    PriorConfig priors_;
};

// Posterior over the rotation-free parameterization W = U diag(sigma):
//   theta = [chain vectors v_D ... v_{D-Q+1} | y_sigma | mu | log_noise].
// Priors: chain vectors iid N(0,1) (inducing the uniform frame law), sigma
// under the matched singular-value density (log-Jacobian included), mu and
// noise as in the standard model.
class PpcaHouseholderPosterior final : public ModelPosterior {
public:
    PpcaHouseholderPosterior(PpcaData data, std::size_t q, PriorConfig priors = {});

    std::size_t dim() const override;
    double eval(std::span<const double> theta, std::span<double> grad) const override;

    // Same conjugate mu redraw as the standard posterior; the frame basis
    // makes the conditional covariance diagonal, so the draw is O(DQ).
    bool gibbs_refresh(ParamVector& theta, RandomStream& rng) const override;

    ParamVector pack(const PpcaParamsHouseholder& params) const;
    PpcaParamsHouseholder unpack(std::span<const double> theta) const;

    struct Decoded {
        DenseMatrix U;          // D x Q frame, raw (not sign-fixed)
        DenseVector sigma;      // descending
        DenseMatrix W;          // U diag(sigma)
        DenseVector mu;
        double sigma_noise;
    };
    Decoded decode(std::span<const double> theta) const;

    // Likelihood term alone, through the same kernel eval uses.
    double likelihood_term(std::span<const double> theta) const;

    std::size_t n() const { return ss_.n; }
    std::size_t d() const { return ss_.d; }
    std::size_t q() const { return q_; }
    std::size_t chain_param_count() const { return chain_params_; }

private:
    detail::PpcaSuffStats ss_;
    std::size_t q_;
    std::size_t chain_params_;
    PriorConfig priors_;
};

}  // namespace sppca
