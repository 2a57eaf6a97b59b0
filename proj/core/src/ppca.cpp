#include "sppca/ppca.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "sppca/errors.hpp"

namespace sppca {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Exact draw from mu | frame, signal variances, noise, data. With
// C = noise_var I + sum_j lambda_j u_j u_j^T the conditional posterior of mu
// is Gaussian with precision N C^{-1} + mu_sd^{-2} I, which shares C's
// eigenbasis: variance v_j along each frame column, v_0 on the complement.
// A standard normal vector is reshaped accordingly, so the draw costs O(DQ).
DenseVector draw_mu_conditional(const detail::PpcaSuffStats& ss, const DenseMatrix& u,
                                const DenseVector& lambda, double noise_var,
                                double mu_sd, RandomStream& rng) {
    const std::size_t d = ss.d;
    const std::size_t q = u.cols;
    const double n = static_cast<double>(ss.n);
    const double tau2 = mu_sd * mu_sd;

    DenseVector ybar(d, 0.0);
    if (ss.n > 0)
        for (std::size_t i = 0; i < d; ++i) ybar[i] = ss.col_sum[i] / n;

    const double a0 = n / noise_var + 1.0 / tau2;
    const double b0 = (n / noise_var) / a0;
    const double s0 = std::sqrt(1.0 / a0);

    DenseVector z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();

    DenseVector mu(d);
    for (std::size_t i = 0; i < d; ++i) mu[i] = b0 * ybar[i] + s0 * z[i];
    for (std::size_t j = 0; j < q; ++j) {
        const double aj = n / (lambda[j] + noise_var) + 1.0 / tau2;
        const double bj = (n / (lambda[j] + noise_var)) / aj;
        const double sj = std::sqrt(1.0 / aj);
        double uy = 0.0;
        double uz = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            uy += u(i, j) * ybar[i];
            uz += u(i, j) * z[i];
        }
        const double coeff = (bj - b0) * uy + (sj - s0) * uz;
        for (std::size_t i = 0; i < d; ++i) mu[i] += coeff * u(i, j);
    }
    return mu;
}

}  // namespace

PpcaData::PpcaData(DenseMatrix y) : Y(std::move(y)) {
    if (Y.rows < 2) throw DimensionMismatch("PpcaData: need at least 2 observations");
    if (Y.cols < 1) throw DimensionMismatch("PpcaData: need at least 1 column");
    for (double v : Y.data)
        if (!std::isfinite(v)) throw Error("PpcaData: non-finite entry");
}

PpcaData PpcaData::prior_only(std::size_t d) {
    PpcaData data;
    data.Y = DenseMatrix(0, d);
    return data;
}

namespace detail {

PpcaSuffStats make_suff_stats(const PpcaData& data) {
    PpcaSuffStats ss;
    ss.n = data.n();
    ss.d = data.d();
    ss.yty = gram(data.Y);
    ss.col_sum.assign(ss.d, 0.0);
    for (std::size_t i = 0; i < ss.n; ++i)
        for (std::size_t j = 0; j < ss.d; ++j) ss.col_sum[j] += data.Y(i, j);
    return ss;
}

double loglik_core(const PpcaSuffStats& ss, const DenseMatrix& w, const DenseVector& mu,
                   double noise_var, DenseMatrix* g_w, DenseVector* g_mu,
                   double* g_noise_var) {
    const std::size_t d = ss.d;
    const double n = static_cast<double>(ss.n);
    if (w.rows != d) throw DimensionMismatch("ppca likelihood: W rows != D");
    if (mu.size() != d) throw DimensionMismatch("ppca likelihood: mu length != D");
    if (!(noise_var > 0.0)) throw Error("ppca likelihood: noise_var must be positive");

    DenseMatrix k = outer_gram(w);
    for (std::size_t i = 0; i < d; ++i) k(i, i) += noise_var;
    const CholeskyFactor chol = cholesky(k);
    const DenseMatrix kinv = chol.inverse();

    // Centered scatter via sufficient statistics:
    //   S(mu) = Y^T Y - s mu^T - mu s^T + N mu mu^T, s = column sums.
    DenseMatrix scatter(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            scatter(i, j) =
                ss.yty(i, j) - ss.col_sum[i] * mu[j] - mu[i] * ss.col_sum[j] + n * mu[i] * mu[j];

    double tr_kinv_s = 0.0;
    for (std::size_t i = 0; i < d * d; ++i) tr_kinv_s += kinv.data[i] * scatter.data[i];

    const double value = -0.5 * n * static_cast<double>(d) * kLog2Pi -
                         0.5 * n * chol.log_det() - 0.5 * tr_kinv_s;

    if (g_w || g_mu || g_noise_var) {
        // A = 1/2 (K^-1 S K^-1 - N K^-1) is d(loglik)/dK for symmetric K.
        DenseMatrix a = matmul(matmul(kinv, scatter), kinv);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) a(i, j) = 0.5 * (a(i, j) - n * kinv(i, j));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const double v = 0.5 * (a(i, j) + a(j, i));
                a(i, j) = v;
                a(j, i) = v;
            }
        if (g_w) {
            *g_w = matmul(a, w);
            for (double& v : g_w->data) v *= 2.0;
        }
        if (g_mu) {
            DenseVector r(d);
            for (std::size_t i = 0; i < d; ++i) r[i] = ss.col_sum[i] - n * mu[i];
            *g_mu = matvec(kinv, r);
        }
        if (g_noise_var) {
            double tr = 0.0;
            for (std::size_t i = 0; i < d; ++i) tr += a(i, i);
            *g_noise_var = tr;
        }
    }
    return value;
}

double noise_log_prior(double log_noise, const PriorConfig& priors, double* grad) {
    if (priors.noise_prior == PriorConfig::NoisePrior::LogNormal) {
        // Standard normal on log sd; no extra Jacobian since log sd is the
        // sampled coordinate.
        if (grad) *grad = -log_noise;
        return -0.5 * log_noise * log_noise;
    }
    // Half-Cauchy(scale) on sd, expressed over log sd: adds the log sd
    // Jacobian term.
    const double scale = priors.half_cauchy_scale;
    const double ratio2 = std::exp(2.0 * (log_noise - std::log(scale)));
    if (grad) *grad = 1.0 - 2.0 * ratio2 / (1.0 + ratio2);
    return log_noise - std::log1p(ratio2);
}

}  // namespace detail

double ppca_log_likelihood(const PpcaData& data, const DenseMatrix& w,
                           const DenseVector& mu, double noise_var) {
    const detail::PpcaSuffStats ss = detail::make_suff_stats(data);
    return detail::loglik_core(ss, w, mu, noise_var, nullptr, nullptr, nullptr);
}

PpcaStandardPosterior::PpcaStandardPosterior(PpcaData data, std::size_t q,
                                             PriorConfig priors)
    : ss_(detail::make_suff_stats(data)), q_(q), priors_(priors) {
    if (q < 1 || q > ss_.d)
        throw DimensionMismatch("PpcaStandardPosterior: need 1 <= Q <= D");
}

std::size_t PpcaStandardPosterior::dim() const { return ss_.d * q_ + ss_.d + 1; }

double PpcaStandardPosterior::eval(std::span<const double> theta,
                                   std::span<double> grad) const {
    const std::size_t d = ss_.d;
    DenseMatrix w(d, q_);
    for (std::size_t i = 0; i < d * q_; ++i) w.data[i] = theta[i];
    DenseVector mu(theta.begin() + d * q_, theta.begin() + d * q_ + d);
    const double log_noise = theta[d * q_ + d];
    const double noise_var = std::exp(2.0 * log_noise);

    DenseMatrix g_w;
    DenseVector g_mu;
    double g_nv = 0.0;
    double value = detail::loglik_core(ss_, w, mu, noise_var, &g_w, &g_mu, &g_nv);

    value += gaussian_log_density(w.data);
    for (std::size_t i = 0; i < d * q_; ++i) grad[i] = g_w.data[i] - w.data[i];

    const double mu_var = priors_.mu_sd * priors_.mu_sd;
    for (std::size_t i = 0; i < d; ++i) {
        value += -0.5 * mu[i] * mu[i] / mu_var;
        grad[d * q_ + i] = g_mu[i] - mu[i] / mu_var;
    }

    double g_noise_prior = 0.0;
    value += detail::noise_log_prior(log_noise, priors_, &g_noise_prior);
    grad[d * q_ + d] = g_nv * 2.0 * noise_var + g_noise_prior;
    return value;
}

ParamVector PpcaStandardPosterior::pack(const PpcaParamsStandard& params) const {
    ParamVector theta(dim());
    const std::size_t d = ss_.d;
    if (params.W.rows != d || params.W.cols != q_ || params.mu.size() != d)
        throw DimensionMismatch("pack: parameter shapes differ from model");
    for (std::size_t i = 0; i < d * q_; ++i) theta[i] = params.W.data[i];
    for (std::size_t i = 0; i < d; ++i) theta[d * q_ + i] = params.mu[i];
    theta[d * q_ + d] = params.log_noise;
    return theta;
}

PpcaParamsStandard PpcaStandardPosterior::unpack(std::span<const double> theta) const {
    const std::size_t d = ss_.d;
    PpcaParamsStandard p;
    p.W = DenseMatrix(d, q_);
    for (std::size_t i = 0; i < d * q_; ++i) p.W.data[i] = theta[i];
    p.mu.assign(theta.begin() + d * q_, theta.begin() + d * q_ + d);
    p.log_noise = theta[d * q_ + d];
    return p;
}

bool PpcaStandardPosterior::gibbs_refresh(ParamVector& theta, RandomStream& rng) const {
    const std::size_t d = ss_.d;
    DenseMatrix w(d, q_);
    for (std::size_t i = 0; i < d * q_; ++i) w.data[i] = theta[i];
    const double noise_var = std::exp(2.0 * theta[d * q_ + d]);

    // Left singular structure of W via the small Q x Q gram; near-zero
    // singular values contribute nothing to the conditional and are dropped.
    const SymEigen eig = sym_eigen(gram(w));
    const double scale = std::max(eig.values.empty() ? 0.0 : eig.values[0], 1.0);
    std::size_t kept = 0;
    DenseMatrix u(d, q_);
    DenseVector lambda(q_);
    for (std::size_t j = 0; j < q_; ++j) {
        if (!(eig.values[j] > 1e-12 * scale)) continue;
        const double s = std::sqrt(eig.values[j]);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < q_; ++k) acc += w(i, k) * eig.vectors(k, j);
            u(i, kept) = acc / s;
        }
        lambda[kept] = eig.values[j];
        ++kept;
    }
    DenseMatrix u_kept(d, kept);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < kept; ++j) u_kept(i, j) = u(i, j);
    lambda.resize(kept);

    const DenseVector mu =
        draw_mu_conditional(ss_, u_kept, lambda, noise_var, priors_.mu_sd, rng);
    for (std::size_t i = 0; i < d; ++i) theta[d * q_ + i] = mu[i];
    return true;
}

PpcaHouseholderPosterior::PpcaHouseholderPosterior(PpcaData data, std::size_t q,
                                                   PriorConfig priors)
    : ss_(detail::make_suff_stats(data)), q_(q), priors_(priors) {
    if (q < 1 || q > ss_.d)
        throw DimensionMismatch("PpcaHouseholderPosterior: need 1 <= Q <= D");
    chain_params_ = 0;
    for (std::size_t k = 0; k < q_; ++k) chain_params_ += ss_.d - k;
}

std::size_t PpcaHouseholderPosterior::dim() const {
    return chain_params_ + q_ + ss_.d + 1;
}

PpcaParamsHouseholder PpcaHouseholderPosterior::unpack(std::span<const double> theta) const {
    const std::size_t d = ss_.d;
    PpcaParamsHouseholder p;
    std::vector<DenseVector> vs(q_);
    for (std::size_t k = 0; k < q_; ++k) vs[k].resize(d - k);
    p.chain = HouseholderChain(d, q_, std::move(vs));
    p.chain.set_from_flat(theta.subspan(0, chain_params_));
    p.y_sigma.y.assign(theta.begin() + chain_params_, theta.begin() + chain_params_ + q_);
    p.mu.assign(theta.begin() + chain_params_ + q_,
                theta.begin() + chain_params_ + q_ + d);
    p.log_noise = theta[chain_params_ + q_ + d];
    return p;
}

ParamVector PpcaHouseholderPosterior::pack(const PpcaParamsHouseholder& params) const {
    if (params.chain.D != ss_.d || params.chain.Q != q_ ||
        params.y_sigma.y.size() != q_ || params.mu.size() != ss_.d)
        throw DimensionMismatch("pack: parameter shapes differ from model");
    ParamVector theta(dim());
    params.chain.write_flat(std::span<double>(theta.data(), chain_params_));
    std::size_t pos = chain_params_;
    for (std::size_t i = 0; i < q_; ++i) theta[pos++] = params.y_sigma.y[i];
    for (std::size_t i = 0; i < ss_.d; ++i) theta[pos++] = params.mu[i];
    theta[pos] = params.log_noise;
    return theta;
}

PpcaHouseholderPosterior::Decoded
PpcaHouseholderPosterior::decode(std::span<const double> theta) const {
    const PpcaParamsHouseholder p = unpack(theta);
    Decoded out;
    out.U = apply_chain(p.chain).U;
    out.sigma = ordered_forward(p.y_sigma).values.sigma;
    out.W = out.U;
    for (std::size_t i = 0; i < out.W.rows; ++i)
        for (std::size_t j = 0; j < q_; ++j) out.W(i, j) *= out.sigma[j];
    out.mu = p.mu;
    out.sigma_noise = std::exp(p.log_noise);
    return out;
}

bool PpcaHouseholderPosterior::gibbs_refresh(ParamVector& theta, RandomStream& rng) const {
    const Decoded dec = decode(theta);
    DenseVector lambda(q_);
    for (std::size_t j = 0; j < q_; ++j) lambda[j] = dec.sigma[j] * dec.sigma[j];
    const DenseVector mu =
        draw_mu_conditional(ss_, dec.U, lambda, dec.sigma_noise * dec.sigma_noise,
                            priors_.mu_sd, rng);
    const std::size_t off = chain_params_ + q_;
    for (std::size_t i = 0; i < ss_.d; ++i) theta[off + i] = mu[i];
    return true;
}

double PpcaHouseholderPosterior::likelihood_term(std::span<const double> theta) const {
    const Decoded dec = decode(theta);
    return detail::loglik_core(ss_, dec.W, dec.mu,
                               dec.sigma_noise * dec.sigma_noise, nullptr, nullptr,
                               nullptr);
}

double PpcaHouseholderPosterior::eval(std::span<const double> theta,
                                      std::span<double> grad) const {
    const std::size_t d = ss_.d;
    const PpcaParamsHouseholder p = unpack(theta);

    const StiefelPoint frame = apply_chain(p.chain);
    const OrderedForwardResult fwd = ordered_forward(p.y_sigma);
    const DenseVector& sigma = fwd.values.sigma;
    const double noise_var = std::exp(2.0 * p.log_noise);

    DenseMatrix w = frame.U;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < q_; ++j) w(i, j) *= sigma[j];

    DenseMatrix g_w;
    DenseVector g_mu;
    double g_nv = 0.0;
    double value = detail::loglik_core(ss_, w, p.mu, noise_var, &g_w, &g_mu, &g_nv);

    // Split dL/dW between the frame and the scales: W = U diag(sigma).
    DenseMatrix g_u(d, q_);
    DenseVector g_sigma(q_, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < q_; ++j) {
            g_u(i, j) = g_w(i, j) * sigma[j];
            g_sigma[j] += g_w(i, j) * frame.U(i, j);
        }

    const std::vector<DenseVector> g_vs = chain_gradient(p.chain, g_u);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < q_; ++k) {
        const DenseVector& v = p.chain.vs[k];
        value += gaussian_log_density(v);
        for (std::size_t i = 0; i < v.size(); ++i) grad[pos++] = g_vs[k][i] - v[i];
    }

    value += singular_value_log_density(fwd.values, d, q_) + fwd.log_jacobian;
    const DenseVector g_prior_sigma = singular_value_log_density_grad(fwd.values, d, q_);
    DenseVector g_sigma_total(q_);
    for (std::size_t i = 0; i < q_; ++i) g_sigma_total[i] = g_sigma[i] + g_prior_sigma[i];
    const DenseVector g_y = ordered_pullback(p.y_sigma, g_sigma_total);
    for (std::size_t i = 0; i < q_; ++i) grad[pos++] = g_y[i] + 1.0;

    const double mu_var = priors_.mu_sd * priors_.mu_sd;
    for (std::size_t i = 0; i < d; ++i) {
        value += -0.5 * p.mu[i] * p.mu[i] / mu_var;
        grad[pos++] = g_mu[i] - p.mu[i] / mu_var;
    }

    double g_noise_prior = 0.0;
    value += detail::noise_log_prior(p.log_noise, priors_, &g_noise_prior);
    grad[pos] = g_nv * 2.0 * noise_var + g_noise_prior;
    return value;
}

}  // namespace sppca
