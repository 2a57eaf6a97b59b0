#include "sppca/baselines.hpp"

#include <cmath>
#include <string>

#include "sppca/errors.hpp"

namespace sppca {

namespace {

struct CovEigen {
    DenseVector mu;
    SymEigen eig;
};

CovEigen covariance_eigen(const DenseMatrix& y) {
    const std::size_t n = y.rows;
    const std::size_t d = y.cols;
    DenseVector mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mu[j] += y(i, j);
    for (double& m : mu) m /= static_cast<double>(n);

    DenseMatrix centered = y;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= mu[j];
    DenseMatrix cov = gram(centered);
    for (double& v : cov.data) v /= static_cast<double>(n);
    return CovEigen{std::move(mu), sym_eigen(cov)};
}

// First-entry-positive convention, shared with the posterior postprocessing.
void fix_column_signs(DenseMatrix& m) {
    for (std::size_t j = 0; j < m.cols; ++j) {
        if (m(0, j) < 0.0)
            for (std::size_t i = 0; i < m.rows; ++i) m(i, j) = -m(i, j);
    }
}

}  // namespace

MlPpcaSolution fit_ml_ppca(const PpcaData& data, std::size_t q) {
    const std::size_t d = data.d();
    if (q < 1 || q >= d) throw DimensionMismatch("fit_ml_ppca: need 1 <= Q < D");
    CovEigen ce = covariance_eigen(data.Y);

    double noise = 0.0;
    for (std::size_t i = q; i < d; ++i) noise += ce.eig.values[i];
    noise /= static_cast<double>(d - q);

    const double tol = 1e-12 * std::max(1.0, ce.eig.values[0]);
    DenseMatrix w(d, q);
    for (std::size_t j = 0; j < q; ++j) {
        const double gap = ce.eig.values[j] - noise;
        if (gap <= tol)
            throw RankDeficient("fit_ml_ppca: eigenvalue " + std::to_string(j) +
                                " does not exceed the noise floor");
        const double scale = std::sqrt(gap);
        for (std::size_t i = 0; i < d; ++i) w(i, j) = ce.eig.vectors(i, j) * scale;
    }
    fix_column_signs(w);

    MlPpcaSolution sol;
    sol.mu_ml = std::move(ce.mu);
    sol.W_ml = std::move(w);
    sol.noise_var_ml = noise;
    sol.eigvals = std::move(ce.eig.values);
    sol.q = q;
    return sol;
}

DenseMatrix project_latent_ppca(const MlPpcaSolution& ml, const DenseMatrix& y) {
    const std::size_t d = ml.W_ml.rows;
    const std::size_t q = ml.W_ml.cols;
    if (y.cols != d) throw DimensionMismatch("project_latent_ppca: column count != D");

    DenseMatrix m = gram(ml.W_ml);  // W^T W, Q x Q
    for (std::size_t i = 0; i < q; ++i) m(i, i) += ml.noise_var_ml;
    const CholeskyFactor chol = cholesky(m);

    DenseMatrix x(y.rows, q);
    DenseVector centered(d), wty(q);
    for (std::size_t nrow = 0; nrow < y.rows; ++nrow) {
        for (std::size_t i = 0; i < d; ++i) centered[i] = y(nrow, i) - ml.mu_ml[i];
        for (std::size_t j = 0; j < q; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += ml.W_ml(i, j) * centered[i];
            wty[j] = s;
        }
        const DenseVector sol = chol.solve(wty);
        for (std::size_t j = 0; j < q; ++j) x(nrow, j) = sol[j];
    }
    return x;
}

ClassicalPca classical_pca(const DenseMatrix& y, std::size_t q) {
    if (y.rows < 2) throw DimensionMismatch("classical_pca: need at least 2 rows");
    const std::size_t d = y.cols;
    if (q < 1 || q > d) throw DimensionMismatch("classical_pca: need 1 <= Q <= D");
    CovEigen ce = covariance_eigen(y);

    const double tol = 1e-12 * std::max(1.0, ce.eig.values[0]);
    ClassicalPca out;
    out.components = DenseMatrix(d, q);
    out.eigvals.resize(q);
    for (std::size_t j = 0; j < q; ++j) {
        if (ce.eig.values[j] <= tol)
            throw ZeroEigenvalue("classical_pca: eigenvalue " + std::to_string(j) +
                                 " is numerically zero, cannot whiten");
        out.eigvals[j] = ce.eig.values[j];
        for (std::size_t i = 0; i < d; ++i) out.components(i, j) = ce.eig.vectors(i, j);
    }
    fix_column_signs(out.components);

    out.projections = DenseMatrix(y.rows, q);
    for (std::size_t nrow = 0; nrow < y.rows; ++nrow)
        for (std::size_t j = 0; j < q; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                s += out.components(i, j) * (y(nrow, i) - ce.mu[i]);
            out.projections(nrow, j) = s / std::sqrt(out.eigvals[j]);
        }
    out.mu = std::move(ce.mu);
    return out;
}

}  // namespace sppca
