#include "sppca/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sppca {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw DimensionMismatch(what);
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

void check_symmetric(const DenseMatrix& a, const char* who) {
    const double tol = 1e-10 * (1.0 + max_abs(a));
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = i + 1; j < a.cols; ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol)
                throw NotSymmetric(std::string(who) + ": input is not symmetric");
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y) {
    require(x.same_shape(y), "axpy: shapes differ");
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

void axpy(double alpha, const DenseVector& x, DenseVector& y) {
    require(x.size() == y.size(), "axpy: lengths differ");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

double dot(const DenseVector& a, const DenseVector& b) {
    require(a.size() == b.size(), "dot: lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const DenseVector& a) { return std::sqrt(dot(a, a)); }

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
    require(a.cols == x.size(), "matvec: dimensions differ");
    DenseVector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += arow[j] * x[j];
        y[i] = s;
    }
    return y;
}

DenseMatrix gram(const DenseMatrix& a) {
    DenseMatrix g(a.cols, a.cols);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double* row = &a.data[n * a.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::size_t j = i; j < a.cols; ++j) g(i, j) += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < a.cols; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

DenseMatrix outer_gram(const DenseMatrix& a) {
    DenseMatrix g(a.rows, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ri = &a.data[i * a.cols];
        for (std::size_t j = i; j < a.rows; ++j) {
            const double* rj = &a.data[j * a.cols];
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += ri[k] * rj[k];
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return g;
}

double CholeskyFactor::log_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows; ++i) s += std::log(lower(i, i));
    return 2.0 * s;
}

DenseVector CholeskyFactor::solve(const DenseVector& b) const {
    const std::size_t n = dim();
    require(b.size() == n, "cholesky solve: length differs");
    DenseVector x = b;
    for (std::size_t i = 0; i < n; ++i) {  // L y = b
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * x[j];
        x[i] = s / lower(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {  // L^T x = y
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lower(j, i) * x[j];
        x[i] = s / lower(i, i);
    }
    return x;
}

DenseMatrix CholeskyFactor::solve(const DenseMatrix& b) const {
    const std::size_t n = dim();
    require(b.rows == n, "cholesky solve: row count differs");
    DenseMatrix x = b;
    for (std::size_t c = 0; c < b.cols; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * x(j, c);
            x(i, c) = s / lower(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t j = i + 1; j < n; ++j) s -= lower(j, i) * x(j, c);
            x(i, c) = s / lower(i, i);
        }
    }
    return x;
}

DenseMatrix CholeskyFactor::inverse() const {
    DenseMatrix inv = solve(DenseMatrix::identity(dim()));
    for (std::size_t i = 0; i < inv.rows; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double v = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = v;
            inv(j, i) = v;
        }
    return inv;
}

CholeskyFactor cholesky(const DenseMatrix& a) {
    require(a.rows == a.cols, "cholesky: matrix not square");
    check_symmetric(a, "cholesky");
    const std::size_t n = a.rows;
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    const double floor = 1e-12 * max_diag;

    DenseMatrix l(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        double pivot = a(k, k);
        for (std::size_t j = 0; j < k; ++j) pivot -= l(k, j) * l(k, j);
        if (!std::isfinite(pivot) || pivot <= floor)
            throw NotPositiveDefinite(
                "cholesky: pivot " + std::to_string(k) + " below positivity floor", k);
        const double lkk = std::sqrt(pivot);
        l(k, k) = lkk;
        for (std::size_t i = k + 1; i < n; ++i) {
            double s = a(i, k);
            for (std::size_t j = 0; j < k; ++j) s -= l(i, j) * l(k, j);
            l(i, k) = s / lkk;
        }
    }
    return CholeskyFactor{std::move(l)};
}

namespace {

double off_diag_norm(const DenseMatrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j) s += m(i, j) * m(i, j);
    return std::sqrt(2.0 * s);
}

}  // namespace

SymEigen sym_eigen(const DenseMatrix& a) {
    require(a.rows == a.cols, "sym_eigen: matrix not square");
    check_symmetric(a, "sym_eigen");
    const std::size_t n = a.rows;

    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
    DenseMatrix v = DenseMatrix::identity(n);

    const double threshold = 1e-12 * frobenius_norm(m);
    int sweeps = 0;
    while (off_diag_norm(m) > threshold) {
        if (++sweeps > 100)
            throw NoConvergence("sym_eigen: Jacobi did not converge in 100 sweeps");
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                m(p, p) -= t * apq;
                m(q, q) += t * apq;
                m(p, q) = 0.0;
                m(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double mrp = m(r, p);
                    const double mrq = m(r, q);
                    m(r, p) = mrp - s * (mrq + tau * mrp);
                    m(p, r) = m(r, p);
                    m(r, q) = mrq + s * (mrp - tau * mrq);
                    m(q, r) = m(r, q);
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v(r, p);
                    const double vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return m(i, i) > m(j, j); });

    SymEigen out;
    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = m(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

DenseMatrix qr_of_gaussian(std::size_t d, std::size_t q, RandomStream& rng) {
    if (q < 1 || q > d) throw DimensionMismatch("qr_of_gaussian: need 1 <= Q <= D");
    for (;;) {
        DenseMatrix z(d, q);
        for (double& x : z.data) x = rng.normal();

        // Modified Gram-Schmidt with one re-orthogonalization pass. The
        // column norms are the diagonal of R, positive by construction, so
        // this is the unique positive-diagonal orthonormal factor.
        DenseMatrix m(d, q);
        bool ok = true;
        for (std::size_t j = 0; j < q && ok; ++j) {
            DenseVector col(d);
            for (std::size_t i = 0; i < d; ++i) col[i] = z(i, j);
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < j; ++k) {
                    double proj = 0.0;
                    for (std::size_t i = 0; i < d; ++i) proj += m(i, k) * col[i];
                    for (std::size_t i = 0; i < d; ++i) col[i] -= proj * m(i, k);
                }
            }
            const double nrm = norm2(col);
            if (nrm < 1e-8) {
                ok = false;  // astronomically unlikely; resample
                break;
            }
            for (std::size_t i = 0; i < d; ++i) m(i, j) = col[i] / nrm;
        }
        if (ok) return m;
    }
}

}  // namespace sppca
