#pragma once

#include <cstddef>
#include <vector>

#include "sppca/errors.hpp"
#include "sppca/rng.hpp"

namespace sppca {

using DenseVector = std::vector<double>;

// Dense row-major matrix. Deliberately minimal: this library only needs
// small/medium dense algebra (D up to a few hundred), so the kernels below
// are plain loops with no blocking.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

// y += alpha * x
void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y);
void axpy(double alpha, const DenseVector& x, DenseVector& y);

double frobenius_norm(const DenseMatrix& a);
double dot(const DenseVector& a, const DenseVector& b);
double norm2(const DenseVector& a);

DenseVector matvec(const DenseMatrix& a, const DenseVector& x);

// A^T A and A A^T, accumulated symmetrically.
DenseMatrix gram(const DenseMatrix& a);
DenseMatrix outer_gram(const DenseMatrix& a);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
struct CholeskyFactor {
    DenseMatrix lower;

    std::size_t dim() const { return lower.rows; }
    double log_det() const;                              // of the factored matrix
    DenseVector solve(const DenseVector& b) const;       // A x = b
    DenseMatrix solve(const DenseMatrix& b) const;       // A X = B, column-wise
    DenseMatrix inverse() const;
};

// Factors A = L L^T. Requires A square and symmetric within a scaled 1e-10
// tolerance. Any pivot at or below 1e-12 * max(diag A) raises
// NotPositiveDefinite carrying the pivot index.
CholeskyFactor cholesky(const DenseMatrix& a);

struct SymEigen {
    DenseVector values;   // descending
    DenseMatrix vectors;  // orthonormal columns, A = V diag(values) V^T
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// The input is symmetrized as (A + A^T)/2 before iterating; convergence is
// declared when the off-diagonal Frobenius norm drops below 1e-12 times the
// initial Frobenius norm, with a budget of 100 sweeps (NoConvergence after).
SymEigen sym_eigen(const DenseMatrix& a);

// Orthonormal factor of the QR decomposition (R with positive diagonal,
// which makes the factor unique) of a D x Q matrix of iid standard normals
// drawn from rng. For Q = D this samples the orthogonal group with uniform
// (rotation-invariant) law; for Q < D, the column frame is uniform as well.
DenseMatrix qr_of_gaussian(std::size_t d, std::size_t q, RandomStream& rng);

}  // namespace sppca
