#pragma once

#include <cstddef>

#include "sppca/ppca.hpp"
#include "sppca/tensor.hpp"

namespace sppca {

// Closed-form maximum-likelihood factor model fit. W_ml is the canonical
// representative with the rotational ambiguity resolved to the identity and
// each column's sign fixed so its first entry is non-negative.
struct MlPpcaSolution {
    DenseVector mu_ml;       // column means
    DenseMatrix W_ml;        // D x Q
    double noise_var_ml;     // mean of the trailing D - Q eigenvalues
    DenseVector eigvals;     // all D covariance eigenvalues, descending
    std::size_t q = 0;
};

// Eigendecomposition route: C = (1/N) Ytilde^T Ytilde, W = U_Q
// (Lambda_Q - noise_var I)^(1/2). Throws RankDeficient when a retained
// eigenvalue does not exceed the noise estimate, and DimensionMismatch
// unless 1 <= Q < D.
MlPpcaSolution fit_ml_ppca(const PpcaData& data, std::size_t q);

// Posterior-mean latent coordinates under the ML parameters:
//   x_n = (W^T W + noise_var I)^(-1) W^T (y_n - mu). Rows of Y map to rows
// of the returned N x Q matrix. As noise_var -> 0 this approaches the
// whitened classical projection.
DenseMatrix project_latent_ppca(const MlPpcaSolution& ml, const DenseMatrix& y);

struct ClassicalPca {
    DenseMatrix components;   // D x Q, sign-fixed columns
    DenseVector eigvals;      // top Q, descending
    DenseMatrix projections;  // N x Q whitened coordinates
    DenseVector mu;
};

// Classical whitened PCA: x_n = Lambda_Q^(-1/2) U_Q^T (y_n - mu). Requires
// Q <= D; throws ZeroEigenvalue when a retained eigenvalue is at the
// numerical floor so whitening would blow up.
ClassicalPca classical_pca(const DenseMatrix& y, std::size_t q);

}  // namespace sppca
