// Test-side oracles, deliberately independent of the library's solve paths.

#pragma once

#include "underiv/rng.hpp"
#include "underiv/types.hpp"

#include <Eigen/Dense>

namespace oracles {

using underiv::Matrix;
using underiv::Vector;

// Explicit SVD-reconstructed pseudoinverse. The library's combiner goes
// through a complete orthogonal decomposition instead, so this is a genuinely
// different route.
inline Matrix pinv(const Matrix& a, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    Vector inv = Vector::Zero(sv.size());
    if (sv.size() > 0 && sv(0) > 0.0)
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > rel_tol * sv(0)) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Orthogonal projector onto the row span of a, built as pinv(a) * a.
inline Matrix rowspan_projector(const Matrix& a) {
    return pinv(a) * a;
}

// Classical 2SLS with intercepts in both stages, via explicit projection and
// matrix inverse; valid when the Gram matrix is invertible. Returns the
// slopes followed by the intercept as the last entry.
inline Vector classical_2sls(const Matrix& z, const Matrix& x, const Vector& y) {
    const Eigen::Index n = x.rows();
    Matrix z1(n, z.cols() + 1);
    z1.col(0).setOnes();
    z1.rightCols(z.cols()) = z;
    Matrix p_z = z1 * (z1.transpose() * z1).inverse() * z1.transpose();

    Matrix x1(n, x.cols() + 1);
    x1.col(0).setOnes();
    x1.rightCols(x.cols()) = x;

    Matrix gram = x1.transpose() * p_z * x1;
    Vector coef = gram.inverse() * (x1.transpose() * p_z * y);

    Vector out(x.cols() + 1);
    out.head(x.cols()) = coef.tail(x.cols());
    out(x.cols()) = coef(0);
    return out;
}

// Orthonormal basis with k columns drawn from a seeded Gaussian, via
// Householder QR.
inline Matrix random_orthonormal(int rows, int cols, underiv::Rng& rng) {
    Matrix g(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    return Matrix(qr.householderQ()) * Matrix::Identity(rows, cols);
}

} // namespace oracles
