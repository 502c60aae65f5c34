// Small dense linear-algebra helpers shared across the library.

#pragma once

#include "underiv/types.hpp"

#include <stdexcept>

namespace underiv {

// Numerical rank: number of singular values above rel_tol * sigma_max.
inline int numerical_rank(const Matrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return 0;
    const double cut = rel_tol * sv(0);
    int r = 0;
    while (r < sv.size() && sv(r) > cut) ++r;
    return r;
}

// Orthonormal basis of the column space, truncated at rel_tol * sigma_max.
inline Matrix column_space_basis(const Matrix& m, double rel_tol) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return Matrix(m.rows(), 0);
    const double cut = rel_tol * sv(0);
    int r = 0;
    while (r < sv.size() && sv(r) > cut) ++r;
    return svd.matrixU().leftCols(r);
}

// Moore-Penrose pseudoinverse via SVD with relative truncation.
inline Matrix pseudoinverse(const Matrix& m, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return Matrix::Zero(m.cols(), m.rows());
    const double cut = rel_tol * sv(0);
    Vector inv = Vector::Zero(sv.size());
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Orthogonal projector onto the row span of m.
inline Matrix row_span_projector(const Matrix& m, double rel_tol = 1e-12) {
    Matrix basis = column_space_basis(m.transpose(), rel_tol);
    return basis * basis.transpose();
}

} // namespace underiv
