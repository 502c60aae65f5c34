// Single-experiment estimation in the underspecified IV setting.
//
// estimate_projection is a pseudoinverse-based two-stage least squares: it
// regresses the treatments on the randomized instruments (plus intercept),
// takes the SVD of the first-stage predictions, and solves the second stage
// on the r leading singular directions only. The result estimates the
// orthogonal projection of the causal effect onto the instrumented subspace,
// together with an orthonormal basis of that subspace and an asymptotic
// covariance estimate.
//
// Both stages are computed through a thin QR of the centered instrument
// matrix followed by an SVD of the compressed d_z x d_x block, which is
// algebraically identical to the SVD of the full n x d_x prediction matrix
// but never squares the condition number.

#pragma once

#include "underiv/linalg.hpp"
#include "underiv/serialize.hpp"
#include "underiv/simulator.hpp"
#include "underiv/types.hpp"

#include <stdexcept>

namespace underiv {

struct ProjectedEstimate {
    Vector beta_hat;          // length d_x, estimate of P_alpha beta
    double intercept = 0.0;   // second-stage intercept (reported as component 0)
    Matrix basis;             // d_x x r, orthonormal columns spanning the instrumented subspace
    Vector singular_values;   // length r, nonincreasing, strictly positive
    Matrix cov;               // d_x x d_x, estimated asymptotic covariance
    IndexList instrument_set;
    int n = 0;
};

// (1/n) * pinv(alpha_hat) * z_cov^{-1} * pinv(alpha_hat^T) * var_eps_y.
// With Rademacher instruments z_cov is the identity and this reduces to
// (1/n) * pinv(alpha_hat^T alpha_hat) * var_eps_y.
inline Matrix estimate_covariance(const Matrix& alpha_hat, int n, double var_eps_y,
                                  const Matrix& z_cov) {
    const int d_z = static_cast<int>(alpha_hat.rows());
    if (n <= 0) throw std::invalid_argument("estimate_covariance: n must be positive");
    if (var_eps_y < 0.0) throw std::invalid_argument("estimate_covariance: negative variance");
    if (z_cov.rows() != d_z || z_cov.cols() != d_z)
        throw std::invalid_argument("estimate_covariance: z_cov has wrong shape");
    if (numerical_rank(alpha_hat, 1e-10) < d_z)
        throw std::invalid_argument("estimate_covariance: alpha_hat is not full row rank");

    Eigen::LLT<Matrix> llt(z_cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("estimate_covariance: z_cov is singular");
    Matrix z_cov_inv = llt.solve(Matrix::Identity(d_z, d_z));

    Matrix pinv = pseudoinverse(alpha_hat);  // d_x x d_z
    Matrix cov = (var_eps_y / n) * (pinv * z_cov_inv * pinv.transpose());
    return 0.5 * (cov + cov.transpose());
}

inline ProjectedEstimate estimate_projection(const Dataset& dataset, double rank_tol = 1e-8) {
    if (dataset.instrument_set.empty())
        throw std::invalid_argument("estimate_projection: dataset has no instruments");
    const int n = static_cast<int>(dataset.x.rows());
    const int d_z = static_cast<int>(dataset.z.cols());
    if (n <= d_z)
        throw std::invalid_argument("estimate_projection: need n > d_z samples");
    if (rank_tol <= 0.0)
        throw std::invalid_argument("estimate_projection: rank_tol must be positive");

    // Center all variables; this is equivalent to fitting intercepts in both
    // stages.
    const Vector z_mean = dataset.z.colwise().mean();
    const Vector x_mean = dataset.x.colwise().mean();
    const double y_mean = dataset.y.mean();
    Matrix zc = dataset.z.rowwise() - z_mean.transpose();
    Matrix xc = dataset.x.rowwise() - x_mean.transpose();
    Vector yc = dataset.y.array() - y_mean;

    // First stage. Q_r spans the column space of the centered instruments, so
    // Q_r (Q_r^T Xc) equals the first-stage predictions.
    Eigen::ColPivHouseholderQR<Matrix> qr(zc);
    const int r_z = static_cast<int>(qr.rank());
    Matrix q_thin = qr.householderQ() * Matrix::Identity(n, r_z);
    Matrix w = q_thin.transpose() * xc;  // r_z x d_x, same singular values as Xc_hat

    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0)
        throw std::runtime_error("estimate_projection: first stage has rank zero");
    const double cut = rank_tol * sv(0);
    int r = 0;
    while (r < sv.size() && sv(r) > cut) ++r;
    if (r == 0)
        throw std::runtime_error("estimate_projection: first stage has rank zero");

    ProjectedEstimate est;
    est.basis = svd.matrixV().leftCols(r);
    est.singular_values = sv.head(r);
    est.instrument_set = dataset.instrument_set;
    est.n = n;

    // Second stage on the rank-r subspace: beta_hat = V_r D_r^{-1} U_r^T Q^T yc.
    Vector qy = q_thin.transpose() * yc;
    Vector u_qy = svd.matrixU().leftCols(r).transpose() * qy;
    est.beta_hat = est.basis * (u_qy.array() / est.singular_values.array()).matrix();
    est.intercept = y_mean - x_mean.dot(est.beta_hat);

    // Residual variance of the second stage, dof-corrected for the d_z slopes
    // plus intercept.
    Vector resid = yc - q_thin * (w * est.beta_hat);
    const double var_eps_y = resid.squaredNorm() / std::max(1, n - d_z - 1);

    // Asymptotic covariance from the first-stage coefficients when they have
    // full row rank; otherwise fall back to the equivalent SVD form.
    Matrix alpha_hat = qr.solve(xc);
    Matrix z_cov = (zc.transpose() * zc) / n;
    if (r_z == d_z && numerical_rank(alpha_hat, 1e-10) == d_z) {
        est.cov = estimate_covariance(alpha_hat, n, var_eps_y, z_cov);
    } else {
        Vector inv_sq = est.singular_values.array().square().inverse();
        Matrix cov = var_eps_y * (est.basis * inv_sq.asDiagonal() * est.basis.transpose());
        est.cov = 0.5 * (cov + cov.transpose());
    }
    return est;
}

// Ordinary least squares of y on x with intercept; returns the slopes. Biased
// under confounding, kept as the baseline.
inline Vector estimate_ols(const Dataset& dataset) {
    const int n = static_cast<int>(dataset.x.rows());
    const int d_x = static_cast<int>(dataset.x.cols());
    if (n <= d_x)
        throw std::invalid_argument("estimate_ols: need n > d_x samples");
    Matrix xc = dataset.x.rowwise() - dataset.x.colwise().mean();
    Vector yc = dataset.y.array() - dataset.y.mean();
    Eigen::ColPivHouseholderQR<Matrix> qr(xc);
    if (static_cast<int>(qr.rank()) < d_x)
        throw std::runtime_error("estimate_ols: singular Gram matrix");
    return qr.solve(yc);
}

inline json projected_estimate_to_json(const ProjectedEstimate& est) {
    return json{{"beta_hat", vector_to_json(est.beta_hat)},
                {"intercept", est.intercept},
                {"basis", matrix_to_json_cols(est.basis)},
                {"singular_values", vector_to_json(est.singular_values)},
                {"cov", matrix_to_json_rows(est.cov)},
                {"instrument_set", est.instrument_set},
                {"n", est.n}};
}

inline ProjectedEstimate projected_estimate_from_json(const json& j) {
    ProjectedEstimate est;
    est.beta_hat = vector_from_json(j.at("beta_hat"));
    est.intercept = j.at("intercept").get<double>();
    est.basis = matrix_from_json_cols(j.at("basis"));
    est.singular_values = vector_from_json(j.at("singular_values"));
    est.cov = matrix_from_json_rows(j.at("cov"));
    est.instrument_set = j.at("instrument_set").get<IndexList>();
    est.n = j.at("n").get<int>();
    return est;
}

} // namespace underiv
