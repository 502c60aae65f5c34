// Combination of projected estimates across experiments.
//
// Given per-experiment estimates of the projections of a common effect onto
// different instrumented subspaces, the combined estimate is the minimum-norm
// vector compatible with all of them: the least-squares solution of the
// stacked system  V_i V_i^T gamma = beta_hat_i  for all i. Its solution is
// the pseudoinverse applied to the stacked right-hand side, which projects
// onto the union of the instrumented subspaces.

#pragma once

#include "underiv/estimation.hpp"
#include "underiv/linalg.hpp"
#include "underiv/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace underiv {

struct CombineResult {
    Vector combined;       // length d_x, minimum-norm compatible vector
    Matrix combined_basis; // d_x x R, orthonormal basis of the union subspace
};

inline CombineResult combine(const std::vector<ProjectedEstimate>& estimates) {
    if (estimates.empty())
        throw std::invalid_argument("combine: need at least one estimate");
    const Eigen::Index d_x = estimates.front().beta_hat.size();
    Eigen::Index total_rank = 0;
    for (const auto& est : estimates) {
        if (est.beta_hat.size() != d_x || est.basis.rows() != d_x)
            throw std::invalid_argument("combine: estimates disagree on d_x");
        total_rank += est.basis.cols();
    }

    // A single constraint is already its own minimum-norm solution.
    if (estimates.size() == 1)
        return CombineResult{estimates.front().beta_hat, estimates.front().basis};

    Matrix stacked(static_cast<Eigen::Index>(estimates.size()) * d_x, d_x);
    Vector rhs(static_cast<Eigen::Index>(estimates.size()) * d_x);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& est = estimates[i];
        stacked.middleRows(static_cast<Eigen::Index>(i) * d_x, d_x) =
            est.basis * est.basis.transpose();
        rhs.segment(static_cast<Eigen::Index>(i) * d_x, d_x) = est.beta_hat;
    }

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(stacked);
    CombineResult out;
    out.combined = cod.solve(rhs);

    Matrix concat(d_x, total_rank);
    Eigen::Index col = 0;
    for (const auto& est : estimates) {
        concat.middleCols(col, est.basis.cols()) = est.basis;
        col += est.basis.cols();
    }
    out.combined_basis = column_space_basis(concat, 1e-10);
    return out;
}

// Sample-size-weighted average of the per-round intercepts. The intercept is
// identified in every round, so it bypasses the projection machinery.
inline double combine_intercepts(const std::vector<ProjectedEstimate>& estimates) {
    double weighted = 0.0;
    double total_n = 0.0;
    for (const auto& est : estimates) {
        weighted += static_cast<double>(est.n) * est.intercept;
        total_n += static_cast<double>(est.n);
    }
    return total_n > 0.0 ? weighted / total_n : 0.0;
}

// 1 - |cos angle| between a coordinate axis and its projection onto the
// subspace; 0 iff the axis lies in the subspace, 1 if the projection vanishes.
inline double identification_distance(const Matrix& combined_basis, int coordinate) {
    const Eigen::Index d_x = combined_basis.rows();
    if (coordinate < 0 || coordinate >= d_x)
        throw std::invalid_argument("identification_distance: coordinate out of range");
    Vector w = combined_basis * combined_basis.row(coordinate).transpose();
    const double norm = w.norm();
    if (norm < 1e-12) return 1.0;
    double dist = 1.0 - std::abs(w(coordinate)) / norm;
    return std::min(1.0, std::max(0.0, dist));
}

// Fraction of coordinates with identification distance below delta.
inline double identified_fraction(const Matrix& combined_basis, double delta) {
    const int d_x = static_cast<int>(combined_basis.rows());
    int count = 0;
    for (int i = 0; i < d_x; ++i)
        if (identification_distance(combined_basis, i) < delta) ++count;
    return static_cast<double>(count) / d_x;
}

// Uniform bound on the absolute error of every unidentified component,
// sqrt(|beta|^2 - |combined|^2), clamped at zero when sampling noise pushes
// the combined norm above the norm estimate.
inline double error_bound(double beta_norm_estimate, const Vector& combined) {
    const double rad = beta_norm_estimate * beta_norm_estimate - combined.squaredNorm();
    return std::sqrt(std::max(0.0, rad));
}

// Accumulated state across experimental rounds: per-round estimates, the
// combined minimum-norm estimate, and the identified-component set at the
// configured threshold delta.
class RunningEstimate {
public:
    explicit RunningEstimate(double delta) : delta_(delta) {
        if (delta <= 0.0 || delta > 1.0)
            throw std::invalid_argument("RunningEstimate: delta must be in (0, 1]");
    }

    void append(const ProjectedEstimate& est) {
        rounds_.push_back(est);
        CombineResult res = combine(rounds_);
        combined_ = std::move(res.combined);
        combined_basis_ = std::move(res.combined_basis);
        intercept_ = combine_intercepts(rounds_);

        const int d_x = static_cast<int>(combined_.size());
        cdist_.resize(d_x);
        identified_.clear();
        for (int i = 0; i < d_x; ++i) {
            cdist_(i) = identification_distance(combined_basis_, i);
            if (cdist_(i) < delta_) identified_.push_back(i);
        }
    }

    // Stopping-criterion path: the full effect is identified.
    void mark_all_identified() {
        identified_.resize(combined_.size());
        for (std::size_t i = 0; i < identified_.size(); ++i) identified_[i] = static_cast<int>(i);
    }

    const std::vector<ProjectedEstimate>& rounds() const { return rounds_; }
    const Vector& combined() const { return combined_; }
    const Matrix& combined_basis() const { return combined_basis_; }
    const IndexList& identified() const { return identified_; }
    const Vector& per_coordinate_cdist() const { return cdist_; }
    double combined_intercept() const { return intercept_; }
    double delta() const { return delta_; }

private:
    double delta_;
    std::vector<ProjectedEstimate> rounds_;
    Vector combined_;
    Matrix combined_basis_;
    IndexList identified_;
    Vector cdist_;
    double intercept_ = 0.0;
};

} // namespace underiv
