// Synthetic ground-truth scenarios and instrument similarities.
//
// A Scenario holds the structural parameters of the simulated world: the
// instrument effect matrix alpha (rows are instruments), the true causal
// effect beta, and the confounder model (mixing matrix M and direction v).
// Generated scenarios are sparse by construction: beta and the first d_id
// instruments live on the first d_id treatment coordinates, so a subset of
// d_id instruments always suffices to identify beta in full. The remaining
// instruments form two noisy clusters around a pair of the identifying ones.

#pragma once

#include "underiv/linalg.hpp"
#include "underiv/rng.hpp"
#include "underiv/serialize.hpp"
#include "underiv/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace underiv {

struct Scenario {
    int n_iv = 0;           // number of available instruments
    int d_x = 0;            // treatment dimension
    int d_id = 0;           // instruments sufficient for full identification
    Matrix alpha;           // n_iv x d_x, rows are instruments
    Vector beta;            // length d_x, true causal effect
    Matrix mixing;          // d_x x d_x confounder mixing M
    Vector conf_dir;        // length d_x, unit norm confounder direction v
    std::uint64_t seed = 0;
};

struct SimilarityMatrix {
    Matrix sim;             // n_iv x n_iv, symmetric, unit diagonal, in [0,1]
};

// Trace of the cluster construction, exposed for tests only.
namespace detail {
struct ScenarioTrace {
    int center_a = -1;
    int center_b = -1;
    IndexList assigned_center;  // one entry per extra row d_id..n_iv-1
};
} // namespace detail

inline void validate_scenario(const Scenario& s) {
    if (s.n_iv <= 0 || s.d_x <= 0 || s.d_id <= 0)
        throw std::invalid_argument("scenario: dimensions must be positive");
    if (s.alpha.rows() != s.n_iv || s.alpha.cols() != s.d_x)
        throw std::invalid_argument("scenario: alpha has wrong shape");
    if (s.beta.size() != s.d_x || s.conf_dir.size() != s.d_x)
        throw std::invalid_argument("scenario: beta/conf_dir have wrong length");
    if (s.mixing.rows() != s.d_x || s.mixing.cols() != s.d_x)
        throw std::invalid_argument("scenario: mixing has wrong shape");
    if (std::abs(s.conf_dir.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("scenario: conf_dir is not unit norm");

    // beta must lie in the row span of the first d_id instruments.
    Matrix proj = row_span_projector(s.alpha.topRows(s.d_id));
    if ((s.beta - proj * s.beta).norm() >= 1e-8)
        throw std::invalid_argument("scenario: beta not in span of identifying instruments");

    if (numerical_rank(s.alpha, 1e-10) != std::min(s.n_iv, s.d_x))
        throw std::invalid_argument("scenario: alpha is rank deficient");
}

namespace detail {

inline void sample_scenario_once(int n_iv, int d_x, int d_id, Rng& rng,
                                 Scenario& s, ScenarioTrace& trace) {
    s.alpha = Matrix::Zero(n_iv, d_x);
    s.beta = Vector::Zero(d_x);

    // Nonzero support: the first d_id coordinates.
    for (int j = 0; j < d_id; ++j) s.beta(j) = rng.uniform(-5.0, 5.0);
    for (int i = 0; i < d_id; ++i)
        for (int j = 0; j < d_id; ++j) s.alpha(i, j) = rng.uniform(-5.0, 5.0);

    // Two fixed cluster centers among the identifying instruments; each extra
    // instrument is one of the centers plus entrywise standard Gaussian noise.
    trace.center_a = static_cast<int>(rng.below(static_cast<std::uint64_t>(d_id)));
    trace.center_b = static_cast<int>(rng.below(static_cast<std::uint64_t>(d_id - 1)));
    if (trace.center_b >= trace.center_a) ++trace.center_b;
    trace.assigned_center.clear();
    for (int i = d_id; i < n_iv; ++i) {
        const int center = (rng.below(2) == 0) ? trace.center_a : trace.center_b;
        trace.assigned_center.push_back(center);
        for (int j = 0; j < d_x; ++j) s.alpha(i, j) = s.alpha(center, j) + rng.normal();
    }

    s.mixing = Matrix(d_x, d_x);
    for (int i = 0; i < d_x; ++i)
        for (int j = 0; j < d_x; ++j) s.mixing(i, j) = rng.normal();

    // Uniform direction on the sphere.
    Vector dir(d_x);
    do {
        for (int j = 0; j < d_x; ++j) dir(j) = rng.normal();
    } while (dir.norm() < 1e-12);
    s.conf_dir = dir / dir.norm();
}

inline Scenario generate_scenario_traced(int n_iv, int d_x, int d_id,
                                         std::uint64_t seed, ScenarioTrace* trace_out) {
    if (d_id < 2)
        throw std::invalid_argument("generate_scenario: d_id must be at least 2");
    if (d_id > std::min(n_iv, d_x))
        throw std::invalid_argument("generate_scenario: d_id must not exceed min(n_iv, d_x)");

    Scenario s;
    s.n_iv = n_iv;
    s.d_x = d_x;
    s.d_id = d_id;
    s.seed = seed;

    Rng rng(seed, /*stream=*/0x5Cull);
    ScenarioTrace trace;
    const int full_rank = std::min(n_iv, d_x);
    for (int attempt = 0; attempt < 100; ++attempt) {
        sample_scenario_once(n_iv, d_x, d_id, rng, s, trace);
        if (numerical_rank(s.alpha, 1e-10) == full_rank) {
            if (trace_out) *trace_out = trace;
            return s;
        }
    }
    throw std::runtime_error("generate_scenario: rank condition failed after 100 attempts");
}

} // namespace detail

inline Scenario generate_scenario(int n_iv, int d_x, int d_id, std::uint64_t seed) {
    return detail::generate_scenario_traced(n_iv, d_x, d_id, seed, nullptr);
}

// Pairwise |cosine| similarities of the alpha rows, optionally computed on a
// noise-perturbed copy of alpha (entrywise Gaussian with sd noise_sd).
inline SimilarityMatrix compute_similarities(const Scenario& scenario, double noise_sd,
                                             std::uint64_t seed) {
    if (noise_sd < 0.0)
        throw std::invalid_argument("compute_similarities: noise_sd must be nonnegative");
    const int n = scenario.n_iv;
    for (int i = 0; i < n; ++i)
        if (scenario.alpha.row(i).norm() < 1e-12)
            throw std::invalid_argument("compute_similarities: alpha has a zero row");

    Matrix noisy;
    if (noise_sd == 0.0) {
        noisy = scenario.alpha;
    } else {
        for (std::uint64_t substream = 0;; ++substream) {
            if (substream >= 100)
                throw std::runtime_error("compute_similarities: noisy alpha kept a zero row");
            Rng rng(seed, derive_seed(0x51Dull, substream));
            noisy = scenario.alpha;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < scenario.d_x; ++j) noisy(i, j) += noise_sd * rng.normal();
            bool ok = true;
            for (int i = 0; i < n && ok; ++i)
                if (noisy.row(i).norm() < 1e-12) ok = false;
            if (ok) break;
        }
    }

    SimilarityMatrix out;
    out.sim = Matrix::Zero(n, n);
    Vector norms(n);
    for (int i = 0; i < n; ++i) norms(i) = noisy.row(i).norm();
    for (int i = 0; i < n; ++i) {
        out.sim(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            double c = std::abs(noisy.row(i).dot(noisy.row(j))) / (norms(i) * norms(j));
            c = std::min(1.0, std::max(0.0, c));
            out.sim(i, j) = c;
            out.sim(j, i) = c;
        }
    }
    return out;
}

inline json scenario_to_json(const Scenario& s) {
    return json{{"n_iv", s.n_iv},
                {"d_x", s.d_x},
                {"d_id", s.d_id},
                {"seed", s.seed},
                {"alpha", matrix_to_json_rows(s.alpha)},
                {"beta", vector_to_json(s.beta)},
                {"mixing", matrix_to_json_rows(s.mixing)},
                {"conf_dir", vector_to_json(s.conf_dir)}};
}

inline Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.n_iv = j.at("n_iv").get<int>();
    s.d_x = j.at("d_x").get<int>();
    s.d_id = j.at("d_id").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.alpha = matrix_from_json_rows(j.at("alpha"));
    s.beta = vector_from_json(j.at("beta"));
    s.mixing = matrix_from_json_rows(j.at("mixing"));
    s.conf_dir = vector_from_json(j.at("conf_dir"));
    return s;
}

} // namespace underiv
