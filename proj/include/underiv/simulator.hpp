// Randomized and observational experiments against a Scenario.
//
// Each sample row follows x = z * alpha_S + e * M and y = x . beta + e . v,
// with z i.i.d. Rademacher over the selected instruments and e i.i.d.
// standard Gaussian. Observational data clamps all instruments to zero.

#pragma once

#include "underiv/rng.hpp"
#include "underiv/scenario.hpp"
#include "underiv/serialize.hpp"
#include "underiv/types.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace underiv {

struct Dataset {
    Matrix z;                  // n x d_z, entries in {-1, +1}; zero columns if observational
    Matrix x;                  // n x d_x
    Vector y;                  // length n
    IndexList instrument_set;  // indices into [0, n_iv); empty for observational
};

// Copy of a scenario with the confounding channel switched off (M = 0, v = 0).
// Exists for exactness-based tests; the returned object no longer satisfies
// the unit-norm conf_dir invariant of generated scenarios.
inline Scenario make_noiseless(Scenario s) {
    s.mixing.setZero();
    s.conf_dir.setZero();
    return s;
}

namespace detail {

inline void check_instrument_set(const Scenario& scenario, const IndexList& set) {
    if (set.empty())
        throw std::invalid_argument("run_experiment: instrument set is empty");
    std::unordered_set<int> seen;
    for (int idx : set) {
        if (idx < 0 || idx >= scenario.n_iv)
            throw std::invalid_argument("run_experiment: instrument index out of range");
        if (!seen.insert(idx).second)
            throw std::invalid_argument("run_experiment: duplicate instrument index");
    }
}

// Core sampler. When latent_out is non-null the confounder draws e are
// returned as well; only tests use that path.
inline Dataset sample_experiment(const Scenario& scenario, const IndexList& instrument_set,
                                 int n, std::uint64_t seed, Matrix* latent_out) {
    const int d = static_cast<int>(instrument_set.size());
    const int d_x = scenario.d_x;

    Rng z_rng(seed, 0xA1ull);
    Rng e_rng(seed, 0xA2ull);

    Dataset ds;
    ds.instrument_set = instrument_set;
    ds.z = Matrix(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ds.z(i, j) = z_rng.rademacher();

    Matrix e(n, d_x);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d_x; ++j) e(i, j) = e_rng.normal();

    Matrix alpha_s(d, d_x);
    for (int k = 0; k < d; ++k) alpha_s.row(k) = scenario.alpha.row(instrument_set[k]);

    ds.x = ds.z * alpha_s + e * scenario.mixing;
    ds.y = ds.x * scenario.beta + e * scenario.conf_dir;

    if (latent_out) *latent_out = std::move(e);
    return ds;
}

} // namespace detail

inline Dataset run_experiment(const Scenario& scenario, const IndexList& instrument_set,
                              int n, std::uint64_t seed) {
    detail::check_instrument_set(scenario, instrument_set);
    if (n < static_cast<int>(instrument_set.size()) + 2)
        throw std::invalid_argument("run_experiment: need at least |instrument_set| + 2 samples");
    return detail::sample_experiment(scenario, instrument_set, n, seed, nullptr);
}

inline Dataset observational_data(const Scenario& scenario, int n, std::uint64_t seed) {
    if (n < 2)
        throw std::invalid_argument("observational_data: need at least 2 samples");
    Rng e_rng(seed, 0xA2ull);
    Dataset ds;
    ds.z = Matrix(n, 0);
    Matrix e(n, scenario.d_x);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < scenario.d_x; ++j) e(i, j) = e_rng.normal();
    ds.x = e * scenario.mixing;
    ds.y = ds.x * scenario.beta + e * scenario.conf_dir;
    return ds;
}

// CSV with header z_1..z_dz, x_1..x_dx, y.
inline void dataset_to_csv(const Dataset& ds, std::ostream& os) {
    const int d_z = static_cast<int>(ds.z.cols());
    const int d_x = static_cast<int>(ds.x.cols());
    for (int j = 0; j < d_z; ++j) os << "z_" << (j + 1) << ",";
    for (int j = 0; j < d_x; ++j) os << "x_" << (j + 1) << ",";
    os << "y\n";
    for (Eigen::Index i = 0; i < ds.y.size(); ++i) {
        for (int j = 0; j < d_z; ++j) os << format_double(ds.z(i, j)) << ",";
        for (int j = 0; j < d_x; ++j) os << format_double(ds.x(i, j)) << ",";
        os << format_double(ds.y(i)) << "\n";
    }
}

inline json dataset_to_json(const Dataset& ds) {
    return json{{"z", matrix_to_json_rows(ds.z)},
                {"x", matrix_to_json_rows(ds.x)},
                {"y", vector_to_json(ds.y)},
                {"instrument_set", ds.instrument_set}};
}

inline Dataset dataset_from_json(const json& j) {
    Dataset ds;
    ds.z = matrix_from_json_rows(j.at("z"));
    ds.x = matrix_from_json_rows(j.at("x"));
    ds.y = vector_from_json(j.at("y"));
    ds.instrument_set = j.at("instrument_set").get<IndexList>();
    // z may deserialize as 0x0 when observational; restore the row count.
    if (ds.z.cols() == 0) ds.z = Matrix(ds.x.rows(), 0);
    return ds;
}

} // namespace underiv
