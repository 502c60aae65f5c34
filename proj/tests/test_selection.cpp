#include <catch2/catch.hpp>

#include "underiv/selection.hpp"

#include "oracles.hpp"

#include <cmath>
#include <set>

using namespace underiv;

namespace {

SimilarityMatrix sim_from(const Matrix& m) {
    SimilarityMatrix s;
    s.sim = m;
    return s;
}

SimilarityMatrix identity_sim(int n) { return sim_from(Matrix::Identity(n, n)); }
SimilarityMatrix ones_sim(int n) { return sim_from(Matrix::Ones(n, n)); }

SelectionConfig config_with(int cap, CostKind kind = CostKind::log) {
    SelectionConfig c;
    c.max_per_round = cap;
    c.cost_kind = kind;
    return c;
}

} // namespace

TEST_CASE("gain of maximally dissimilar instruments is the candidate size") {
    SimilarityMatrix id = identity_sim(6);
    REQUIRE(gain({0, 1}, {}, id) == 2.0);
    REQUIRE(gain({0, 1}, {3, 4, 5}, id) == 2.0);
    REQUIRE(gain({2, 3, 4}, {0}, id) == 3.0);
}

TEST_CASE("gain of identical instruments is zero") {
    SimilarityMatrix ones = ones_sim(5);
    REQUIRE(gain({0}, {}, ones) == 0.0);
    REQUIRE(gain({1, 2}, {3}, ones) == 0.0);
    REQUIRE(gain({0, 1, 2}, {3, 4}, ones) == 0.0);
}

TEST_CASE("gain hand example with mixed similarities") {
    Matrix m = Matrix::Identity(3, 3);
    m(0, 1) = m(1, 0) = 0.5;
    m(0, 2) = m(2, 0) = 0.2;
    m(1, 2) = m(2, 1) = 0.4;
    REQUIRE(gain({0, 1}, {2}, sim_from(m)) == Approx(1.2).epsilon(1e-12));
}

TEST_CASE("a lone candidate against nothing used gains zero") {
    REQUIRE(gain({2}, {}, identity_sim(4)) == 0.0);
}

TEST_CASE("gain rejects overlap and empty candidates") {
    SimilarityMatrix id = identity_sim(4);
    REQUIRE_THROWS_AS(gain({0, 1}, {1, 2}, id), std::invalid_argument);
    REQUIRE_THROWS_AS(gain({}, {0}, id), std::invalid_argument);
}

TEST_CASE("gain is invariant under instrument relabeling") {
    Rng rng(7);
    Matrix m = Matrix::Identity(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) m(i, j) = m(j, i) = rng.uniform01();

    std::vector<int> perm{3, 0, 4, 1, 2};
    Matrix pm(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            pm(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = m(i, j);

    IndexList cand{0, 2}, used{1, 4};
    IndexList cand_p, used_p;
    for (int i : cand) cand_p.push_back(perm[static_cast<std::size_t>(i)]);
    for (int i : used) used_p.push_back(perm[static_cast<std::size_t>(i)]);
    REQUIRE(gain(cand, used, sim_from(m)) ==
            Approx(gain(cand_p, used_p, sim_from(pm))).epsilon(1e-12));
}

TEST_CASE("cost function kinds and the cap sentinel") {
    SelectionConfig log_cfg = config_with(3, CostKind::log);
    REQUIRE(cost(1, log_cfg) == 0.0);
    REQUIRE(cost(3, log_cfg) == Approx(std::log(3.0)).epsilon(1e-12));
    REQUIRE(std::isinf(cost(4, log_cfg)));

    SelectionConfig lin_cfg = config_with(4, CostKind::linear);
    REQUIRE(cost(3, lin_cfg) == 3.0);
    REQUIRE(std::isinf(cost(5, lin_cfg)));

    SelectionConfig const_cfg = config_with(2, CostKind::constant);
    REQUIRE(cost(2, const_cfg) == 0.0);
    REQUIRE(std::isinf(cost(3, const_cfg)));

    REQUIRE_THROWS_AS(cost(0, log_cfg), std::invalid_argument);
}

TEST_CASE("score composes gain and cost") {
    SelectionConfig cfg = config_with(3, CostKind::log);
    REQUIRE(score({0, 1, 2}, {}, identity_sim(5), cfg) ==
            Approx(3.0 - std::log(3.0)).epsilon(1e-12));
    REQUIRE(score({0, 1}, {2}, ones_sim(5), cfg) == Approx(-std::log(2.0)).epsilon(1e-12));
    REQUIRE(score({0, 1, 2, 3}, {}, identity_sim(5), cfg) ==
            -std::numeric_limits<double>::infinity());
}

TEST_CASE("select_next ties break to the lexicographically smallest subset") {
    IndexList chosen = select_next({0, 1, 2, 3, 4}, {}, identity_sim(5), config_with(3));
    REQUIRE(chosen == IndexList{0, 1, 2});
}

TEST_CASE("select_next avoids clustered instruments") {
    Matrix m = Matrix::Identity(3, 3);
    m(0, 1) = m(1, 0) = 0.99;
    IndexList chosen = select_next({0, 1, 2}, {}, sim_from(m), config_with(2));
    REQUIRE(chosen.size() == 2);
    REQUIRE(std::find(chosen.begin(), chosen.end(), 2) != chosen.end());
}

TEST_CASE("select_next with a single remaining instrument") {
    REQUIRE(select_next({7}, {0, 1}, identity_sim(8), config_with(3)) == IndexList{7});
}

TEST_CASE("select_next never overlaps used instruments or exceeds the cap") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8;
        Matrix m = Matrix::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = rng.uniform01();
        IndexList remaining, used;
        for (int i = 0; i < n; ++i)
            (rng.below(2) == 0 ? remaining : used).push_back(i);
        if (remaining.empty()) remaining.push_back(used.back()), used.pop_back();

        SelectionConfig cfg = config_with(1 + static_cast<int>(rng.below(3)));
        IndexList chosen = select_next(remaining, used, sim_from(m), cfg);
        REQUIRE(!chosen.empty());
        REQUIRE(static_cast<int>(chosen.size()) <= cfg.max_per_round);
        for (int c : chosen) {
            REQUIRE(std::find(used.begin(), used.end(), c) == used.end());
            REQUIRE(std::find(remaining.begin(), remaining.end(), c) != remaining.end());
        }
        REQUIRE(select_next(remaining, used, sim_from(m), cfg) == chosen);
    }
}

TEST_CASE("greedy fallback handles pools beyond the enumeration budget") {
    const int n = 35;
    SelectionConfig cfg = config_with(6);  // C(35,6) alone exceeds 1e6
    IndexList remaining;
    for (int i = 0; i < n; ++i) remaining.push_back(i);
    IndexList chosen = select_next(remaining, {}, identity_sim(n), cfg);
    REQUIRE(chosen == IndexList{0, 1, 2, 3, 4, 5});
}

TEST_CASE("sis stops immediately when the first round spans beta") {
    Scenario s = make_noiseless(generate_scenario(2, 2, 2, 5));
    SimilarityMatrix sim = compute_similarities(s, 0.0, 0);
    NormEstimate ne{s.beta.norm(), NormProvider::oracle};
    SelectionConfig cfg = config_with(2, CostKind::constant);
    cfg.t_max = 4;
    cfg.epsilon = 1e-6;
    cfg.n_per_experiment = 64;

    SisTrajectory traj = run_sis(s, sim, ne, cfg, 12);
    REQUIRE(traj.stopped_early);
    REQUIRE(traj.stop_round == 1);
    REQUIRE(traj.records.size() == 1);
    REQUIRE(traj.records[0].stopped);
    REQUIRE(traj.running.identified().size() == 2);
    REQUIRE((traj.running.combined() - s.beta).norm() < 1e-8);
}

TEST_CASE("zero epsilon never stops early") {
    Scenario s = make_noiseless(generate_scenario(4, 4, 2, 15));
    SimilarityMatrix sim = compute_similarities(s, 0.0, 0);
    NormEstimate ne{s.beta.norm(), NormProvider::oracle};
    SelectionConfig cfg = config_with(2, CostKind::constant);
    cfg.t_max = 2;
    cfg.epsilon = 0.0;
    cfg.n_per_experiment = 64;

    SisTrajectory traj = run_sis(s, sim, ne, cfg, 3);
    REQUIRE_FALSE(traj.stopped_early);
    REQUIRE(traj.records.size() == 2);
}

TEST_CASE("noiseless norms are nondecreasing and bounded by the true norm") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Scenario s = make_noiseless(generate_scenario(6, 6, 3, 600 + seed));
        SimilarityMatrix sim = compute_similarities(s, 0.0, 0);
        NormEstimate ne{s.beta.norm(), NormProvider::oracle};
        SelectionConfig cfg = config_with(2);
        cfg.t_max = 6;
        cfg.epsilon = 1e-6;
        cfg.n_per_experiment = 64;

        SisTrajectory traj = run_sis(s, sim, ne, cfg, seed);
        for (std::size_t t = 1; t < traj.norms.size(); ++t)
            REQUIRE(traj.norms[t] >= traj.norms[t - 1] - 1e-10);
        for (double v : traj.norms) REQUIRE(v <= s.beta.norm() + 1e-10);
    }
}

TEST_CASE("trajectories use pairwise disjoint instrument sets") {
    Scenario s = generate_scenario(9, 7, 3, 900);
    SimilarityMatrix sim = compute_similarities(s, 1.0, 4);
    NormEstimate ne = oracle_norm(s, 0.0, 0);
    SelectionConfig cfg = config_with(3);
    cfg.t_max = 3;
    cfg.epsilon = 1e-12;
    cfg.n_per_experiment = 100;

    for (bool sis : {true, false}) {
        SisTrajectory traj = sis ? run_sis(s, sim, ne, cfg, 31)
                                 : run_random_baseline(s, ne, cfg, 31);
        std::set<int> seen;
        for (const auto& set : traj.chosen_sets)
            for (int i : set) REQUIRE(seen.insert(i).second);
    }
}

TEST_CASE("trajectories are deterministic in the seed") {
    Scenario s = generate_scenario(8, 6, 3, 21);
    SimilarityMatrix sim = compute_similarities(s, 1.0, 7);
    NormEstimate ne = oracle_norm(s, 0.0, 0);
    SelectionConfig cfg = config_with(2);
    cfg.t_max = 3;
    cfg.epsilon = 1e-12;
    cfg.n_per_experiment = 80;

    SisTrajectory a = run_sis(s, sim, ne, cfg, 5);
    SisTrajectory b = run_sis(s, sim, ne, cfg, 5);
    REQUIRE(a.chosen_sets == b.chosen_sets);
    REQUIRE(a.norms == b.norms);

    SisTrajectory r1 = run_random_baseline(s, ne, cfg, 6);
    SisTrajectory r2 = run_random_baseline(s, ne, cfg, 6);
    REQUIRE(r1.chosen_sets == r2.chosen_sets);
}

TEST_CASE("random baseline exhausts the pool and reaches full rank") {
    Scenario s = generate_scenario(6, 4, 2, 55);
    NormEstimate ne = oracle_norm(s, 0.0, 0);
    SelectionConfig cfg = config_with(3);
    cfg.t_max = 2;  // 2 * 3 >= 6 instruments
    cfg.epsilon = 1e-15;
    cfg.n_per_experiment = 200;

    SisTrajectory traj = run_random_baseline(s, ne, cfg, 8);
    std::set<int> seen;
    for (const auto& set : traj.chosen_sets) seen.insert(set.begin(), set.end());
    REQUIRE(seen.size() == 6);
    REQUIRE(traj.running.combined_basis().cols() == 4);  // rank(alpha) = min(6, 4)
}

TEST_CASE("ideal run uses every instrument once and nails beta noiselessly") {
    Scenario s = make_noiseless(generate_scenario(5, 4, 3, 66));
    NormEstimate ne{s.beta.norm(), NormProvider::oracle};
    SelectionConfig cfg = config_with(2);
    cfg.n_per_experiment = 100;
    cfg.epsilon = 1e-6;

    SisTrajectory traj = run_ideal(s, ne, cfg, 2);
    REQUIRE(traj.chosen_sets.size() == 1);
    REQUIRE(traj.chosen_sets[0] == IndexList{0, 1, 2, 3, 4});
    REQUIRE((traj.running.combined() - s.beta).norm() < 1e-8);
}

TEST_CASE("just-identified ideal matches classical 2SLS") {
    Scenario s = generate_scenario(3, 3, 3, 14);
    NormEstimate ne = oracle_norm(s, 0.0, 0);
    SelectionConfig cfg = config_with(3);
    cfg.n_per_experiment = 400;
    cfg.epsilon = 1e-12;

    SisTrajectory traj = run_ideal(s, ne, cfg, 77);
    Dataset d = run_experiment(s, {0, 1, 2}, 400, derive_seed(77, 0xE1ull, 1));
    Vector classical = oracles::classical_2sls(d.z, d.x, d.y);
    REQUIRE((traj.running.combined() - classical.head(3)).norm() < 1e-8);
}

TEST_CASE("trajectory serializes to JSON with per-round records") {
    Scenario s = generate_scenario(4, 3, 2, 10);
    SimilarityMatrix sim = compute_similarities(s, 0.0, 0);
    NormEstimate ne = oracle_norm(s, 0.0, 0);
    SelectionConfig cfg = config_with(2);
    cfg.t_max = 2;
    cfg.epsilon = 1e-12;
    cfg.n_per_experiment = 50;

    SisTrajectory traj = run_sis(s, sim, ne, cfg, 1);
    json j = trajectory_to_json(traj);
    REQUIRE(j.at("rounds").size() == traj.records.size());
    const json& first = j.at("rounds").at(0);
    for (const char* key : {"round", "instrument_set", "combined", "combined_norm",
                            "identified_indices", "per_coordinate_cdist", "error_bound"})
        REQUIRE(first.contains(key));
    REQUIRE(j.at("stopped_early").is_boolean());
    REQUIRE(j.at("norm_estimate").at("provider") == "oracle");
}
