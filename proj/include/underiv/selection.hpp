// Instrument-subset scoring and the sequential selection loop.
//
// Each round scores candidate subsets of the unused instruments by a
// dissimilarity gain minus an experiment cost, runs an experiment with the
// best subset, folds the new projected estimate into the running combined
// estimate, and stops early once the combined norm matches the externally
// estimated effect norm within epsilon.

#pragma once

#include "underiv/combination.hpp"
#include "underiv/estimation.hpp"
#include "underiv/norm.hpp"
#include "underiv/rng.hpp"
#include "underiv/scenario.hpp"
#include "underiv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace underiv {

enum class CostKind { log, linear, constant };

struct SelectionConfig {
    int t_max = 6;              // maximum experimental rounds
    int max_per_round = 3;      // hard cap on instruments per experiment
    CostKind cost_kind = CostKind::log;
    double epsilon = 1e-3;      // stopping tolerance on | norm_est - |combined| |
    double delta = 0.3;         // identification threshold on cdist
    int n_per_experiment = 1000;
    double rank_tol = 1e-8;     // first-stage rank tolerance passed to estimation

    void validate() const {
        if (t_max < 1 || max_per_round < 1)
            throw std::invalid_argument("SelectionConfig: t_max and max_per_round must be >= 1");
        if (epsilon < 0.0)
            throw std::invalid_argument("SelectionConfig: epsilon must be nonnegative");
        if (delta <= 0.0 || delta > 1.0)
            throw std::invalid_argument("SelectionConfig: delta must be in (0, 1]");
        if (n_per_experiment < 1)
            throw std::invalid_argument("SelectionConfig: n_per_experiment must be >= 1");
    }
};

enum class Strategy { sis, random, ideal };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::sis: return "sis";
        case Strategy::random: return "random";
        case Strategy::ideal: return "ideal";
    }
    return "sis";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "sis") return Strategy::sis;
    if (s == "random") return Strategy::random;
    if (s == "ideal") return Strategy::ideal;
    throw std::invalid_argument("unknown strategy: " + s);
}

inline std::string to_string(CostKind k) {
    switch (k) {
        case CostKind::log: return "log";
        case CostKind::linear: return "linear";
        case CostKind::constant: return "constant";
    }
    return "log";
}

inline CostKind cost_kind_from_string(const std::string& s) {
    if (s == "log") return CostKind::log;
    if (s == "linear") return CostKind::linear;
    if (s == "constant") return CostKind::constant;
    throw std::invalid_argument("unknown cost kind: " + s);
}

// Average dissimilarity of the candidate set against itself and the already
// used instruments. A lone candidate against nothing used scores 0: the only
// summand is the vanishing diagonal term.
inline double gain(const IndexList& candidate, const IndexList& used,
                   const SimilarityMatrix& sim) {
    if (candidate.empty())
        throw std::invalid_argument("gain: candidate set is empty");
    for (int i : candidate)
        if (std::find(used.begin(), used.end(), i) != used.end())
            throw std::invalid_argument("gain: candidate overlaps used set");

    const int denom = static_cast<int>(candidate.size()) + static_cast<int>(used.size()) - 1;
    if (denom == 0) return 0.0;

    double total = 0.0;
    for (int i : candidate) {
        for (int j : candidate) total += 1.0 - sim.sim(i, j);
        for (int j : used) total += 1.0 - sim.sim(i, j);
    }
    return total / denom;
}

// Cost of running one experiment with d instruments; infinite beyond the cap.
inline double cost(int d, const SelectionConfig& config) {
    if (d < 1) throw std::invalid_argument("cost: d must be >= 1");
    if (d > config.max_per_round) return std::numeric_limits<double>::infinity();
    switch (config.cost_kind) {
        case CostKind::log: return std::log(static_cast<double>(d));
        case CostKind::linear: return static_cast<double>(d);
        case CostKind::constant: return 0.0;
    }
    return 0.0;
}

inline double score(const IndexList& candidate, const IndexList& used,
                    const SimilarityMatrix& sim, const SelectionConfig& config) {
    const double c = cost(static_cast<int>(candidate.size()), config);
    if (std::isinf(c)) return -std::numeric_limits<double>::infinity();
    return gain(candidate, used, sim) - c;
}

namespace detail {

// Number of nonempty subsets of m elements with size <= cap, saturating.
inline double candidate_count(int m, int cap) {
    double total = 0.0;
    double binom = 1.0;
    for (int k = 1; k <= std::min(cap, m); ++k) {
        binom = binom * (m - k + 1) / k;
        total += binom;
        if (total > 1e18) return total;
    }
    return total;
}

template <typename Fn>
void for_each_combination(const IndexList& pool, int size, Fn&& fn) {
    const int m = static_cast<int>(pool.size());
    std::vector<int> pos(size);
    for (int i = 0; i < size; ++i) pos[i] = i;
    IndexList subset(size);
    while (true) {
        for (int i = 0; i < size; ++i) subset[i] = pool[pos[i]];
        fn(subset);
        int i = size - 1;
        while (i >= 0 && pos[i] == m - size + i) --i;
        if (i < 0) return;
        ++pos[i];
        for (int k = i + 1; k < size; ++k) pos[k] = pos[k - 1] + 1;
    }
}

} // namespace detail

// Exhaustive argmax of score over nonempty subsets of `remaining` up to the
// per-round cap; ties break to the lexicographically smallest index list.
// Above an enumeration budget of 1e6 candidates a greedy build-up takes over:
// grow the set one instrument at a time by best marginal score and return the
// best-scoring prefix.
inline IndexList select_next(const IndexList& remaining, const IndexList& used,
                             const SimilarityMatrix& sim, const SelectionConfig& config) {
    if (remaining.empty())
        throw std::invalid_argument("select_next: no instruments remaining");

    IndexList pool = remaining;
    std::sort(pool.begin(), pool.end());
    const int cap = std::min(config.max_per_round, static_cast<int>(pool.size()));

    IndexList best;
    double best_score = -std::numeric_limits<double>::infinity();
    auto consider = [&](const IndexList& candidate) {
        const double s = score(candidate, used, sim, config);
        if (s > best_score ||
            (s == best_score && !best.empty() &&
             std::lexicographical_compare(candidate.begin(), candidate.end(),
                                          best.begin(), best.end()))) {
            best_score = s;
            best = candidate;
        }
    };

    if (detail::candidate_count(static_cast<int>(pool.size()), cap) <= 1e6) {
        for (int size = 1; size <= cap; ++size)
            detail::for_each_combination(pool, size, consider);
    } else {
        IndexList current;
        IndexList unused_pool = pool;
        for (int size = 1; size <= cap; ++size) {
            std::size_t pick = unused_pool.size();
            double pick_score = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < unused_pool.size(); ++k) {
                IndexList candidate = current;
                candidate.insert(std::upper_bound(candidate.begin(), candidate.end(),
                                                  unused_pool[k]),
                                 unused_pool[k]);
                const double s = score(candidate, used, sim, config);
                if (s > pick_score) {
                    pick_score = s;
                    pick = k;
                }
            }
            if (pick == unused_pool.size()) break;
            current.insert(std::upper_bound(current.begin(), current.end(), unused_pool[pick]),
                           unused_pool[pick]);
            unused_pool.erase(unused_pool.begin() + static_cast<std::ptrdiff_t>(pick));
            consider(current);
        }
    }

    if (best.empty() || std::isinf(best_score)) return {pool.front()};
    return best;
}

// One executed round of a sequential run.
struct RoundRecord {
    int round = 0;                // 1-based
    IndexList instrument_set;
    Vector combined;
    double combined_intercept = 0.0;
    double combined_norm = 0.0;
    IndexList identified;
    Vector per_coordinate_cdist;
    double error_bound = 0.0;
    bool stopped = false;
};

struct SisTrajectory {
    std::vector<IndexList> chosen_sets;
    RunningEstimate running;      // state after the last executed round
    std::vector<RoundRecord> records;
    std::vector<double> norms;    // |combined| per executed round
    bool stopped_early = false;
    std::optional<int> stop_round;
    NormEstimate norm_estimate;

    explicit SisTrajectory(double delta) : running(delta) {}
};

namespace detail {

inline IndexList all_instruments(const Scenario& scenario) {
    IndexList all(static_cast<std::size_t>(scenario.n_iv));
    for (int i = 0; i < scenario.n_iv; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
}

inline SisTrajectory run_loop(const Scenario& scenario, const SimilarityMatrix* sim,
                              const NormEstimate& norm_est, const SelectionConfig& config,
                              std::uint64_t seed, Strategy strategy) {
    config.validate();
    if (strategy == Strategy::sis) {
        if (!sim || sim->sim.rows() != scenario.n_iv)
            throw std::invalid_argument("run_sis: similarity matrix does not match scenario");
    }

    SisTrajectory traj(config.delta);
    traj.norm_estimate = norm_est;

    IndexList remaining = all_instruments(scenario);
    IndexList used;
    Rng pick_rng(seed, 0xD1ull);
    const int rounds = (strategy == Strategy::ideal) ? 1 : config.t_max;

    for (int t = 1; t <= rounds && !remaining.empty(); ++t) {
        IndexList chosen;
        switch (strategy) {
            case Strategy::sis:
                chosen = select_next(remaining, used, *sim, config);
                break;
            case Strategy::random: {
                // Uniform subset of the allowed maximum size; the random
                // baseline ignores the cost function.
                IndexList pool = remaining;
                pick_rng.shuffle(pool);
                const int take =
                    std::min(config.max_per_round, static_cast<int>(pool.size()));
                chosen.assign(pool.begin(), pool.begin() + take);
                std::sort(chosen.begin(), chosen.end());
                break;
            }
            case Strategy::ideal:
                chosen = remaining;
                break;
        }

        Dataset data;
        ProjectedEstimate est;
        try {
            data = run_experiment(scenario, chosen, config.n_per_experiment,
                                  derive_seed(seed, 0xE1ull, static_cast<std::uint64_t>(t)));
            est = estimate_projection(data, config.rank_tol);
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(t) + ": " + e.what());
        }

        traj.chosen_sets.push_back(chosen);
        traj.running.append(est);

        RoundRecord rec;
        rec.round = t;
        rec.instrument_set = chosen;
        rec.combined = traj.running.combined();
        rec.combined_intercept = traj.running.combined_intercept();
        rec.combined_norm = rec.combined.norm();
        rec.per_coordinate_cdist = traj.running.per_coordinate_cdist();
        rec.error_bound = error_bound(norm_est.value, rec.combined);
        traj.norms.push_back(rec.combined_norm);

        if (std::abs(norm_est.value - rec.combined_norm) < config.epsilon) {
            traj.running.mark_all_identified();
            rec.identified = traj.running.identified();
            rec.stopped = true;
            traj.records.push_back(std::move(rec));
            traj.stopped_early = true;
            traj.stop_round = t;
            return traj;
        }

        rec.identified = traj.running.identified();
        traj.records.push_back(std::move(rec));

        for (int idx : chosen) {
            remaining.erase(std::remove(remaining.begin(), remaining.end(), idx),
                            remaining.end());
            used.push_back(idx);
        }
        std::sort(used.begin(), used.end());
    }
    return traj;
}

} // namespace detail

inline SisTrajectory run_sis(const Scenario& scenario, const SimilarityMatrix& sim,
                             const NormEstimate& norm_est, const SelectionConfig& config,
                             std::uint64_t seed) {
    return detail::run_loop(scenario, &sim, norm_est, config, seed, Strategy::sis);
}

inline SisTrajectory run_random_baseline(const Scenario& scenario, const NormEstimate& norm_est,
                                         const SelectionConfig& config, std::uint64_t seed) {
    return detail::run_loop(scenario, nullptr, norm_est, config, seed,
                            Strategy::random);
}

inline SisTrajectory run_ideal(const Scenario& scenario, const NormEstimate& norm_est,
                               const SelectionConfig& config, std::uint64_t seed) {
    return detail::run_loop(scenario, nullptr, norm_est, config, seed, Strategy::ideal);
}

inline json round_record_to_json(const RoundRecord& rec) {
    return json{{"round", rec.round},
                {"instrument_set", rec.instrument_set},
                {"combined", vector_to_json(rec.combined)},
                {"combined_intercept", rec.combined_intercept},
                {"combined_norm", rec.combined_norm},
                {"identified_indices", rec.identified},
                {"per_coordinate_cdist", vector_to_json(rec.per_coordinate_cdist)},
                {"error_bound", rec.error_bound},
                {"stopped", rec.stopped}};
}

inline json trajectory_to_json(const SisTrajectory& traj) {
    json rounds = json::array();
    for (const auto& rec : traj.records) rounds.push_back(round_record_to_json(rec));
    json j{{"chosen_sets", traj.chosen_sets},
           {"rounds", std::move(rounds)},
           {"norms", traj.norms},
           {"stopped_early", traj.stopped_early},
           {"norm_estimate", norm_estimate_to_json(traj.norm_estimate)}};
    j["stop_round"] = traj.stop_round ? json(*traj.stop_round) : json(nullptr);
    return j;
}

} // namespace underiv
