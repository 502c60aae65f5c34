// Experiment orchestration: scenario sweeps, strategy comparison, metric
// aggregation, and CSV/JSON report emission.
//
// A sweep executes n_runs independent replicates. Replicate r derives its
// seed as base_seed + r, generates a fresh scenario, similarity matrix, and
// norm estimate, and runs every requested strategy against them. Per-round
// metrics land in runs.csv, aggregate statistics in report.csv, and the
// per-round running-estimate records in trajectories.json. Replicates are
// deterministic functions of their seed, so output files are byte-identical
// across reruns and worker counts.

#pragma once

#include "underiv/combination.hpp"
#include "underiv/norm.hpp"
#include "underiv/scenario.hpp"
#include "underiv/selection.hpp"
#include "underiv/serialize.hpp"
#include "underiv/simulator.hpp"
#include "underiv/stats.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace underiv {

struct RunConfig {
    // scenario
    int n_iv = 30;
    int d_x = 50;
    int d_id = 15;
    // selection (epsilon is resolved per replicate, see below)
    SelectionConfig selection;
    std::optional<double> epsilon_abs;  // absolute stopping tolerance when set
    double epsilon_rel = 0.05;          // otherwise epsilon_rel * norm estimate
    // harness
    int n_runs = 1;
    double similarity_noise_sd = 1.0;
    std::vector<Strategy> strategies = {Strategy::sis, Strategy::random, Strategy::ideal};
    std::uint64_t base_seed = 0;
    std::string output_dir = "out";
    int workers = 0;  // 0 = hardware concurrency
    NormProviderSpec norm_provider;
    bool noiseless = false;

    void validate() const {
        if (n_runs < 1) throw std::invalid_argument("RunConfig: n_runs must be >= 1");
        if (strategies.empty()) throw std::invalid_argument("RunConfig: strategies empty");
        if (similarity_noise_sd < 0.0)
            throw std::invalid_argument("RunConfig: similarity_noise_sd must be >= 0");
        if (epsilon_rel <= 0.0 && !epsilon_abs)
            throw std::invalid_argument("RunConfig: epsilon_rel must be positive");
    }

    double resolve_epsilon(double norm_value) const {
        if (epsilon_abs) return *epsilon_abs;
        return std::max(1e-12, epsilon_rel * norm_value);
    }
};

// One raw metric row: a single strategy's state after one round of one run.
struct RunRow {
    std::uint64_t run_seed = 0;
    Strategy strategy = Strategy::sis;
    int round = 0;
    IndexList chosen;
    double combined_norm = 0.0;
    double norm_estimate = 0.0;
    double mse_nonzero = 0.0;
    double identified_fraction = 0.0;
    double error_bound = 0.0;
    bool stopped = false;
    double mse_full = 0.0;
};

struct ReportRow {
    std::string strategy;
    int round = 0;
    std::string metric;
    StatSummary stats;
};

// One executed strategy of one replicate, trimmed to what reports need.
struct SweepRun {
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::sis;
    std::vector<RoundRecord> records;
    bool stopped_early = false;
    std::optional<int> stop_round;
    NormEstimate norm_estimate;
    Vector true_beta;
};

struct SweepResult {
    std::vector<SweepRun> runs;
    std::vector<RunRow> rows;        // sorted by (strategy, seed, round)
    std::vector<ReportRow> report;
    std::vector<std::pair<std::uint64_t, std::string>> failures;  // (seed, message)
};

namespace detail {

inline double mse_over(const Vector& estimate, const Vector& truth, bool nonzero_only) {
    double total = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (nonzero_only && truth(i) == 0.0) continue;
        const double d = estimate(i) - truth(i);
        total += d * d;
        ++count;
    }
    return count > 0 ? total / count : 0.0;
}

inline std::vector<RunRow> rows_from_run(const SweepRun& run) {
    std::vector<RunRow> rows;
    rows.reserve(run.records.size());
    for (const auto& rec : run.records) {
        RunRow row;
        row.run_seed = run.seed;
        row.strategy = run.strategy;
        row.round = rec.round;
        row.chosen = rec.instrument_set;
        row.combined_norm = rec.combined_norm;
        row.norm_estimate = run.norm_estimate.value;
        row.mse_nonzero = mse_over(rec.combined, run.true_beta, true);
        row.mse_full = mse_over(rec.combined, run.true_beta, false);
        row.identified_fraction =
            static_cast<double>(rec.identified.size()) / static_cast<double>(run.true_beta.size());
        row.error_bound = rec.error_bound;
        row.stopped = rec.stopped;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

// Executes one replicate: scenario, similarities, norm estimate, then every
// requested strategy. Exposed for the CLI's single-run mode.
inline std::vector<SweepRun> run_replicate(const RunConfig& config, std::uint64_t seed) {
    Scenario scenario = generate_scenario(config.n_iv, config.d_x, config.d_id, seed);
    SimilarityMatrix sim =
        compute_similarities(scenario, config.similarity_noise_sd, derive_seed(seed, 0x51ull));
    NormEstimate norm_est =
        make_norm_estimate(config.norm_provider, scenario, derive_seed(seed, 0x40ull));

    SelectionConfig sel = config.selection;
    sel.epsilon = config.resolve_epsilon(norm_est.value);

    const Scenario world = config.noiseless ? make_noiseless(scenario) : scenario;

    std::vector<SweepRun> out;
    for (Strategy strategy : config.strategies) {
        const std::uint64_t strat_seed =
            derive_seed(seed, 0x57ull, static_cast<std::uint64_t>(strategy));
        SisTrajectory traj = [&] {
            switch (strategy) {
                case Strategy::sis: return run_sis(world, sim, norm_est, sel, strat_seed);
                case Strategy::random:
                    return run_random_baseline(world, norm_est, sel, strat_seed);
                case Strategy::ideal: return run_ideal(world, norm_est, sel, strat_seed);
            }
            throw std::logic_error("unreachable strategy");
        }();

        SweepRun run;
        run.seed = seed;
        run.strategy = strategy;
        run.records = std::move(traj.records);
        run.stopped_early = traj.stopped_early;
        run.stop_round = traj.stop_round;
        run.norm_estimate = traj.norm_estimate;
        run.true_beta = scenario.beta;
        out.push_back(std::move(run));
    }
    return out;
}

inline std::vector<ReportRow> aggregate_report(const std::vector<RunRow>& rows) {
    // (strategy, round, metric) -> sample
    std::map<std::pair<std::string, int>, std::map<std::string, std::vector<double>>> samples;
    for (const auto& row : rows) {
        auto& bucket = samples[{to_string(row.strategy), row.round}];
        bucket["combined_norm"].push_back(row.combined_norm);
        bucket["mse_nonzero"].push_back(row.mse_nonzero);
        bucket["mse_full"].push_back(row.mse_full);
        bucket["identified_fraction"].push_back(row.identified_fraction);
        bucket["error_bound"].push_back(row.error_bound);
    }
    std::vector<ReportRow> report;
    for (auto& [key, metrics] : samples)
        for (auto& [metric, values] : metrics)
            report.push_back(ReportRow{key.first, key.second, metric, summarize(values)});
    return report;
}

inline SweepResult run_sweep(const RunConfig& config) {
    config.validate();
    config.selection.validate();

    struct Slot {
        std::vector<SweepRun> runs;
        std::string error;
        bool failed = false;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(config.n_runs));

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers =
        std::min<int>(config.workers > 0 ? config.workers : static_cast<int>(hw), config.n_runs);

    std::atomic<int> next{0};
    auto work = [&] {
        for (int r = next.fetch_add(1); r < config.n_runs; r = next.fetch_add(1)) {
            const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(r);
            try {
                slots[static_cast<std::size_t>(r)].runs = run_replicate(config, seed);
            } catch (const std::exception& e) {
                slots[static_cast<std::size_t>(r)].failed = true;
                slots[static_cast<std::size_t>(r)].error = e.what();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    SweepResult result;
    for (int r = 0; r < config.n_runs; ++r) {
        auto& slot = slots[static_cast<std::size_t>(r)];
        if (slot.failed) {
            result.failures.emplace_back(config.base_seed + static_cast<std::uint64_t>(r),
                                         slot.error);
            continue;
        }
        for (auto& run : slot.runs) {
            auto rows = detail::rows_from_run(run);
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
            result.runs.push_back(std::move(run));
        }
    }

    auto order = [](const RunRow& a, const RunRow& b) {
        return std::tie(a.strategy, a.run_seed, a.round) < std::tie(b.strategy, b.run_seed, b.round);
    };
    std::sort(result.rows.begin(), result.rows.end(), order);
    std::sort(result.runs.begin(), result.runs.end(), [](const SweepRun& a, const SweepRun& b) {
        return std::tie(a.strategy, a.seed) < std::tie(b.strategy, b.seed);
    });
    result.report = aggregate_report(result.rows);
    return result;
}

// ---------------------------------------------------------------------------
// Finite-sample comparison of single-experiment vs. combined estimators.
//
// One fixed scenario (n_iv = d_id = d_z instruments), n_runs replicate data
// draws. IdealEx randomizes all instruments in a single experiment, TwoEx
// combines {first d_z - 1} and {last}, ThreeEx combines one experiment per
// instrument. Component 0 is the fitted offset.

struct FiniteSampleRow {
    std::string estimator;
    int component = 0;  // 0 = offset, i >= 1 maps to beta_{i-1}
    double true_value = 0.0;
    StatSummary stats;
};

inline std::vector<FiniteSampleRow> finite_sample_study(int d_x, int d_z, int n, int n_runs,
                                                        std::uint64_t seed) {
    if (d_z > d_x) throw std::invalid_argument("finite_sample_study: requires d_z <= d_x");
    if (d_z < 2) throw std::invalid_argument("finite_sample_study: requires d_z >= 2");
    if (n_runs < 1) throw std::invalid_argument("finite_sample_study: n_runs must be >= 1");

    Scenario scenario = generate_scenario(d_z, d_x, d_z, seed);

    std::vector<IndexList> singletons;
    for (int i = 0; i < d_z; ++i) singletons.push_back({i});
    IndexList first_block;
    for (int i = 0; i < d_z - 1; ++i) first_block.push_back(i);
    const IndexList last_block = {d_z - 1};
    IndexList full;
    for (int i = 0; i < d_z; ++i) full.push_back(i);

    struct EstimatorDef {
        std::string name;
        std::vector<IndexList> experiments;
    };
    const std::vector<EstimatorDef> estimators = {
        {"IdealEx", {full}},
        {"TwoEx", {first_block, last_block}},
        {"ThreeEx", singletons},
    };

    // estimator -> component -> values across runs
    std::vector<std::vector<std::vector<double>>> values(
        estimators.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(d_x) + 1));

    for (int r = 0; r < n_runs; ++r) {
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            std::vector<ProjectedEstimate> parts;
            for (std::size_t k = 0; k < estimators[e].experiments.size(); ++k) {
                Dataset data = run_experiment(
                    scenario, estimators[e].experiments[k], n,
                    derive_seed(seed + static_cast<std::uint64_t>(r) + 1, e + 1, k));
                parts.push_back(estimate_projection(data));
            }
            CombineResult res = combine(parts);
            values[e][0].push_back(combine_intercepts(parts));
            for (int c = 0; c < d_x; ++c)
                values[e][static_cast<std::size_t>(c) + 1].push_back(res.combined(c));
        }
    }

    std::vector<FiniteSampleRow> rows;
    for (std::size_t e = 0; e < estimators.size(); ++e) {
        for (int c = 0; c <= d_x; ++c) {
            FiniteSampleRow row;
            row.estimator = estimators[e].name;
            row.component = c;
            row.true_value = (c == 0) ? 0.0 : scenario.beta(c - 1);
            row.stats = summarize(values[e][static_cast<std::size_t>(c)]);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV / JSON emission. Decimal point, no thousands separators, shortest
// round-trip doubles.

inline std::string join_indices(const IndexList& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(v[i]);
    }
    return out;
}

inline constexpr const char* kRunsCsvHeader =
    "run_seed,strategy,round,chosen_instruments,combined_norm,norm_estimate,"
    "mse_nonzero,identified_fraction,error_bound,stopped,mse_full";

inline void write_runs_csv(const std::vector<RunRow>& rows, std::ostream& os) {
    os << kRunsCsvHeader << "\n";
    for (const auto& r : rows) {
        os << r.run_seed << ',' << to_string(r.strategy) << ',' << r.round << ','
           << join_indices(r.chosen) << ',' << format_double(r.combined_norm) << ','
           << format_double(r.norm_estimate) << ',' << format_double(r.mse_nonzero) << ','
           << format_double(r.identified_fraction) << ',' << format_double(r.error_bound) << ','
           << (r.stopped ? 1 : 0) << ',' << format_double(r.mse_full) << "\n";
    }
}

inline constexpr const char* kReportCsvHeader =
    "strategy,round,metric,count,mean,p10,q1,median,q3,p90";

inline void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& os) {
    os << kReportCsvHeader << "\n";
    for (const auto& r : rows) {
        os << r.strategy << ',' << r.round << ',' << r.metric << ',' << r.stats.count << ','
           << format_double(r.stats.mean) << ',' << format_double(r.stats.p10) << ','
           << format_double(r.stats.q1) << ',' << format_double(r.stats.median) << ','
           << format_double(r.stats.q3) << ',' << format_double(r.stats.p90) << "\n";
    }
}

inline constexpr const char* kFiniteSampleCsvHeader =
    "estimator,component,true_value,count,mean,p10,q1,median,q3,p90";

inline void write_finite_sample_csv(const std::vector<FiniteSampleRow>& rows, std::ostream& os) {
    os << kFiniteSampleCsvHeader << "\n";
    for (const auto& r : rows) {
        os << r.estimator << ',' << r.component << ',' << format_double(r.true_value) << ','
           << r.stats.count << ',' << format_double(r.stats.mean) << ','
           << format_double(r.stats.p10) << ',' << format_double(r.stats.q1) << ','
           << format_double(r.stats.median) << ',' << format_double(r.stats.q3) << ','
           << format_double(r.stats.p90) << "\n";
    }
}

inline json sweep_run_to_json(const SweepRun& run) {
    json rounds = json::array();
    for (const auto& rec : run.records) rounds.push_back(round_record_to_json(rec));
    json j{{"run_seed", run.seed},
           {"strategy", to_string(run.strategy)},
           {"rounds", std::move(rounds)},
           {"stopped_early", run.stopped_early},
           {"norm_estimate", norm_estimate_to_json(run.norm_estimate)}};
    j["stop_round"] = run.stop_round ? json(*run.stop_round) : json(nullptr);
    return j;
}

// Parses runs.csv back for re-aggregation.
inline std::vector<RunRow> read_runs_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("runs csv: empty file");
    if (line != kRunsCsvHeader) throw std::runtime_error("runs csv: unexpected header");

    std::vector<RunRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 11) throw std::runtime_error("runs csv: malformed row");
        RunRow r;
        r.run_seed = std::stoull(fields[0]);
        r.strategy = strategy_from_string(fields[1]);
        r.round = std::stoi(fields[2]);
        if (!fields[3].empty()) {
            std::stringstream cs(fields[3]);
            std::string tok;
            while (std::getline(cs, tok, ';')) r.chosen.push_back(std::stoi(tok));
        }
        r.combined_norm = std::stod(fields[4]);
        r.norm_estimate = std::stod(fields[5]);
        r.mse_nonzero = std::stod(fields[6]);
        r.identified_fraction = std::stod(fields[7]);
        r.error_bound = std::stod(fields[8]);
        r.stopped = fields[9] == "1";
        r.mse_full = std::stod(fields[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// Writes runs.csv, report.csv, and trajectories.json into output_dir.
inline void write_sweep_outputs(const SweepResult& result, const std::string& output_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(output_dir);

    auto open = [&](const char* name) {
        std::ofstream os(fs::path(output_dir) / name, std::ios::binary);
        if (!os) throw std::runtime_error(std::string("cannot write ") + name + " in " + output_dir);
        return os;
    };

    {
        auto os = open("runs.csv");
        write_runs_csv(result.rows, os);
    }
    {
        auto os = open("report.csv");
        write_report_csv(result.report, os);
    }
    {
        json all = json::array();
        for (const auto& run : result.runs) all.push_back(sweep_run_to_json(run));
        auto os = open("trajectories.json");
        os << all.dump(2) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Declarative config file: JSON with scenario / selection / harness sections,
// all keys optional.

inline RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        if (s.contains("n_iv")) cfg.n_iv = s.at("n_iv").get<int>();
        if (s.contains("d_x")) cfg.d_x = s.at("d_x").get<int>();
        if (s.contains("d_id")) cfg.d_id = s.at("d_id").get<int>();
    }
    if (j.contains("selection")) {
        const json& s = j.at("selection");
        if (s.contains("t_max")) cfg.selection.t_max = s.at("t_max").get<int>();
        if (s.contains("max_per_round"))
            cfg.selection.max_per_round = s.at("max_per_round").get<int>();
        if (s.contains("cost_kind"))
            cfg.selection.cost_kind = cost_kind_from_string(s.at("cost_kind").get<std::string>());
        if (s.contains("epsilon")) cfg.epsilon_abs = s.at("epsilon").get<double>();
        if (s.contains("epsilon_rel")) cfg.epsilon_rel = s.at("epsilon_rel").get<double>();
        if (s.contains("delta")) cfg.selection.delta = s.at("delta").get<double>();
        if (s.contains("n_per_experiment"))
            cfg.selection.n_per_experiment = s.at("n_per_experiment").get<int>();
        if (s.contains("rank_tol")) cfg.selection.rank_tol = s.at("rank_tol").get<double>();
    }
    if (j.contains("harness")) {
        const json& h = j.at("harness");
        if (h.contains("n_runs")) cfg.n_runs = h.at("n_runs").get<int>();
        if (h.contains("similarity_noise_sd"))
            cfg.similarity_noise_sd = h.at("similarity_noise_sd").get<double>();
        if (h.contains("strategies")) {
            cfg.strategies.clear();
            for (const auto& s : h.at("strategies"))
                cfg.strategies.push_back(strategy_from_string(s.get<std::string>()));
        }
        if (h.contains("base_seed")) cfg.base_seed = h.at("base_seed").get<std::uint64_t>();
        if (h.contains("output_dir")) cfg.output_dir = h.at("output_dir").get<std::string>();
        if (h.contains("workers")) cfg.workers = h.at("workers").get<int>();
        if (h.contains("norm_provider"))
            cfg.norm_provider = parse_norm_provider(h.at("norm_provider").get<std::string>());
        if (h.contains("noiseless")) cfg.noiseless = h.at("noiseless").get<bool>();
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    json j;
    is >> j;
    return run_config_from_json(j);
}

} // namespace underiv
