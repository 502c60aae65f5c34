// underiv command line: scenario generation, single runs, sweeps, the
// finite-sample study, and re-aggregation of existing raw CSVs.

#include "underiv/underiv.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using underiv::json;

void write_text(const std::string& path, const std::string& content) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
}

void emit(const std::optional<std::string>& out, const std::string& content) {
    if (out)
        write_text(*out, content);
    else
        std::cout << content;
}

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    bool noiseless = false;
    std::optional<int> n_runs;
    std::optional<std::string> norm_provider;
    std::vector<std::string> strategies;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Base seed override");
        cmd->add_option("--out", out, "Output directory override");
        cmd->add_option("--workers", workers, "Parallel worker count (0 = hardware)");
        cmd->add_flag("--noiseless", noiseless, "Disable confounding noise (M = 0, v = 0)");
        cmd->add_option("--n-runs", n_runs, "Replicate count override");
        cmd->add_option("--norm-provider", norm_provider,
                        "oracle | oracle_noisy:<bias> | external:<value>");
        cmd->add_option("--strategy", strategies, "Strategies to run (sis, random, ideal)");
    }

    void apply(underiv::RunConfig& cfg) const {
        if (seed) cfg.base_seed = *seed;
        if (out) cfg.output_dir = *out;
        if (workers) cfg.workers = *workers;
        if (noiseless) cfg.noiseless = true;
        if (n_runs) cfg.n_runs = *n_runs;
        if (norm_provider) cfg.norm_provider = underiv::parse_norm_provider(*norm_provider);
        if (!strategies.empty()) {
            cfg.strategies.clear();
            for (const auto& s : strategies)
                cfg.strategies.push_back(underiv::strategy_from_string(s));
        }
    }
};

int cmd_generate(int n_iv, int d_x, int d_id, std::uint64_t seed,
                 const std::optional<std::string>& out) {
    underiv::Scenario s = underiv::generate_scenario(n_iv, d_x, d_id, seed);
    emit(out, underiv::scenario_to_json(s).dump(2) + "\n");
    return 0;
}

int cmd_run(const std::string& config_path, const CommonOverrides& common) {
    underiv::RunConfig cfg =
        config_path.empty() ? underiv::RunConfig{} : underiv::load_run_config(config_path);
    if (config_path.empty() && common.strategies.empty())
        cfg.strategies = {underiv::Strategy::sis};
    common.apply(cfg);

    auto runs = underiv::run_replicate(cfg, cfg.base_seed);
    json out = json::array();
    for (const auto& run : runs) out.push_back(underiv::sweep_run_to_json(run));
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const CommonOverrides& common) {
    underiv::RunConfig cfg =
        config_path.empty() ? underiv::RunConfig{} : underiv::load_run_config(config_path);
    common.apply(cfg);

    underiv::SweepResult result = underiv::run_sweep(cfg);
    underiv::write_sweep_outputs(result, cfg.output_dir);

    std::cout << "replicates: " << cfg.n_runs << ", failed: " << result.failures.size() << "\n";
    for (const auto& [seed, message] : result.failures)
        std::cerr << "replicate seed " << seed << " failed: " << message << "\n";
    std::cout << "wrote " << cfg.output_dir << "/runs.csv, report.csv, trajectories.json\n";
    return result.failures.empty() ? 0 : 1;
}

int cmd_finite_sample(int d_x, int d_z, int n, int n_runs, std::uint64_t seed,
                      const std::optional<std::string>& out) {
    auto rows = underiv::finite_sample_study(d_x, d_z, n, n_runs, seed);
    std::ostringstream os;
    underiv::write_finite_sample_csv(rows, os);
    if (out) {
        fs::create_directories(*out);
        write_text((fs::path(*out) / "finite_sample.csv").string(), os.str());
        std::cout << "wrote " << *out << "/finite_sample.csv\n";
    } else {
        std::cout << os.str();
    }
    return 0;
}

int cmd_report(const std::string& in_path, const std::optional<std::string>& out) {
    std::ifstream is(in_path);
    if (!is) throw std::runtime_error("cannot open " + in_path);
    auto rows = underiv::read_runs_csv(is);
    auto report = underiv::aggregate_report(rows);
    std::ostringstream os;
    underiv::write_report_csv(report, os);
    emit(out, os.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Underspecified instrumental-variable estimation toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Emit a scenario as JSON");
    int g_n_iv = 30, g_d_x = 50, g_d_id = 15;
    std::uint64_t g_seed = 0;
    std::optional<std::string> g_out;
    gen->add_option("--n-iv", g_n_iv, "Number of instruments")->required();
    gen->add_option("--d-x", g_d_x, "Treatment dimension")->required();
    gen->add_option("--d-id", g_d_id, "Identifying instrument count")->required();
    gen->add_option("--seed", g_seed, "Generation seed");
    gen->add_option("--out", g_out, "Write to file instead of stdout");

    // run
    auto* run = app.add_subcommand("run", "Run one replicate, print trajectory JSON");
    std::string r_config;
    CommonOverrides r_common;
    run->add_option("--config", r_config, "JSON config file");
    r_common.attach(run);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Full replicated study with reports");
    std::string s_config;
    CommonOverrides s_common;
    sweep->add_option("--config", s_config, "JSON config file");
    s_common.attach(sweep);

    // finite-sample
    auto* fin = app.add_subcommand("finite-sample",
                                   "Single-experiment vs combined estimator comparison");
    int f_d_x = 3, f_d_z = 3, f_n = 1000, f_runs = 500;
    std::uint64_t f_seed = 253;
    std::optional<std::string> f_out;
    fin->add_option("--d-x", f_d_x, "Treatment dimension");
    fin->add_option("--d-z", f_d_z, "Instrument count");
    fin->add_option("--n", f_n, "Samples per experiment");
    fin->add_option("--runs", f_runs, "Replicate count");
    fin->add_option("--seed", f_seed, "Scenario seed");
    fin->add_option("--out", f_out, "Output directory");

    // report
    auto* rep = app.add_subcommand("report", "Re-aggregate an existing runs.csv");
    std::string p_in;
    std::optional<std::string> p_out;
    rep->add_option("--in", p_in, "Path to runs.csv")->required();
    rep->add_option("--out", p_out, "Write report CSV to file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(g_n_iv, g_d_x, g_d_id, g_seed, g_out);
        if (run->parsed()) return cmd_run(r_config, r_common);
        if (sweep->parsed()) return cmd_sweep(s_config, s_common);
        if (fin->parsed()) return cmd_finite_sample(f_d_x, f_d_z, f_n, f_runs, f_seed, f_out);
        if (rep->parsed()) return cmd_report(p_in, p_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
