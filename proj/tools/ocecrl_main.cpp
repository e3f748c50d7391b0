// Command-line driver: config-driven training runs, verification suites,
// post-training evaluation, and report emission.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ocecrl/diagnostics.hpp"
#include "ocecrl/sgda.hpp"
#include "ocecrl/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string resolve_out_dir(const std::string& flag_value, const std::string& fallback) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("OCECRL_OUT_DIR"); env && env[0]) return env;
    return fallback;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

// Cost-orientation view of the configured constraints for evaluation.
struct EvalContext {
    std::vector<double> betas;
    std::vector<double> cost_thresholds;
};

EvalContext eval_context(const ocecrl::RunConfig& config) {
    EvalContext ctx;
    for (const auto& c : config.constraints) {
        ctx.betas.push_back(c.beta);
        ctx.cost_thresholds.push_back(c.orientation == "cost" ? c.threshold : -c.threshold);
    }
    return ctx;
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
            const std::string& out_flag) {
    ocecrl::RunConfig config = ocecrl::load_config_file(config_path);
    if (has_seed) config.seed = seed_override;
    // The resolved directory is not echoed into the artifacts, so repeat runs
    // into different directories stay byte-identical.
    const std::string out_dir = resolve_out_dir(out_flag, config.output_dir);
    fs::create_directories(out_dir);

    try {
        const ocecrl::RunResult result = ocecrl::run(config);
        {
            std::ofstream out(out_dir + "/history.csv", std::ios::trunc);
            ocecrl::write_history_csv(out, result.history, result.proxy_series);
        }
        write_text(out_dir + "/config.json", ocecrl::config_to_json(config).dump(2) + "\n");
        write_text(out_dir + "/checkpoint.json",
                   ocecrl::checkpoint_to_json(config, result).dump(2) + "\n");
        ocecrl::emit_report(result.history, result.proxy_series, nullptr, out_dir);
        std::cout << "run: " << result.history.size() << " iterations -> " << out_dir
                  << " (history.csv, checkpoint.json, summary.json)\n";
        return kExitOk;
    } catch (const ocecrl::nan_abort& e) {
        const std::string dump_path = out_dir + "/diagnostic_dump.json";
        write_text(dump_path, e.snapshot + "\n");
        std::cerr << "error: " << e.what() << "\ndiagnostic dump: " << dump_path << "\n";
        return kExitRuntime;
    }
}

int cmd_verify(const std::string& suite, const std::string& out_flag) {
    std::vector<ocecrl::SuiteResult> results;
    try {
        results = ocecrl::run_suites(suite);
    } catch (const ocecrl::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    json summary = json::array();
    bool all_passed = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.runtime_seconds
                  << " s) " << r.detail << "\n";
        summary.push_back({{"suite", r.name},
                           {"passed", r.passed},
                           {"detail", r.detail},
                           {"runtime_seconds", r.runtime_seconds}});
        all_passed = all_passed && r.passed;
    }
    const std::string out_dir = resolve_out_dir(out_flag, ".");
    fs::create_directories(out_dir);
    write_text(out_dir + "/verify_" + suite + ".json", summary.dump(2) + "\n");
    return all_passed ? kExitOk : kExitRuntime;
}

int cmd_eval(const std::string& ckpt_path, int episodes, std::uint64_t seed, bool has_seed,
             const std::string& out_flag, bool use_uniform_iterate) {
    ocecrl::Checkpoint ckpt;
    try {
        ckpt = ocecrl::checkpoint_from_json(read_json_file(ckpt_path));
    } catch (const std::exception& e) {
        std::cerr << "error: corrupt checkpoint: " << e.what() << "\n";
        return kExitRuntime;
    }
    const std::string out_dir =
        resolve_out_dir(out_flag, fs::path(ckpt_path).parent_path().string());
    fs::create_directories(out_dir.empty() ? "." : out_dir);

    auto env = ocecrl::build_environment(ckpt.config.environment);
    const EvalContext ctx = eval_context(ckpt.config);
    const std::size_t m = ctx.betas.size();
    // Headline constraint-slot t mapped to the cost orientation of u = -r.
    const double converged_t = m > 0 ? -ckpt.state.t[1] : 0.0;
    const std::uint64_t eval_seed = has_seed ? seed : ckpt.config.seed + 1;
    const ocecrl::StochasticPolicy& policy =
        use_uniform_iterate ? ckpt.uniform_policy : ckpt.final_policy;

    const ocecrl::EvalReport report = ocecrl::evaluate_policy(
        *env, policy, episodes, ckpt.horizon, ctx.betas, ctx.cost_thresholds, converged_t,
        eval_seed);

    const std::string base = out_dir.empty() ? "." : out_dir;
    write_text(base + "/eval.json", ocecrl::eval_report_to_json(report).dump(2) + "\n");
    {
        std::ofstream out(base + "/eval_episodes.csv", std::ios::trunc);
        out << "episode,steps,max_constraint_variable\n";
        for (std::size_t e = 0; e < report.constraint_samples.size(); ++e) {
            const auto& xs = report.constraint_samples[e];
            double mx = 0.0;
            for (double x : xs) mx = std::max(mx, x);
            out << e << ',' << xs.size() << ',' << mx << '\n';
        }
    }
    std::cout << "eval: " << episodes << " episodes, mean return " << report.mean_return
              << ", violation rate " << report.violation_rate << ", quantile "
              << report.beta_upper_quantile << ", converged t " << report.converged_t << " -> "
              << base << "/eval.json\n";
    return kExitOk;
}

int cmd_report(const std::string& ckpt_path, const std::string& out_flag) {
    const fs::path run_dir = fs::path(ckpt_path).parent_path();
    const std::string out_dir = resolve_out_dir(out_flag, run_dir.string());

    std::ifstream in(run_dir / "history.csv");
    if (!in) {
        std::cerr << "error: missing " << (run_dir / "history.csv").string() << "\n";
        return kExitRuntime;
    }
    auto [history, proxy] = ocecrl::parse_history_csv(in);

    ocecrl::EvalReport eval;
    const ocecrl::EvalReport* eval_ptr = nullptr;
    if (fs::exists(run_dir / "eval.json")) {
        eval = ocecrl::eval_report_from_json(read_json_file((run_dir / "eval.json").string()));
        eval_ptr = &eval;
    }
    const auto written = ocecrl::emit_report(history, proxy, eval_ptr, out_dir);
    std::cout << "report: wrote " << written.size() << " files to " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-constrained policy optimization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, suite = "all", ckpt_path;
    std::uint64_t seed = 0;
    int episodes = 100;
    bool use_uniform_iterate = false;

    auto* run_cmd = app.add_subcommand("run", "execute a config-driven training run");
    run_cmd->add_option("--config", config_path, "config.v1 JSON file")->required();
    auto* run_seed = run_cmd->add_option("--seed", seed, "master seed override");
    run_cmd->add_option("--out", out_dir, "output directory (or OCECRL_OUT_DIR)");

    auto* verify_cmd = app.add_subcommand("verify", "run a verification suite");
    verify_cmd->add_option("--suite", suite, "oce|equivalence|limit|duality|nesting|gradients|all");
    verify_cmd->add_option("--out", out_dir, "where to write the pass/fail JSON");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
    eval_cmd->add_option("--checkpoint", ckpt_path, "ckpt.v1 JSON file")->required();
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes (default 100)");
    auto* eval_seed = eval_cmd->add_option("--seed", seed, "evaluation seed");
    eval_cmd->add_option("--out", out_dir, "output directory");
    eval_cmd->add_flag("--uniform-iterate", use_uniform_iterate,
                       "evaluate the uniformly sampled iterate instead of the final one");

    auto* report_cmd = app.add_subcommand("report", "re-emit plot CSVs and summary from a run");
    report_cmd->add_option("--checkpoint", ckpt_path, "checkpoint.json of the run")->required();
    report_cmd->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(config_path, seed, !run_seed->empty(), out_dir);
        if (verify_cmd->parsed()) return cmd_verify(suite, out_dir);
        if (eval_cmd->parsed())
            return cmd_eval(ckpt_path, episodes, seed, !eval_seed->empty(), out_dir,
                            use_uniform_iterate);
        if (report_cmd->parsed()) return cmd_report(ckpt_path, out_dir);
    } catch (const ocecrl::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
