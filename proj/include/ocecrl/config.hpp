#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocecrl/env.hpp"
#include "ocecrl/solvers.hpp"

namespace ocecrl {

struct EnvironmentSpecConfig {
    std::string name; // "gridnav" | "pointmass" | "tabular"
    GridNavParams gridnav;
    PointMassParams pointmass;
    std::optional<TabularMdp> tabular;
};

struct ConstraintConfig {
    int index = 1;
    double beta = 0.3;
    double threshold = 0.0;
    // "cost": constraint variable u <= threshold, mapped to the reward
    // orientation as per-step threshold -threshold. "reward": used as given.
    std::string orientation = "cost";

    double per_step_threshold() const { return orientation == "cost" ? -threshold : threshold; }
};

struct SolverChoiceConfig {
    std::string kind = "exact"; // "exact" | "pg"
    SolverBudget budget;
    PgConfig pg;
};

struct SgdaConfig {
    long iterations = 100;
    int batch_size = 8; // trajectories per (t, lambda) gradient
    double eta_t = 5e-5;
    double eta_lambda = 5e-5;
    double lambda_max = 100.0;
    double lambda_init = 0.0;
    double objective_beta = 1.0;
    std::optional<std::vector<double>> t_init; // default: box midpoints
    std::optional<std::vector<std::pair<double, double>>> t_boxes; // must contain reward ranges
    double t_box_margin = 0.0;
    double eps_trunc = 1e-6;
    int horizon_cap = 1048576;
    int history_ring = 256;
    int proxy_window = 25;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    EnvironmentSpecConfig environment;
    std::vector<ConstraintConfig> constraints;
    SolverChoiceConfig solver;
    SgdaConfig sgda;
};

// Parses and validates against schema config.v1; validation errors carry the
// offending field path.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config_file(const std::string& path);

std::unique_ptr<Environment> build_environment(const EnvironmentSpecConfig& spec);
std::unique_ptr<PolicySolver> build_solver(const SolverChoiceConfig& solver);
std::vector<ConstraintSpec> build_constraints(const RunConfig& config, const Environment& env);

} // namespace ocecrl
