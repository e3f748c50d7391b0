#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ocecrl/sgda.hpp"

namespace ocecrl {

// All per-state action distributions with probabilities in steps of 1/K.
std::vector<std::vector<double>> simplex_grid(int n_actions, int resolution);

struct OracleSolution {
    std::vector<double> best_policy_params; // flat per-(s,a) probabilities
    double objective = 0.0;                 // discounted-total units
    std::vector<double> constraint_values;  // per-step risk value per constraint
    std::vector<double> best_t;             // maximizing t per channel
    bool feasible = false;
    double grid_resolution = 0.0;
};

// Exhaustive constrained maximization over the stochastic-policy grid.
// The auxiliary variable is handled exactly: each channel's risk value is the
// closed-form optimum over t of the convolution objective under the policy's
// occupancy measure. Guarded to at most 10^7 grid points.
OracleSolution brute_force_primal(const TabularMdp& mdp,
                                  std::span<const ConstraintSpec> constraints,
                                  double objective_beta, int policy_grid_resolution);

struct NestedSupCheck {
    double joint_grid_value = 0.0;  // sup over the (t-grid x policy-grid)
    double nested_value = 0.0;      // per-policy exact sup over t (feasibility included)
    double tolerance = 0.0;         // discretization bound for |difference|
};

// Consistency of moving the sup over t in and out of the constraints,
// checked on a grid: the joint grid optimum can lag the exact-t optimum by
// at most the t-grid discretization error.
NestedSupCheck nested_sup_check(const TabularMdp& mdp, std::span<const ConstraintSpec> constraints,
                                double objective_beta, int policy_grid_resolution,
                                int t_grid_points);

struct DualityGapProbe {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    bool slater_ok = false;  // a strictly feasible grid policy exists
    bool flagged = false;    // constraint qualification unverified: no gap claim
};

// min over a lambda-grid of max over the policy-grid of the Lagrangian at a
// fixed t, against the constrained grid optimum at the same t.
DualityGapProbe duality_gap_probe(const TabularMdp& mdp,
                                  std::span<const ConstraintSpec> constraints,
                                  double objective_beta, std::span<const double> t_fixed,
                                  double lambda_grid_max, int lambda_grid_points,
                                  int policy_grid_resolution);

struct EvalReport {
    int n_episodes = 0;
    // Per-episode per-step samples of the headline constraint variable
    // (cost orientation: u = -r_index).
    std::vector<std::vector<double>> constraint_samples;
    double beta_upper_quantile = 0.0; // (1-beta)-quantile of the pooled samples
    double empirical_cvar = 0.0;      // mean of the worst beta-fraction (pooled)
    double converged_t = 0.0;         // echoed, cost orientation
    double mean_return = 0.0;         // undiscounted objective sum per episode
    double violation_rate = 0.0;      // fraction of steps violating any threshold
    double threshold = 0.0;           // headline cost threshold
};

// Post-training evaluation without learning; Gaussian policies act with
// their mean. Thresholds and converged_t are in the cost orientation of the
// constraint variables u_i = -r_i.
EvalReport evaluate_policy(Environment& env, const StochasticPolicy& policy, int n_episodes,
                           int horizon, std::span<const double> betas,
                           std::span<const double> cost_thresholds, double converged_t,
                           std::uint64_t seed, int headline_constraint = 0);

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history,
                       std::span<const double> proxy_series);

// Plot-ready CSV series (return curve, t curve, lambda curve, histogram of
// the evaluation constraint variable) plus a JSON summary. Returns the
// written paths. Histogram: 50 uniform bins over the sample range.
std::vector<std::string> emit_report(std::span<const HistoryEntry> history,
                                     std::span<const double> proxy_series,
                                     const EvalReport* eval, const std::string& out_dir,
                                     const std::string& format = "csv");

// Schema check for the summary emitted above (report.v1).
void validate_summary(const nlohmann::json& j);

// Round-trips for the artifacts the report command consumes.
std::pair<std::vector<HistoryEntry>, std::vector<double>> parse_history_csv(std::istream& in);
nlohmann::json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

} // namespace ocecrl
