#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocecrl/config.hpp"
#include "ocecrl/gradients.hpp"
#include "ocecrl/solvers.hpp"

namespace ocecrl {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Box constraints for the auxiliary variables t (one interval per reward
// channel, containing that channel's reward range) and the multipliers
// lambda (each [0, lambda_max]).
struct ProjectionBoxes {
    std::vector<Interval> t_boxes;     // m+1
    std::vector<Interval> lambda_box;  // m

    void validate(std::span<const std::pair<double, double>> reward_ranges) const;
    double project_t(std::size_t i, double x) const { return clip(x, t_boxes[i].lo, t_boxes[i].hi); }
    double project_lambda(std::size_t i, double x) const {
        return clip(x, lambda_box[i].lo, lambda_box[i].hi);
    }
};

struct HistoryEntry {
    long iteration = 0;
    std::vector<double> t;
    std::vector<double> lambda;
    double objective_estimate = 0.0;          // batch mean of sum gamma^tau r'_0
    std::vector<double> constraint_estimates; // batch mean of sum gamma^tau r'_i
    std::vector<double> g_t;
    std::vector<double> g_lambda;
};

struct SgdaState {
    long iteration = 0;
    std::vector<double> t;
    std::vector<double> lambda;
    double eta_t = 5e-5;
    double eta_lambda = 5e-5;
    std::size_t history_capacity = 256;
    std::deque<HistoryEntry> history; // bounded ring, oldest first

    void record(HistoryEntry entry);
    // The most recent min(n, size) entries, oldest first.
    std::vector<const HistoryEntry*> window(std::size_t n) const;
};

// Convenience overload reading (t, lambda) from the driver state.
GradEstimate estimate_gradients(std::span<const Trajectory> batch, const SgdaState& state,
                                std::span<const double> betas,
                                std::span<const double> per_step_thresholds, double gamma);

// Projected descent on lambda, projected ascent on t; increments the
// iteration counter. Both variables land inside their boxes.
void sgda_step(SgdaState& state, const GradEstimate& grads, const ProjectionBoxes& boxes);

// Step sizes from the convergence analysis with unit constants in the O(.)
// factors: eta_lambda = min{1/(2 ell), eps^2/(16 ell (sigma^2+delta^2))} and
// eta_t the minimum of the three analysis terms. sigma = delta = 0 is allowed
// (the variance-limited terms drop out).
std::pair<double, double> theory_step_sizes(double ell, double sigma, double delta, double C,
                                            double diam_lambda, double epsilon);

// Windowed mean of the gradient-mapping norm ||t - Pi_T(t + eta_t g_t)||/eta_t.
// An approximation to the smoothed-envelope stationarity criterion, not its
// exact value; zero iff every windowed update was a fixed point of the
// projected step.
double stationarity_proxy(std::span<const HistoryEntry* const> window,
                          const ProjectionBoxes& boxes, double eta_t);
double stationarity_proxy(std::span<const HistoryEntry> window, const ProjectionBoxes& boxes,
                          double eta_t);

// Raised when a gradient or estimate turns non-finite mid-run; carries a
// state snapshot for the diagnostic dump.
struct nan_abort : std::runtime_error {
    nan_abort(const std::string& msg, std::string snapshot_json)
        : std::runtime_error(msg), snapshot(std::move(snapshot_json)) {}
    std::string snapshot;
};

struct RunResult {
    StochasticPolicy final_policy;
    StochasticPolicy uniform_policy; // iterate at a uniformly sampled iteration
    long uniform_iteration = 0;
    SgdaState state;
    std::vector<HistoryEntry> history;     // all J iterations
    std::vector<double> proxy_series;      // windowed proxy per iteration
    ProjectionBoxes boxes;
    std::vector<double> betas;               // m+1
    std::vector<double> per_step_thresholds; // m
    int horizon = 0;
    double gamma = 0.0;
};

// Outer loop: solver call -> batch collection -> gradient estimate ->
// projected step, for sgda.iterations rounds. Deterministic given the seed.
RunResult run(const RunConfig& config);

struct Checkpoint {
    RunConfig config;
    SgdaState state;
    StochasticPolicy final_policy;
    StochasticPolicy uniform_policy;
    long uniform_iteration = 0;
    int horizon = 0;
    double gamma = 0.0;
    std::vector<double> betas;
    std::vector<double> per_step_thresholds;
};

// Schema ckpt.v1.
nlohmann::json checkpoint_to_json(const RunConfig& config, const RunResult& result);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

} // namespace ocecrl
