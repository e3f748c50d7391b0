#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ocecrl/env.hpp"
#include "ocecrl/shaping.hpp"

namespace ocecrl {

struct SolverBudget {
    long max_env_steps = 1000000;
    long max_updates = 10000;
    double tolerance = 1e-8;

    void validate() const {
        require(max_env_steps > 0 && max_updates > 0 && tolerance > 0.0,
                "solver budget entries must be positive");
    }
};

struct SolverReport {
    StochasticPolicy policy;
    double attained_value = 0.0;
    long steps_used = 0;
    bool converged = false;
};

// Black-box policy optimizer for the shaped unconstrained problem
//   maximize E[sum_tau gamma^tau shaped_reward(spec, r(s,a))].
class PolicySolver {
  public:
    virtual ~PolicySolver() = default;
    virtual SolverReport solve(Environment& env, const ShapedRewardSpec& spec,
                               const SolverBudget& budget, std::uint64_t seed) = 0;
};

// Value iteration on the shaped reward table; terminates when the sup-norm
// Bellman residual drops below budget.tolerance. Returns the greedy
// deterministic policy with ties broken toward the lowest action index.
// Model-based: steps_used is 0.
class ExactValueIterationSolver final : public PolicySolver {
  public:
    SolverReport solve(Environment& env, const ShapedRewardSpec& spec, const SolverBudget& budget,
                       std::uint64_t seed) override;

    // One extra sweep from a solved value function; returns the residual.
    static double extra_sweep_residual(const TabularMdp& mdp, const ShapedRewardSpec& spec,
                                       const SolverBudget& budget);
};

struct PgConfig {
    int rollouts_per_update = 4;
    int horizon = 0; // 0: derive from gamma at the 1e-6 truncation level
    int epochs = 10;
    int minibatches = 4;
    double clip = 0.2;
    double gae_lambda = 0.95;
    double lr = 3e-4;
    double value_lr = 1e-2;
    double entropy_coef = 0.0; // keeps stochastic policies off the simplex boundary
    bool adam = true;          // false: plain SGD on the policy (value keeps Adam)
    bool normalize_advantages = true;
    bool warm_start = false;
    int gaussian_features = 2; // 1 = bias only, 1 + obs_dim otherwise
    double init_log_std = -2.302585092994046; // log(0.1)
    double log_std_lo = -4.605170185988091;   // log(0.01)
    double log_std_hi = -0.6931471805599453;  // log(0.5)

    void validate() const;
};

// Clipped-surrogate policy gradient with a learned baseline and GAE
// weighting. Returns the best-evaluated iterate within budget (scored by the
// batch-mean discounted shaped return of the parameters that produced the
// batch). The per-update randomness depends only on (seed, update index), so
// a larger budget extends a smaller one's iterate stream.
class ClippedSurrogatePgSolver final : public PolicySolver {
  public:
    explicit ClippedSurrogatePgSolver(PgConfig config = {});

    SolverReport solve(Environment& env, const ShapedRewardSpec& spec, const SolverBudget& budget,
                       std::uint64_t seed) override;

    void reset_warm_start();

  private:
    PgConfig cfg_;
    std::optional<StochasticPolicy> warm_policy_;
    std::vector<double> warm_values_;
};

struct OracleBiasPoint {
    std::vector<double> t;
    std::vector<double> lambda;
    double bias_norm = 0.0;
    double exact_grad_norm = 0.0;
};

struct OracleBiasReport {
    double delta = 0.0;               // max bias norm over the grid
    double max_exact_grad_norm = 0.0; // scale reference
    std::vector<OracleBiasPoint> points;
};

// Empirical bound for the inexact-oracle gradient bias: for every (t, lambda)
// grid point, solve with both solvers and compare the batch subgradient
// estimates under common random seeds; delta is the worst gap norm.
OracleBiasReport measure_oracle_bias(
    const TabularMdp& mdp, PolicySolver& inexact, PolicySolver& exact,
    std::span<const std::pair<std::vector<double>, std::vector<double>>> grid,
    std::span<const double> betas, std::span<const double> per_step_thresholds, int n_samples,
    std::uint64_t seed, const SolverBudget& inexact_budget, const SolverBudget& exact_budget,
    int horizon = 0);

} // namespace ocecrl
