#pragma once

#include <string>
#include <vector>

#include "ocecrl/diagnostics.hpp"

namespace ocecrl {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double runtime_seconds = 0.0;
};

// Property suites behind `verify`:
//   oce         closed-form risk optimizer vs. sorting oracle, shift property,
//               beta = 1 degeneration
//   equivalence exact occupancy-based values vs. Monte-Carlo rollout estimates
//   limit       small-beta risk limit against the worst reachable reward
//   duality     grid duality gap on the two-state instance at fixed t
//   nesting     joint (t, policy) grid optimum vs. exact-t optimum
//   gradients   batch subgradient estimates vs. analytic gradients
SuiteResult run_suite(const std::string& name);
std::vector<SuiteResult> run_suites(const std::string& name); // a suite or "all"
const std::vector<std::string>& suite_names();

// Canonical 2-state/2-action instance with a binding risk constraint and a
// strictly feasible policy. Constraint: channel 1 at beta 0.3 with per-step
// threshold -0.2 (cost orientation: the worst-0.3-mass mean of the graded
// cost stays below 0.2).
TabularMdp canonical_two_state_mdp();
std::vector<ConstraintSpec> canonical_two_state_constraints();
constexpr double kCanonicalObjectiveBeta = 0.3;

// Random instances for the property suites.
TabularMdp random_mdp(std::mt19937_64& rng, int n_states, int n_actions, int channels,
                      double gamma_lo, double gamma_hi, double min_transition = 0.0);
TabularPolicy random_policy(std::mt19937_64& rng, int n_states, int n_actions,
                            double min_prob = 0.0);

// sum_{tau < horizon} gamma^tau E[x(s_tau, a_tau)] by exact forward
// propagation of the state distribution; matches the truncated rollout
// estimators in expectation.
double finite_horizon_expectation(const TabularMdp& mdp, const TabularPolicy& policy, int horizon,
                                  std::span<const double> per_pair_value);

} // namespace ocecrl
