#pragma once

#include <random>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocecrl/common.hpp"

namespace ocecrl {

// Explicit per-state action probabilities; rows sum to 1 within 1e-12.
struct TabularPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // [s][a] row-major

    double prob(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    void validate() const;
};

// Softmax over linear logits. On tabular state spaces the features are the
// one-hot state indicator, so weights are per-(state, action) logits.
struct SoftmaxLinearPolicy {
    int n_features = 0;
    int n_actions = 0;
    std::vector<double> weights; // [feature][action] row-major

    void action_probs(int state_index, std::span<double> out) const;
};

// Gaussian action with linear mean on [1, obs...] features and a learnable
// log standard deviation bounded in a box.
struct GaussianLinearPolicy {
    int n_features = 1; // 1 = bias only, 1 + obs_dim = bias plus observation
    std::vector<double> mean_weights;
    double log_std = 0.0;
    double log_std_lo = -6.0;
    double log_std_hi = 1.0;

    double mean(std::span<const double> obs) const;
    double std_dev() const { return std::exp(clip(log_std, log_std_lo, log_std_hi)); }
    void validate() const;
};

using StochasticPolicy = std::variant<TabularPolicy, SoftmaxLinearPolicy, GaussianLinearPolicy>;

void validate_policy(const StochasticPolicy& policy);

// Samples an action given the observation. Discrete policies write a single
// action index; the Gaussian policy writes one real action.
void sample_action(const StochasticPolicy& policy, std::span<const double> obs,
                   std::span<double> action_out, std::mt19937_64& rng);

// Deterministic evaluation action: Gaussian policies use the mean, discrete
// policies still sample (they represent genuinely stochastic behavior).
void eval_action(const StochasticPolicy& policy, std::span<const double> obs,
                 std::span<double> action_out, std::mt19937_64& rng);

// Collapse onto explicit per-state probabilities. Works for tabular policies
// and for softmax policies with one-hot state features.
TabularPolicy to_tabular(const StochasticPolicy& policy, int n_states, int n_actions);

nlohmann::json policy_to_json(const StochasticPolicy& policy); // schema policy.v1
StochasticPolicy policy_from_json(const nlohmann::json& j);

} // namespace ocecrl
