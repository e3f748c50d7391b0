#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocecrl/policy.hpp"
#include "ocecrl/risk.hpp"

namespace ocecrl {

// Finite MDP with one objective reward table (index 0) and m constraint
// reward tables (indices 1..m). Immutable after construction.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;           // [s][a][s'] row-major
    std::vector<std::vector<double>> rewards; // [index][(s,a)]
    double gamma = 0.9;
    std::vector<double> initial_dist;

    int n_reward_channels() const { return static_cast<int>(rewards.size()); }
    int n_constraints() const { return n_reward_channels() - 1; }
    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int index, int s, int a) const {
        return rewards[index][static_cast<std::size_t>(s) * n_actions + a];
    }
    std::pair<double, double> reward_range(int index) const;

    void validate() const;
};

struct OccupancyMeasure {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> nu; // [s][a]

    double at(int s, int a) const { return nu[static_cast<std::size_t>(s) * n_actions + a]; }
    double total_mass() const;
    // max_s |sum_a nu(s,a) - (1-gamma) mu0(s) - gamma sum_{s',a'} nu(s',a') P(s|s',a')|
    double flow_residual(const TabularMdp& mdp) const;
    // Reward channel as a weighted discrete distribution.
    std::vector<WeightedSample> reward_distribution(const TabularMdp& mdp, int index) const;
};

// Discounted state-action occupancy of a policy, by solving the linear flow
// system (I - gamma P_pi^T) d = (1-gamma) mu0.
OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const StochasticPolicy& policy);

// (1/(1-gamma)) sum_{s,a} nu(s,a) rhat(s,a), where rhat is the raw reward or
// the CVaR transform at (t, beta) when both are given.
double discounted_value(const TabularMdp& mdp, const StochasticPolicy& policy, int reward_index,
                        std::optional<double> t = std::nullopt,
                        std::optional<double> beta = std::nullopt);

nlohmann::json mdp_to_json(const TabularMdp& mdp); // schema mdp.v1
TabularMdp mdp_from_json(const nlohmann::json& j);

} // namespace ocecrl
