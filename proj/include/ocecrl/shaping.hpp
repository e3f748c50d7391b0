#pragma once

#include <span>
#include <vector>

#include "ocecrl/mdp.hpp"
#include "ocecrl/risk.hpp"

namespace ocecrl {

// One inequality constraint on a reward channel. Thresholds are stored
// per step; the discounted-total threshold equals per_step_threshold/(1-gamma).
// A "cost" orientation constraint (variable u <= c) is converted at
// construction time: reward channel -u, per-step threshold -c.
struct ConstraintSpec {
    int index = 1; // reward channel 1..m
    double beta = 0.3;
    double per_step_threshold = 0.0;
    Orientation original_orientation = Orientation::loss;
};

// The (t, lambda) parameters of the per-step shaped reward.
struct ShapedRewardSpec {
    std::vector<double> t;                   // m+1
    std::vector<double> lambda;              // m, nonnegative
    std::vector<double> betas;               // m+1
    std::vector<double> per_step_thresholds; // m

    int n_constraints() const { return static_cast<int>(lambda.size()); }
    void validate() const;
};

// r'_0(r_0, t_0) + sum_i lambda_i (r'_i(r_i, t_i) - cbar_i)
double shaped_reward(const ShapedRewardSpec& spec, std::span<const double> reward_vector);

// Shaped reward evaluated on every (s, a) pair of a tabular model.
std::vector<double> shaped_reward_table(const TabularMdp& mdp, const ShapedRewardSpec& spec);

} // namespace ocecrl
