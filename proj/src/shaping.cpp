#include "ocecrl/shaping.hpp"

#include <cmath>

namespace ocecrl {

void ShapedRewardSpec::validate() const {
    const std::size_t m = lambda.size();
    require(t.size() == m + 1, "t must have m+1 entries");
    require(betas.size() == m + 1, "betas must have m+1 entries");
    require(per_step_thresholds.size() == m, "one per-step threshold per constraint");
    for (double b : betas) require(b > 0.0 && b <= 1.0, "beta must lie in (0, 1]");
    for (double l : lambda) require(l >= 0.0 && std::isfinite(l), "lambda must be nonnegative");
    for (double x : t) require(std::isfinite(x), "t must be finite");
}

double shaped_reward(const ShapedRewardSpec& spec, std::span<const double> reward_vector) {
    require(reward_vector.size() == spec.t.size(),
            "reward vector length must match the number of channels");
    double acc = transformed_reward(reward_vector[0], spec.t[0], spec.betas[0]);
    for (std::size_t i = 0; i < spec.lambda.size(); ++i) {
        const double rp =
            transformed_reward(reward_vector[i + 1], spec.t[i + 1], spec.betas[i + 1]);
        acc += spec.lambda[i] * (rp - spec.per_step_thresholds[i]);
    }
    return acc;
}

std::vector<double> shaped_reward_table(const TabularMdp& mdp, const ShapedRewardSpec& spec) {
    require(static_cast<std::size_t>(mdp.n_reward_channels()) == spec.t.size(),
            "model reward channels must match the shaping spec");
    std::vector<double> table(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    std::vector<double> rv(spec.t.size());
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int i = 0; i < mdp.n_reward_channels(); ++i) rv[i] = mdp.r(i, s, a);
            table[static_cast<std::size_t>(s) * mdp.n_actions + a] = shaped_reward(spec, rv);
        }
    return table;
}

} // namespace ocecrl
