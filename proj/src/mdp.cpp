#include "ocecrl/mdp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace ocecrl {

std::pair<double, double> TabularMdp::reward_range(int index) const {
    require(index >= 0 && index < n_reward_channels(), "reward index out of range");
    const auto& tab = rewards[index];
    auto [lo, hi] = std::minmax_element(tab.begin(), tab.end());
    return {*lo, *hi};
}

void TabularMdp::validate() const {
    require(n_states > 0 && n_actions > 0, "mdp dimensions must be positive");
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    require(transition.size() ==
                static_cast<std::size_t>(n_states) * n_actions * n_states,
            "transition tensor size mismatch");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double row = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                require(p(s, a, s2) >= 0.0, "transition probabilities must be nonnegative");
                row += p(s, a, s2);
            }
            require(std::abs(row - 1.0) <= 1e-12,
                    "transition row (" + std::to_string(s) + "," + std::to_string(a) +
                        ") must sum to 1 within 1e-12");
        }
    double init = 0.0;
    for (double x : initial_dist) {
        require(x >= 0.0, "initial distribution must be nonnegative");
        init += x;
    }
    require(initial_dist.size() == static_cast<std::size_t>(n_states),
            "initial distribution size mismatch");
    require(std::abs(init - 1.0) <= 1e-12, "initial distribution must sum to 1 within 1e-12");
    require(!rewards.empty(), "at least the objective reward table is required");
    for (const auto& tab : rewards) {
        require(tab.size() == static_cast<std::size_t>(n_states) * n_actions,
                "reward table size mismatch");
        for (double x : tab) require(std::isfinite(x), "rewards must be bounded");
    }
}

double OccupancyMeasure::total_mass() const {
    double acc = 0.0;
    for (double x : nu) acc += x;
    return acc;
}

double OccupancyMeasure::flow_residual(const TabularMdp& mdp) const {
    double worst = 0.0;
    for (int s = 0; s < n_states; ++s) {
        double outflow = 0.0;
        for (int a = 0; a < n_actions; ++a) outflow += at(s, a);
        double inflow = (1.0 - mdp.gamma) * mdp.initial_dist[s];
        for (int s2 = 0; s2 < n_states; ++s2)
            for (int a2 = 0; a2 < n_actions; ++a2)
                inflow += mdp.gamma * at(s2, a2) * mdp.p(s2, a2, s);
        worst = std::max(worst, std::abs(outflow - inflow));
    }
    return worst;
}

std::vector<WeightedSample> OccupancyMeasure::reward_distribution(const TabularMdp& mdp,
                                                                  int index) const {
    std::vector<WeightedSample> out;
    out.reserve(nu.size());
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) out.push_back({mdp.r(index, s, a), at(s, a)});
    return out;
}

OccupancyMeasure exact_occupancy(const TabularMdp& mdp, const StochasticPolicy& policy) {
    const int S = mdp.n_states, A = mdp.n_actions;
    const TabularPolicy pi = to_tabular(policy, S, A);

    // State-flow system: d(s) = (1-gamma) mu0(s) + gamma sum_{s'} d(s') P_pi(s|s')
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
    for (int s2 = 0; s2 < S; ++s2)
        for (int s = 0; s < S; ++s) {
            double flow = 0.0;
            for (int a = 0; a < A; ++a) flow += pi.prob(s2, a) * mdp.p(s2, a, s);
            M(s, s2) -= mdp.gamma * flow;
        }
    Eigen::VectorXd b(S);
    for (int s = 0; s < S; ++s) b(s) = (1.0 - mdp.gamma) * mdp.initial_dist[s];

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    Eigen::VectorXd d = lu.solve(b);
    if (!d.allFinite() || (M * d - b).cwiseAbs().maxCoeff() > 1e-8)
        throw std::runtime_error("occupancy flow system is numerically singular");

    OccupancyMeasure out{S, A, std::vector<double>(static_cast<std::size_t>(S) * A)};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out.nu[static_cast<std::size_t>(s) * A + a] = std::max(0.0, d(s)) * pi.prob(s, a);
    return out;
}

double discounted_value(const TabularMdp& mdp, const StochasticPolicy& policy, int reward_index,
                        std::optional<double> t, std::optional<double> beta) {
    require(reward_index >= 0 && reward_index < mdp.n_reward_channels(),
            "reward index out of range");
    require(t.has_value() == beta.has_value(),
            "transform needs both t and beta (or neither)");
    const OccupancyMeasure nu = exact_occupancy(mdp, policy);
    double acc = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double raw = mdp.r(reward_index, s, a);
            const double rhat = t ? transformed_reward(raw, *t, *beta) : raw;
            acc += nu.at(s, a) * rhat;
        }
    return acc / (1.0 - mdp.gamma);
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["schema"] = "mdp.v1";
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    j["initial_dist"] = mdp.initial_dist;
    j["transition"] = mdp.transition; // row-major [s][a][s']
    j["rewards"] = mdp.rewards;       // [index][(s,a)] row-major
    return j;
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
    require(j.is_object(), "mdp: expected an object");
    require(j.value("schema", "") == "mdp.v1", "mdp.schema: expected \"mdp.v1\"");
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    mdp.transition = j.at("transition").get<std::vector<double>>();
    mdp.rewards = j.at("rewards").get<std::vector<std::vector<double>>>();
    mdp.validate();
    return mdp;
}

} // namespace ocecrl
