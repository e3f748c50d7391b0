#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ocecrl/env.hpp"
#include "ocecrl/verify.hpp"

using namespace ocecrl;

namespace {

TabularPolicy single_action_policy(int n_states) {
    return TabularPolicy{n_states, 1, std::vector<double>(n_states, 1.0)};
}

} // namespace

TEST_CASE("model validation") {
    TabularMdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = 1;
    mdp.gamma = 0.5;
    mdp.transition = {1.0};
    mdp.initial_dist = {1.0};
    mdp.rewards = {{2.0}};
    CHECK_NOTHROW(mdp.validate());

    TabularMdp bad = mdp;
    bad.transition = {0.9};
    CHECK_THROWS_AS(bad.validate(), validation_error);
    bad = mdp;
    bad.rewards[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(bad.validate(), validation_error);
    bad = mdp;
    bad.initial_dist = {0.5};
    CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("occupancy of degenerate chains") {
    TabularMdp single;
    single.n_states = 1;
    single.n_actions = 1;
    single.gamma = 0.7;
    single.transition = {1.0};
    single.initial_dist = {1.0};
    single.rewards = {{2.0}};
    const OccupancyMeasure nu = exact_occupancy(single, single_action_policy(1));
    CHECK(nu.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // two-state chain s0 -> s1 -> s1, gamma 1/2: mass splits evenly
    TabularMdp chain;
    chain.n_states = 2;
    chain.n_actions = 1;
    chain.gamma = 0.5;
    chain.transition = {0.0, 1.0, 0.0, 1.0};
    chain.initial_dist = {1.0, 0.0};
    chain.rewards = {{0.0, 1.0}};
    const OccupancyMeasure nu2 = exact_occupancy(chain, single_action_policy(2));
    CHECK(nu2.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(nu2.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("flow consistency and total mass on random instances") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const TabularMdp mdp = random_mdp(rng, 2 + trial % 5, 2 + trial % 3, 2, 0.3, 0.95);
        const TabularPolicy policy = random_policy(rng, mdp.n_states, mdp.n_actions);
        const OccupancyMeasure nu = exact_occupancy(mdp, policy);
        REQUIRE(std::abs(nu.total_mass() - 1.0) <= 1e-10);
        REQUIRE(nu.flow_residual(mdp) <= 1e-8);
        for (double x : nu.nu) REQUIRE(x >= 0.0);
    }
}

TEST_CASE("occupancy separates policies that differ on a reachable state") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const TabularMdp mdp = random_mdp(rng, 3, 2, 1, 0.5, 0.9, 0.05);
        const TabularPolicy p1 = random_policy(rng, 3, 2, 0.1);
        TabularPolicy p2 = p1;
        const int s = static_cast<int>(rng() % 3);
        p2.probs[s * 2] = clip(p1.probs[s * 2] + 0.25, 0.0, 1.0);
        p2.probs[s * 2 + 1] = 1.0 - p2.probs[s * 2];
        const OccupancyMeasure nu1 = exact_occupancy(mdp, p1);
        const OccupancyMeasure nu2 = exact_occupancy(mdp, p2);
        double l1 = 0.0;
        for (std::size_t i = 0; i < nu1.nu.size(); ++i) l1 += std::abs(nu1.nu[i] - nu2.nu[i]);
        REQUIRE(l1 > 1e-12);
    }
}

TEST_CASE("discounted values, raw and transformed") {
    TabularMdp single;
    single.n_states = 1;
    single.n_actions = 1;
    single.gamma = 0.5;
    single.transition = {1.0};
    single.initial_dist = {1.0};
    single.rewards = {{2.0}};
    const auto policy = single_action_policy(1);
    CHECK(discounted_value(single, policy, 0) == doctest::Approx(4.0));
    CHECK(discounted_value(single, policy, 0, 3.0, 1.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(discounted_value(single, policy, 2), validation_error);
    CHECK_THROWS_AS(discounted_value(single, policy, 0, 1.0, std::nullopt), validation_error);
}

TEST_CASE("occupancy value matches a truncated monte-carlo estimate") {
    std::mt19937_64 rng(23);
    const TabularMdp mdp = random_mdp(rng, 4, 2, 1, 0.9, 0.9);
    const TabularPolicy policy = random_policy(rng, 4, 2, 0.05);
    const double t = 0.4, beta = 0.3;
    const double exact = discounted_value(mdp, policy, 0, t, beta);

    auto env = make_tabular_env(mdp);
    const int horizon = truncation_horizon(0.9, 1e-6);
    const int n = 100000;
    std::vector<double> returns(n);
    auto worker = env->clone();
    for (int k = 0; k < n; ++k) {
        const Trajectory traj = rollout(*worker, policy, horizon, derive_seed(555, 1, k));
        double disc = 1.0, acc = 0.0;
        for (int tau = 0; tau < traj.length(); ++tau) {
            acc += disc * transformed_reward(traj.reward(tau, 0), t, beta);
            disc *= 0.9;
        }
        returns[k] = acc;
    }
    double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double var = 0.0;
    for (double x : returns) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / (n - 1.0) / n);
    CHECK(std::abs(exact - mean) <= 3 * se + 1e-9);
}

TEST_CASE("rollouts are reproducible and respect the horizon") {
    GridNavParams params;
    params.unsafe_cells = {{2, 2}};
    params.slip_prob = 0.1;
    const TabularMdp mdp = make_gridnav(params);
    auto env = make_tabular_env(mdp);
    std::mt19937_64 rng(24);
    const TabularPolicy policy = random_policy(rng, mdp.n_states, mdp.n_actions);

    const Trajectory a = rollout(*env, policy, 40, 777);
    const Trajectory b = rollout(*env, policy, 40, 777);
    REQUIRE(a.length() == 40);
    CHECK(a.observations == b.observations);
    CHECK(a.actions == b.actions);
    CHECK(a.rewards == b.rewards);
    CHECK(a.truncated_at == a.length());

    const Trajectory c = rollout(*env, policy, 40, 778);
    CHECK(a.actions != c.actions);
}

TEST_CASE("horizon for the discounted tail") {
    CHECK(truncation_horizon(0.99, 1e-6) == 1375);
    CHECK(truncation_horizon(0.9, 1e-6) == 132);
    CHECK_THROWS_AS(truncation_horizon(1.0, 1e-6), validation_error);
}

TEST_CASE("grid navigation construction") {
    GridNavParams tiny;
    tiny.width = 2;
    tiny.height = 1;
    tiny.start = {0, 0};
    tiny.goal = {1, 0};
    const TabularMdp mdp = make_gridnav(tiny);
    CHECK(mdp.n_states == 2);
    // no unsafe cells: constraint channel identically zero
    for (double x : mdp.rewards[1]) CHECK(x == 0.0);

    GridNavParams four;
    four.width = 4;
    four.height = 4;
    four.goal = {3, 3};
    four.unsafe_cells = {{1, 1}, {2, 1}, {1, 2}};
    four.slip_prob = 0.1;
    CHECK_NOTHROW(make_gridnav(four).validate()); // row sums checked inside

    GridNavParams overlap = four;
    overlap.unsafe_cells = {{3, 3}};
    CHECK_THROWS_AS(make_gridnav(overlap), validation_error);
    GridNavParams outside = four;
    outside.goal = {9, 0};
    CHECK_THROWS_AS(make_gridnav(outside), validation_error);
}

TEST_CASE("point mass dynamics and noise level") {
    PointMassParams params;
    params.vel_threshold = 0.5;

    SUBCASE("zero action keeps the velocity at rest") {
        params.action_noise_std = 0.0;
        auto env = make_pointmass(params);
        std::mt19937_64 rng(25);
        std::vector<double> obs(1), rewards(2);
        env->reset(rng, obs);
        for (int k = 0; k < 50; ++k) {
            std::vector<double> action = {0.0};
            env->step(action, rng, obs, rewards);
            CHECK(obs[0] == 0.0);
            CHECK(rewards[1] == 0.0);
        }
    }

    SUBCASE("full throttle saturates at v_max") {
        params.action_noise_std = 0.0;
        auto env = make_pointmass(params);
        std::mt19937_64 rng(26);
        std::vector<double> obs(1), rewards(2);
        env->reset(rng, obs);
        for (int k = 0; k < 200; ++k) {
            std::vector<double> action = {1.0};
            env->step(action, rng, obs, rewards);
        }
        CHECK(obs[0] == doctest::Approx(params.v_max));
        CHECK(rewards[0] == doctest::Approx(params.v_max));
        CHECK(rewards[1] == doctest::Approx(-params.v_max));
    }

    SUBCASE("executed-action perturbation std sits at the configured level") {
        auto env = make_pointmass(params); // noise std 0.05
        std::mt19937_64 rng(27);
        std::vector<double> obs(1), rewards(2);
        env->reset(rng, obs);
        // recover the executed action from the velocity update
        double v_prev = 0.0;
        std::vector<double> noise;
        for (int k = 0; k < 10000; ++k) {
            std::vector<double> action = {0.0};
            env->step(action, rng, obs, rewards);
            const double executed = (obs[0] - v_prev * (1.0 - params.drag)) / params.accel;
            noise.push_back(executed);
            v_prev = obs[0];
        }
        double mean = std::accumulate(noise.begin(), noise.end(), 0.0) / noise.size();
        double var = 0.0;
        for (double x : noise) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / (noise.size() - 1.0));
        CHECK(sd >= 0.045);
        CHECK(sd <= 0.055);
    }
}

TEST_CASE("trajectory csv layout") {
    TabularMdp single;
    single.n_states = 1;
    single.n_actions = 1;
    single.gamma = 0.5;
    single.transition = {1.0};
    single.initial_dist = {1.0};
    single.rewards = {{2.0}, {0.5}};
    auto env = make_tabular_env(single);
    const Trajectory traj = rollout(*env, single_action_policy(1), 3, 1);
    std::ostringstream out;
    write_trajectory_csv(out, traj);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,state_0,action_0,r_0,r_1");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("policy json round trips for every representation") {
    {
        TabularPolicy p{2, 2, {0.25, 0.75, 1.0, 0.0}};
        const StochasticPolicy back = policy_from_json(policy_to_json(p));
        CHECK(std::get<TabularPolicy>(back).probs == p.probs);
    }
    {
        SoftmaxLinearPolicy p{3, 2, {0.1, -0.4, 0.0, 2.0, -1.0, 1.0}};
        const StochasticPolicy back = policy_from_json(policy_to_json(p));
        CHECK(std::get<SoftmaxLinearPolicy>(back).weights == p.weights);
    }
    {
        GaussianLinearPolicy p;
        p.n_features = 2;
        p.mean_weights = {0.3, -0.2};
        p.log_std = -1.5;
        const StochasticPolicy back = policy_from_json(policy_to_json(p));
        const auto& g = std::get<GaussianLinearPolicy>(back);
        CHECK(g.mean_weights == p.mean_weights);
        CHECK(g.log_std == p.log_std);
        CHECK(g.log_std_lo == p.log_std_lo);
    }
    nlohmann::json bad;
    bad["schema"] = "policy.v1";
    bad["representation"] = "neural";
    CHECK_THROWS_AS(policy_from_json(bad), validation_error);

    nlohmann::json unsound = policy_to_json(TabularPolicy{1, 2, {0.7, 0.7}});
    CHECK_THROWS_AS(policy_from_json(unsound), validation_error);
}

TEST_CASE("model json round trip") {
    std::mt19937_64 rng(28);
    const TabularMdp mdp = random_mdp(rng, 3, 2, 2, 0.5, 0.9);
    const TabularMdp back = mdp_from_json(mdp_to_json(mdp));
    CHECK(back.n_states == mdp.n_states);
    CHECK(back.transition == mdp.transition);
    CHECK(back.rewards == mdp.rewards);
    CHECK(back.initial_dist == mdp.initial_dist);
    CHECK(back.gamma == mdp.gamma);

    nlohmann::json j = mdp_to_json(mdp);
    j["transition"][0] = 0.123; // break a row sum
    CHECK_THROWS_AS(mdp_from_json(j), validation_error);
}
