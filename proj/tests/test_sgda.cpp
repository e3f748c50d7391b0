#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ocecrl/diagnostics.hpp"
#include "ocecrl/sgda.hpp"
#include <nlohmann/json.hpp>

#include "ocecrl/verify.hpp"

using namespace ocecrl;

namespace {

Trajectory one_step_trajectory(std::vector<double> rewards) {
    Trajectory traj;
    traj.obs_dim = 1;
    traj.action_dim = 1;
    traj.n_reward_channels = static_cast<int>(rewards.size());
    traj.observations = {0.0};
    traj.actions = {0.0};
    traj.rewards = std::move(rewards);
    traj.truncated_at = 1;
    return traj;
}

} // namespace

TEST_CASE("batch subgradients") {
    const std::vector<double> betas = {0.5, 1.0};
    const std::vector<double> cbars = {0.7};

    SUBCASE("constraints met with equality zero out the multiplier gradient") {
        // beta_1 = 1, t_1 >= r_1: the transform returns r_1 = cbar exactly
        std::vector<Trajectory> batch = {one_step_trajectory({2.0, 0.7}),
                                         one_step_trajectory({1.0, 0.7})};
        const std::vector<double> t = {3.0, 1.0};
        const std::vector<double> lambda = {0.4};
        const GradEstimate g = estimate_gradients(batch, t, lambda, betas, cbars, 0.9);
        CHECK(g.g_lambda[0] == 0.0);
        CHECK(g.n_trajectories == 2);
    }

    SUBCASE("zero multipliers freeze the constraint-slot t gradient") {
        std::vector<Trajectory> batch = {one_step_trajectory({2.0, 0.1})};
        const std::vector<double> t = {3.0, 1.0};
        const std::vector<double> lambda = {0.0};
        const GradEstimate g = estimate_gradients(batch, t, lambda, betas, cbars, 0.9);
        CHECK(g.g_t[1] == 0.0);
    }

    SUBCASE("single-step hand expansion") {
        std::vector<Trajectory> batch = {one_step_trajectory({2.0, 0.0})};
        const std::vector<double> t = {3.0, -1.0};
        const std::vector<double> lambda = {1.0};
        const GradEstimate g = estimate_gradients(batch, t, lambda, betas, cbars, 0.5);
        CHECK(g.g_t[0] == doctest::Approx(-1.0)); // 1 - (1/0.5) * 1{3 >= 2}
    }

    SUBCASE("empty batch is rejected") {
        const std::vector<double> t = {0.0, 0.0};
        const std::vector<double> lambda = {0.0};
        CHECK_THROWS_AS(estimate_gradients({}, t, lambda, betas, cbars, 0.9), validation_error);
    }
}

TEST_CASE("projected step") {
    ProjectionBoxes boxes;
    boxes.t_boxes = {{-1.0, 1.0}, {-1.0, 0.0}};
    boxes.lambda_box = {{0.0, 100.0}};
    SgdaState state;
    state.t = {0.2, -0.5};
    state.lambda = {0.0};
    state.eta_t = 0.1;
    state.eta_lambda = 0.1;

    SUBCASE("zero gradients only advance the counter") {
        GradEstimate zero{{0.0, 0.0}, {0.0}, 1};
        sgda_step(state, zero, boxes);
        CHECK(state.iteration == 1);
        CHECK(state.t == std::vector<double>{0.2, -0.5});
        CHECK(state.lambda == std::vector<double>{0.0});
    }

    SUBCASE("descent from the lambda floor stays at the floor") {
        GradEstimate g{{0.0, 0.0}, {10.0}, 1};
        sgda_step(state, g, boxes);
        CHECK(state.lambda[0] == 0.0);
    }

    SUBCASE("t updates clip at the box edge") {
        GradEstimate g{{100.0, 100.0}, {0.0}, 1};
        sgda_step(state, g, boxes);
        CHECK(state.t[0] == 1.0);
        CHECK(state.t[1] == 0.0);
    }
}

TEST_CASE("projection boxes must contain the reward ranges") {
    ProjectionBoxes boxes;
    boxes.t_boxes = {{0.0, 1.0}};
    boxes.lambda_box = {};
    std::vector<std::pair<double, double>> ranges = {{-0.5, 0.5}};
    CHECK_THROWS_AS(boxes.validate(ranges), validation_error);
    boxes.t_boxes = {{-0.5, 1.0}};
    CHECK_NOTHROW(boxes.validate(ranges));
}

TEST_CASE("analysis step sizes") {
    {
        const auto [eta_t, eta_lambda] = theory_step_sizes(1.0, 0.0, 0.0, 1.0, 1.0, 1.0);
        CHECK(eta_lambda == doctest::Approx(0.5)); // variance term drops out
        CHECK(eta_t > 0.0);
    }
    {
        const auto [eta_t, eta_lambda] = theory_step_sizes(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        CHECK(eta_lambda == doctest::Approx(1.0 / 32.0));
        (void)eta_t;
    }
    {
        // widening the target never shrinks the lambda step
        const auto [t1, l1] = theory_step_sizes(2.0, 1.0, 0.5, 1.5, 2.0, 0.5);
        const auto [t2, l2] = theory_step_sizes(2.0, 1.0, 0.5, 1.5, 2.0, 1.0);
        CHECK(l2 >= l1);
        CHECK(t2 >= t1);
    }
    CHECK_THROWS_AS(theory_step_sizes(0.0, 0.0, 0.0, 1.0, 1.0, 1.0), validation_error);
    CHECK_THROWS_AS(theory_step_sizes(1.0, -0.1, 0.0, 1.0, 1.0, 1.0), validation_error);
}

TEST_CASE("gradient-mapping proxy") {
    ProjectionBoxes boxes;
    boxes.t_boxes = {{-1.0, 1.0}};
    boxes.lambda_box = {};

    SUBCASE("zero gradients give zero") {
        std::vector<HistoryEntry> window(3);
        for (auto& e : window) {
            e.t = {0.3};
            e.g_t = {0.0};
        }
        CHECK(stationarity_proxy(window, boxes, 0.1) == 0.0);
    }

    SUBCASE("an outward gradient at a box edge is a projected fixed point") {
        std::vector<HistoryEntry> window(1);
        window[0].t = {1.0};
        window[0].g_t = {50.0};
        CHECK(stationarity_proxy(window, boxes, 0.1) == 0.0);
    }

    SUBCASE("synthetic quadratic descent decays below 1e-3 within 1e4 steps") {
        const double ell = 1.0, eta = 1e-2, target = 0.3;
        SgdaState state;
        state.t = {-0.8};
        state.eta_t = eta;
        state.history_capacity = 25;
        bool reached = false;
        for (int j = 0; j < 10000 && !reached; ++j) {
            GradEstimate g{{-ell * (state.t[0] - target)}, {}, 1};
            HistoryEntry e;
            e.iteration = j;
            e.t = state.t;
            e.g_t = g.g_t;
            state.record(e);
            const double proxy = stationarity_proxy(state.window(25), boxes, eta);
            reached = proxy < 1e-3;
            sgda_step(state, g, boxes);
        }
        CHECK(reached);
    }
}

TEST_CASE("history ring stays bounded") {
    SgdaState state;
    state.history_capacity = 4;
    for (int j = 0; j < 10; ++j) {
        HistoryEntry e;
        e.iteration = j;
        e.t = {0.0};
        e.g_t = {0.0};
        state.record(e);
    }
    CHECK(state.history.size() == 4);
    CHECK(state.history.front().iteration == 6);
    CHECK(state.window(2).size() == 2);
    CHECK(state.window(99).size() == 4);
}

namespace {

RunConfig small_gridnav_config() {
    RunConfig config;
    config.seed = 51;
    config.environment.name = "gridnav";
    config.environment.gridnav.width = 3;
    config.environment.gridnav.height = 3;
    config.environment.gridnav.goal = {2, 2};
    config.environment.gridnav.unsafe_cells = {{1, 1}};
    config.environment.gridnav.gamma = 0.9;
    ConstraintConfig c;
    c.index = 1;
    c.beta = 0.3;
    c.threshold = 0.0;
    c.orientation = "cost";
    config.constraints = {c};
    config.solver.kind = "exact";
    config.solver.budget = {1, 100000, 1e-10};
    config.sgda.iterations = 6;
    config.sgda.batch_size = 2;
    config.sgda.eta_t = 1e-3;
    config.sgda.eta_lambda = 1e-3;
    return config;
}

} // namespace

TEST_CASE("driver runs are deterministic given the seed") {
    const RunConfig config = small_gridnav_config();
    const RunResult a = run(config);
    const RunResult b = run(config);
    REQUIRE(a.history.size() == 6);
    REQUIRE(b.history.size() == 6);
    for (std::size_t j = 0; j < a.history.size(); ++j) {
        CHECK(a.history[j].t == b.history[j].t);
        CHECK(a.history[j].lambda == b.history[j].lambda);
        CHECK(a.history[j].g_t == b.history[j].g_t);
        CHECK(a.history[j].g_lambda == b.history[j].g_lambda);
        CHECK(a.history[j].objective_estimate == b.history[j].objective_estimate);
    }
    CHECK(a.uniform_iteration == b.uniform_iteration);
    CHECK(a.proxy_series == b.proxy_series);

    std::ostringstream csv_a, csv_b;
    write_history_csv(csv_a, a.history, a.proxy_series);
    write_history_csv(csv_b, b.history, b.proxy_series);
    CHECK(csv_a.str() == csv_b.str());

    // projection safety along the way
    for (const auto& e : a.history) {
        for (std::size_t i = 0; i < e.t.size(); ++i) {
            CHECK(e.t[i] >= a.boxes.t_boxes[i].lo);
            CHECK(e.t[i] <= a.boxes.t_boxes[i].hi);
        }
        for (std::size_t i = 0; i < e.lambda.size(); ++i) {
            CHECK(e.lambda[i] >= 0.0);
            CHECK(e.lambda[i] <= a.boxes.lambda_box[i].hi);
        }
    }
}

TEST_CASE("a constraint-free neutral run degenerates to one solver call") {
    RunConfig config = small_gridnav_config();
    config.constraints.clear();
    config.sgda.objective_beta = 1.0;
    config.sgda.iterations = 3;
    config.sgda.t_init = {{1.0}}; // box top: the transform passes rewards through
    const RunResult result = run(config);

    const TabularMdp mdp = make_gridnav(config.environment.gridnav);
    auto env = remap_reward_channels(make_tabular_env(mdp), {0});
    ExactValueIterationSolver solver;
    ShapedRewardSpec raw;
    raw.t = {1.0};
    raw.betas = {1.0};
    const SolverReport direct = solver.solve(*env, raw, config.solver.budget, 0);
    CHECK(to_tabular(result.final_policy, 9, 4).probs == to_tabular(direct.policy, 9, 4).probs);
}

TEST_CASE("risk-neutral slots keep t frozen and pass raw rewards through") {
    RunConfig config = small_gridnav_config();
    config.sgda.objective_beta = 1.0;
    config.constraints[0].beta = 1.0;
    // pin t at the box tops so min(t, r) = r for every reward
    config.sgda.t_init = {{1.0, 0.0}};
    const RunResult result = run(config);
    for (const auto& e : result.history) {
        CHECK(e.g_t[0] == 0.0);
        CHECK(e.t == std::vector<double>{1.0, 0.0});
    }
}

TEST_CASE("checkpoint json round trip") {
    const RunConfig config = small_gridnav_config();
    const RunResult result = run(config);
    const nlohmann::json j = checkpoint_to_json(config, result);
    const Checkpoint ckpt = checkpoint_from_json(j);
    CHECK(ckpt.state.t == result.state.t);
    CHECK(ckpt.state.lambda == result.state.lambda);
    CHECK(ckpt.uniform_iteration == result.uniform_iteration);
    CHECK(ckpt.horizon == result.horizon);
    CHECK(ckpt.betas == result.betas);
    CHECK(to_tabular(ckpt.final_policy, 9, 4).probs ==
          to_tabular(result.final_policy, 9, 4).probs);

    nlohmann::json bad = j;
    bad["state"].erase("t");
    CHECK_THROWS(checkpoint_from_json(bad));
}
