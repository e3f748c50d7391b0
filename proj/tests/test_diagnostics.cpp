#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ocecrl/diagnostics.hpp"
#include "ocecrl/solvers.hpp"
#include "ocecrl/verify.hpp"

using namespace ocecrl;

TEST_CASE("simplex grid enumerates compositions") {
    CHECK(simplex_grid(2, 4).size() == 5);
    CHECK(simplex_grid(3, 2).size() == 6);
    for (const auto& row : simplex_grid(3, 5)) {
        double total = 0.0;
        for (double x : row) total += x;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("grid guard rejects oversized searches") {
    std::mt19937_64 rng(71);
    const TabularMdp mdp = random_mdp(rng, 6, 4, 2, 0.5, 0.9);
    CHECK_THROWS_AS(brute_force_primal(mdp, canonical_two_state_constraints(), 0.3, 40),
                    validation_error);
}

TEST_CASE("grid oracle against the exact solver when constraints are off") {
    const TabularMdp mdp = canonical_two_state_mdp();
    // thresholds far below anything attainable: constraint never binds
    std::vector<ConstraintSpec> slack = canonical_two_state_constraints();
    slack[0].per_step_threshold = -100.0;
    const OracleSolution sol = brute_force_primal(mdp, slack, 0.3, 20);
    REQUIRE(sol.feasible);

    // cross-check: best transformed value over a fine t grid via value iteration
    ExactValueIterationSolver solver;
    auto env = make_tabular_env(mdp);
    const auto [rlo, rhi] = mdp.reward_range(0);
    const int t_points = 200;
    double best = -1e300;
    for (int k = 0; k <= t_points; ++k) {
        const double t = rlo + (rhi - rlo) * k / t_points;
        ShapedRewardSpec spec;
        spec.t = {t, 0.0};
        spec.lambda = {0.0};
        spec.betas = {0.3, 0.3};
        spec.per_step_thresholds = {0.0};
        best = std::max(best, solver.solve(*env, spec, {1, 100000, 1e-11}, 0).attained_value);
    }
    // the oracle grids the policy but treats t exactly; the cross-check does
    // the opposite, so each side may lead by its own resolution
    const double t_slack =
        (rhi - rlo) / t_points * std::max(1.0, 1.0 / 0.3 - 1.0) / (1.0 - mdp.gamma);
    CHECK(sol.objective == doctest::Approx(best).epsilon(0.02));
    CHECK(sol.objective <= best + t_slack);
}

TEST_CASE("grid oracle flags infeasible thresholds and binding constraints") {
    const TabularMdp mdp = canonical_two_state_mdp();
    std::vector<ConstraintSpec> impossible = canonical_two_state_constraints();
    impossible[0].per_step_threshold = 0.5; // above the best attainable value 0
    CHECK_FALSE(brute_force_primal(mdp, impossible, 0.3, 10).feasible);

    std::vector<ConstraintSpec> binding = canonical_two_state_constraints();
    std::vector<ConstraintSpec> slack = binding;
    slack[0].per_step_threshold = -100.0;
    const OracleSolution constrained = brute_force_primal(mdp, binding, 0.3, 20);
    const OracleSolution unconstrained = brute_force_primal(mdp, slack, 0.3, 20);
    REQUIRE(constrained.feasible);
    CHECK(constrained.objective < unconstrained.objective - 1e-3);
    CHECK(constrained.constraint_values[0] >= binding[0].per_step_threshold - 1e-9);
}

TEST_CASE("tightening a threshold never improves the oracle objective") {
    const TabularMdp mdp = canonical_two_state_mdp();
    double previous = 1e300;
    for (double threshold : {-3.0, -1.0, -0.5, -0.3, -0.1, -0.02}) {
        std::vector<ConstraintSpec> cons = canonical_two_state_constraints();
        cons[0].per_step_threshold = threshold;
        const OracleSolution sol = brute_force_primal(mdp, cons, 0.3, 14);
        if (!sol.feasible) {
            previous = -1e300;
            continue;
        }
        CHECK(sol.objective <= previous + 1e-9);
        previous = sol.objective;
    }
}

TEST_CASE("duality probe edge paths") {
    const TabularMdp mdp = canonical_two_state_mdp();

    SUBCASE("no constraints: the gap is exactly zero") {
        const DualityGapProbe probe =
            duality_gap_probe(mdp, {}, 0.3, std::vector<double>{0.45}, 4.0, 41, 14);
        CHECK(probe.slater_ok); // vacuously strict
        CHECK(probe.gap == doctest::Approx(0.0));
    }

    SUBCASE("infeasible fixed t is flagged, no gap is reported") {
        // t_1 = -1 makes every policy's constraint value -1 < -0.3
        const DualityGapProbe probe = duality_gap_probe(
            mdp, canonical_two_state_constraints(), 0.3, std::vector<double>{0.45, -1.0}, 4.0, 41,
            14);
        CHECK(probe.flagged);
        CHECK(std::isnan(probe.gap));
    }
}

TEST_CASE("evaluation of a deterministic policy on a deterministic grid") {
    GridNavParams params;
    params.width = 3;
    params.height = 1;
    params.start = {0, 0};
    params.goal = {2, 0};
    params.slip_prob = 0.0;
    const TabularMdp mdp = make_gridnav(params);
    auto env = make_tabular_env(mdp);
    // always move right
    TabularPolicy policy{3, 4, std::vector<double>(12, 0.0)};
    for (int s = 0; s < 3; ++s) policy.probs[s * 4 + 3] = 1.0;

    const std::vector<double> betas = {0.3};
    const std::vector<double> thresholds = {0.0};
    const EvalReport report =
        evaluate_policy(*env, policy, 5, 10, betas, thresholds, 0.1, 9001);
    CHECK(report.n_episodes == 5);
    CHECK(report.violation_rate == 0.0);
    // all episodes identical: the pooled quantile equals the constant sample
    CHECK(report.beta_upper_quantile == 0.0);
    CHECK(report.empirical_cvar == doctest::Approx(0.0));
    for (const auto& ep : report.constraint_samples) CHECK(ep.size() == 10);
    CHECK(report.mean_return ==
          doctest::Approx(-0.04 * 2 + 1.0 * 8)); // two step penalties, eight goal steps

    // identical seeds reproduce the report exactly
    const EvalReport again =
        evaluate_policy(*env, policy, 5, 10, betas, thresholds, 0.1, 9001);
    CHECK(again.constraint_samples == report.constraint_samples);
    CHECK(again.mean_return == report.mean_return);
}

TEST_CASE("tail mean dominates the quantile on pooled samples") {
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> samples(200);
        for (auto& x : samples) x = u(rng);
        const double beta = 0.3;
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        const double quantile =
            sorted[static_cast<std::size_t>(std::ceil((1.0 - beta) * sorted.size())) - 1];
        const double cvar =
            oce_optimize_t(OceSpec::cvar(beta, Orientation::loss), uniform_samples(samples)).value;
        CHECK(cvar >= quantile - 1e-12);
    }
}

TEST_CASE("mean-action evaluation is steadier than sampled-action evaluation") {
    PointMassParams params;
    auto env = make_pointmass(params);
    GaussianLinearPolicy policy;
    policy.n_features = 1;
    policy.mean_weights = {0.4};
    policy.log_std = std::log(0.2);
    policy.log_std_lo = std::log(0.01);
    policy.log_std_hi = std::log(0.5);

    auto return_variance = [&](bool mean_action, std::uint64_t seed) {
        std::vector<double> returns;
        auto worker = env->clone();
        for (int e = 0; e < 40; ++e) {
            const Trajectory traj = mean_action
                                        ? rollout_eval(*worker, policy, 120, derive_seed(seed, 3, e))
                                        : rollout(*worker, policy, 120, derive_seed(seed, 3, e));
            double acc = 0.0;
            for (int tau = 0; tau < traj.length(); ++tau) acc += traj.reward(tau, 0);
            returns.push_back(acc);
        }
        double mean = 0.0;
        for (double x : returns) mean += x;
        mean /= returns.size();
        double var = 0.0;
        for (double x : returns) var += (x - mean) * (x - mean);
        return var / (returns.size() - 1.0);
    };

    int mean_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        if (return_variance(true, seed) < return_variance(false, seed)) ++mean_wins;
    CHECK(mean_wins == 10);
}

TEST_CASE("report emission") {
    std::vector<HistoryEntry> history(3);
    for (int j = 0; j < 3; ++j) {
        history[j].iteration = j + 1;
        history[j].t = {0.1 * j, -0.2};
        history[j].lambda = {0.5 * j};
        history[j].objective_estimate = 1.0 + j;
        history[j].constraint_estimates = {-0.1};
        history[j].g_t = {0.0, 0.0};
        history[j].g_lambda = {0.0};
    }
    const std::vector<double> proxy = {3.0, 2.0, 1.0};

    const std::string dir = (std::filesystem::temp_directory_path() / "ocecrl_report_test").string();
    std::filesystem::remove_all(dir);
    const auto written = emit_report(history, proxy, nullptr, dir);
    REQUIRE(written.size() == 4); // three curves plus the summary

    std::ifstream curve(dir + "/return_curve.csv");
    std::string line;
    int rows = -1; // discount the header
    while (std::getline(curve, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);

    nlohmann::json summary;
    std::ifstream summary_in(dir + "/summary.json");
    summary_in >> summary;
    CHECK_NOTHROW(validate_summary(summary));

    // history csv round trip
    std::ostringstream csv;
    write_history_csv(csv, history, proxy);
    std::istringstream csv_in(csv.str());
    const auto [parsed, parsed_proxy] = parse_history_csv(csv_in);
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[2].t == history[2].t);
    CHECK(parsed[2].lambda == history[2].lambda);
    CHECK(parsed_proxy == proxy);

    CHECK_THROWS_AS(emit_report({}, {}, nullptr, dir), validation_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("eval report json round trip") {
    EvalReport report;
    report.n_episodes = 2;
    report.constraint_samples = {{0.1, 0.2}, {0.3}};
    report.beta_upper_quantile = 0.25;
    report.empirical_cvar = 0.28;
    report.converged_t = 0.26;
    report.mean_return = 5.0;
    report.violation_rate = 0.0;
    report.threshold = 0.5;
    const EvalReport back = eval_report_from_json(eval_report_to_json(report));
    CHECK(back.constraint_samples == report.constraint_samples);
    CHECK(back.beta_upper_quantile == report.beta_upper_quantile);
    CHECK(back.mean_return == report.mean_return);
}
