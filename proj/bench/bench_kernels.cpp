// Wall-time comparison of the serial reference kernels against the OpenMP
// ones: batch rollout collection and the policy-grid oracle. The outputs are
// also cross-checked, since both paths must produce identical results.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ocecrl/diagnostics.hpp"
#include "ocecrl/parallel.hpp"
#include "ocecrl/verify.hpp"

using namespace ocecrl;

namespace {

double time_seconds(const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> rollout_batch(const TabularMdp& mdp, const TabularPolicy& policy, int count,
                                  int horizon) {
    auto env = make_tabular_env(mdp);
    std::vector<double> sums(static_cast<std::size_t>(count));
    parallel_for_ctx(
        static_cast<std::size_t>(count), [&] { return env->clone(); },
        [&](Environment& worker, std::size_t k) {
            const Trajectory traj = rollout(worker, policy, horizon, derive_seed(99, 1, k));
            double acc = 0.0;
            for (int tau = 0; tau < traj.length(); ++tau) acc += traj.reward(tau, 0);
            sums[k] = acc;
        });
    return sums;
}

} // namespace

int main() {
    std::mt19937_64 rng(12345);
    const TabularMdp mdp = random_mdp(rng, 6, 3, 2, 0.95, 0.95);
    const TabularPolicy policy = random_policy(rng, 6, 3, 0.05);
    const TabularMdp two_state = canonical_two_state_mdp();
    const auto constraints = canonical_two_state_constraints();

    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial [s]", "openmp [s]", "speedup");

    {
        std::vector<double> serial_out, parallel_out;
        set_execution_mode(ExecMode::serial);
        const double ts = time_seconds([&] { serial_out = rollout_batch(mdp, policy, 20000, 132); });
        set_execution_mode(ExecMode::openmp);
        const double tp =
            time_seconds([&] { parallel_out = rollout_batch(mdp, policy, 20000, 132); });
        std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", "rollout batch (20000x132)", ts, tp, ts / tp,
                    serial_out == parallel_out ? "" : "MISMATCH");
    }
    {
        OracleSolution serial_sol, parallel_sol;
        set_execution_mode(ExecMode::serial);
        const double ts = time_seconds(
            [&] { serial_sol = brute_force_primal(two_state, constraints, 0.3, 150); });
        set_execution_mode(ExecMode::openmp);
        const double tp = time_seconds(
            [&] { parallel_sol = brute_force_primal(two_state, constraints, 0.3, 150); });
        std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", "policy-grid oracle (151^2)", ts, tp,
                    ts / tp,
                    serial_sol.objective == parallel_sol.objective &&
                            serial_sol.best_policy_params == parallel_sol.best_policy_params
                        ? ""
                        : "MISMATCH");
    }
    {
        auto env = make_pointmass({});
        GaussianLinearPolicy gaussian;
        gaussian.n_features = 1;
        gaussian.mean_weights = {0.3};
        gaussian.log_std = -2.0;
        std::vector<double> serial_out(400), parallel_out(400);
        auto evaluate = [&](std::vector<double>& out) {
            parallel_for_ctx(
                out.size(), [&] { return env->clone(); },
                [&](Environment& worker, std::size_t e) {
                    const Trajectory traj =
                        rollout_eval(worker, gaussian, 1375, derive_seed(7, 2, e));
                    double acc = 0.0;
                    for (int tau = 0; tau < traj.length(); ++tau) acc += traj.reward(tau, 0);
                    out[e] = acc;
                });
        };
        set_execution_mode(ExecMode::serial);
        const double ts = time_seconds([&] { evaluate(serial_out); });
        set_execution_mode(ExecMode::openmp);
        const double tp = time_seconds([&] { evaluate(parallel_out); });
        std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", "evaluation episodes (400)", ts, tp, ts / tp,
                    serial_out == parallel_out ? "" : "MISMATCH");
    }
    return 0;
}
