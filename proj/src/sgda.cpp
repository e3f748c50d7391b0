#include "ocecrl/sgda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ocecrl/parallel.hpp"

namespace ocecrl {

void ProjectionBoxes::validate(std::span<const std::pair<double, double>> reward_ranges) const {
    require(t_boxes.size() == reward_ranges.size(),
            "one t-box per reward channel is required");
    for (std::size_t i = 0; i < t_boxes.size(); ++i) {
        require(t_boxes[i].lo <= t_boxes[i].hi, "t-box must be ordered");
        // Each box must contain the channel's uniform reward range; otherwise
        // the bounded-t reformulation is not equivalent to the original.
        require(t_boxes[i].lo <= reward_ranges[i].first &&
                    t_boxes[i].hi >= reward_ranges[i].second,
                "t-box " + std::to_string(i) + " must contain the reward range [" +
                    std::to_string(reward_ranges[i].first) + ", " +
                    std::to_string(reward_ranges[i].second) + "]");
    }
    for (const auto& b : lambda_box) {
        require(b.lo == 0.0, "lambda box must start at 0");
        require(b.hi > 0.0, "lambda_max must be positive");
    }
}

void SgdaState::record(HistoryEntry entry) {
    history.push_back(std::move(entry));
    while (history.size() > history_capacity) history.pop_front();
}

std::vector<const HistoryEntry*> SgdaState::window(std::size_t n) const {
    const std::size_t count = std::min(n, history.size());
    std::vector<const HistoryEntry*> out;
    out.reserve(count);
    for (std::size_t i = history.size() - count; i < history.size(); ++i)
        out.push_back(&history[i]);
    return out;
}

GradEstimate estimate_gradients(std::span<const Trajectory> batch, std::span<const double> t,
                                std::span<const double> lambda, std::span<const double> betas,
                                std::span<const double> per_step_thresholds, double gamma) {
    if (batch.empty()) throw validation_error("gradient estimation needs a nonempty batch");
    const std::size_t m = lambda.size();
    require(t.size() == m + 1 && betas.size() == m + 1 && per_step_thresholds.size() == m,
            "gradient estimation: dimension mismatch");

    GradEstimate out;
    out.g_t.assign(m + 1, 0.0);
    out.g_lambda.assign(m, 0.0);
    out.n_trajectories = static_cast<int>(batch.size());

    std::vector<double> acc_t(m + 1), acc_l(m);
    for (const Trajectory& traj : batch) {
        require(static_cast<std::size_t>(traj.n_reward_channels) == m + 1,
                "trajectory reward channels must match the shaping spec");
        std::fill(acc_t.begin(), acc_t.end(), 0.0);
        std::fill(acc_l.begin(), acc_l.end(), 0.0);
        double disc = 1.0;
        for (int tau = 0; tau < traj.length(); ++tau) {
            acc_t[0] += disc * transformed_reward_subgrad_t(traj.reward(tau, 0), t[0], betas[0]);
            for (std::size_t i = 0; i < m; ++i) {
                const double r = traj.reward(tau, static_cast<int>(i) + 1);
                acc_l[i] += disc * (transformed_reward(r, t[i + 1], betas[i + 1]) -
                                    per_step_thresholds[i]);
                acc_t[i + 1] += disc * transformed_reward_subgrad_t(r, t[i + 1], betas[i + 1]);
            }
            disc *= gamma;
        }
        for (std::size_t i = 0; i <= m; ++i) out.g_t[i] += acc_t[i];
        for (std::size_t i = 0; i < m; ++i) out.g_lambda[i] += acc_l[i];
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    out.g_t[0] *= inv_n;
    for (std::size_t i = 0; i < m; ++i) {
        out.g_t[i + 1] = lambda[i] * (out.g_t[i + 1] * inv_n);
        out.g_lambda[i] *= inv_n;
    }
    return out;
}

GradEstimate estimate_gradients(std::span<const Trajectory> batch, const SgdaState& state,
                                std::span<const double> betas,
                                std::span<const double> per_step_thresholds, double gamma) {
    return estimate_gradients(batch, state.t, state.lambda, betas, per_step_thresholds, gamma);
}

void sgda_step(SgdaState& state, const GradEstimate& grads, const ProjectionBoxes& boxes) {
    require(grads.g_t.size() == state.t.size() && grads.g_lambda.size() == state.lambda.size(),
            "gradient dimensions must match the state");
    for (std::size_t i = 0; i < state.lambda.size(); ++i)
        state.lambda[i] =
            boxes.project_lambda(i, state.lambda[i] - state.eta_lambda * grads.g_lambda[i]);
    for (std::size_t i = 0; i < state.t.size(); ++i)
        state.t[i] = boxes.project_t(i, state.t[i] + state.eta_t * grads.g_t[i]);
    ++state.iteration;
}

std::pair<double, double> theory_step_sizes(double ell, double sigma, double delta, double C,
                                            double diam_lambda, double epsilon) {
    require(ell > 0.0 && C > 0.0 && diam_lambda > 0.0 && epsilon > 0.0,
            "ell, C, diam and epsilon must be positive");
    require(sigma >= 0.0 && delta >= 0.0, "sigma and delta must be nonnegative");
    const double s2 = sigma * sigma + delta * delta;
    double eta_lambda = 1.0 / (2.0 * ell);
    if (s2 > 0.0)
        eta_lambda = std::min(eta_lambda, epsilon * epsilon / (16.0 * ell * s2));

    const double e2 = epsilon * epsilon;
    const double root = C * std::sqrt(C * C + s2);
    const double d2 = diam_lambda * diam_lambda;
    double eta_t = e2 / (ell * (C * C + s2));
    eta_t = std::min(eta_t, e2 * e2 / (ell * ell * ell * d2 * root));
    if (s2 > 0.0)
        eta_t = std::min(eta_t, e2 * e2 * e2 / (ell * ell * ell * d2 * s2 * root));
    return {eta_t, eta_lambda};
}

double stationarity_proxy(std::span<const HistoryEntry* const> window,
                          const ProjectionBoxes& boxes, double eta_t) {
    require(!window.empty(), "stationarity proxy needs a nonempty window");
    require(eta_t > 0.0, "eta_t must be positive");
    double acc = 0.0;
    for (const HistoryEntry* e : window) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < e->t.size(); ++i) {
            const double moved = boxes.project_t(i, e->t[i] + eta_t * e->g_t[i]);
            norm2 += (e->t[i] - moved) * (e->t[i] - moved);
        }
        acc += std::sqrt(norm2) / eta_t;
    }
    return acc / static_cast<double>(window.size());
}

double stationarity_proxy(std::span<const HistoryEntry> window, const ProjectionBoxes& boxes,
                          double eta_t) {
    std::vector<const HistoryEntry*> ptrs;
    ptrs.reserve(window.size());
    for (const auto& e : window) ptrs.push_back(&e);
    return stationarity_proxy(ptrs, boxes, eta_t);
}

namespace {

struct BatchEstimates {
    double objective = 0.0;
    std::vector<double> constraints;
};

BatchEstimates batch_estimates(std::span<const Trajectory> batch, std::span<const double> t,
                               std::span<const double> betas, double gamma) {
    const std::size_t m = t.size() - 1;
    BatchEstimates est;
    est.constraints.assign(m, 0.0);
    for (const Trajectory& traj : batch) {
        double disc = 1.0;
        for (int tau = 0; tau < traj.length(); ++tau) {
            est.objective += disc * transformed_reward(traj.reward(tau, 0), t[0], betas[0]);
            for (std::size_t i = 0; i < m; ++i)
                est.constraints[i] += disc * transformed_reward(
                                                 traj.reward(tau, static_cast<int>(i) + 1),
                                                 t[i + 1], betas[i + 1]);
            disc *= gamma;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    est.objective *= inv_n;
    for (double& c : est.constraints) c *= inv_n;
    return est;
}

std::string state_snapshot(const SgdaState& state, const GradEstimate& grads) {
    nlohmann::json j;
    j["iteration"] = state.iteration;
    j["t"] = state.t;
    j["lambda"] = state.lambda;
    j["g_t"] = grads.g_t;
    j["g_lambda"] = grads.g_lambda;
    return j.dump(2);
}

bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

RunResult run(const RunConfig& config) {
    auto env = build_environment(config.environment);
    auto solver = build_solver(config.solver);
    const std::vector<ConstraintSpec> constraints = build_constraints(config, *env);
    const std::size_t m = constraints.size();

    // Bind slot i to the constraint's reward channel; drop unused channels so
    // the solver and the gradient estimators see exactly m+1 of them.
    {
        std::vector<int> channel_map = {0};
        for (const auto& c : constraints) channel_map.push_back(c.index);
        bool identity = channel_map.size() == static_cast<std::size_t>(env->n_reward_channels());
        for (std::size_t i = 0; identity && i < channel_map.size(); ++i)
            identity = channel_map[i] == static_cast<int>(i);
        if (!identity) env = remap_reward_channels(std::move(env), std::move(channel_map));
    }

    RunResult result;
    result.gamma = env->gamma();
    result.horizon =
        std::min(truncation_horizon(result.gamma, config.sgda.eps_trunc), config.sgda.horizon_cap);

    result.betas.assign(m + 1, config.sgda.objective_beta);
    result.per_step_thresholds.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        result.betas[i + 1] = constraints[i].beta;
        result.per_step_thresholds[i] = constraints[i].per_step_threshold;
    }

    // Boxes: channel reward ranges (widened by the configured margin), or the
    // explicit override when it still contains the ranges.
    std::vector<std::pair<double, double>> ranges;
    for (std::size_t i = 0; i <= m; ++i) ranges.emplace_back(env->reward_range(static_cast<int>(i)));
    result.boxes.t_boxes.resize(m + 1);
    for (std::size_t i = 0; i <= m; ++i) {
        if (config.sgda.t_boxes) {
            require(config.sgda.t_boxes->size() == m + 1, "t_boxes must have m+1 entries");
            result.boxes.t_boxes[i] = {(*config.sgda.t_boxes)[i].first,
                                       (*config.sgda.t_boxes)[i].second};
        } else {
            result.boxes.t_boxes[i] = {ranges[i].first - config.sgda.t_box_margin,
                                       ranges[i].second + config.sgda.t_box_margin};
        }
    }
    result.boxes.lambda_box.assign(m, Interval{0.0, config.sgda.lambda_max});
    result.boxes.validate(ranges);

    SgdaState state;
    state.eta_t = config.sgda.eta_t;
    state.eta_lambda = config.sgda.eta_lambda;
    state.history_capacity = static_cast<std::size_t>(config.sgda.history_ring);
    state.lambda.assign(m, config.sgda.lambda_init);
    state.t.resize(m + 1);
    if (config.sgda.t_init) {
        require(config.sgda.t_init->size() == m + 1, "t_init must have m+1 entries");
        for (std::size_t i = 0; i <= m; ++i) {
            state.t[i] = (*config.sgda.t_init)[i];
            require(state.t[i] >= result.boxes.t_boxes[i].lo &&
                        state.t[i] <= result.boxes.t_boxes[i].hi,
                    "t_init[" + std::to_string(i) + "] lies outside its box");
        }
    } else {
        for (std::size_t i = 0; i <= m; ++i)
            state.t[i] = 0.5 * (result.boxes.t_boxes[i].lo + result.boxes.t_boxes[i].hi);
    }

    const long J = config.sgda.iterations;
    const int n = config.sgda.batch_size;
    // Drawn up front so the sampled iterate can be captured in passing.
    std::mt19937_64 pick_rng = make_rng(derive_seed(config.seed, seeds::driver_pick));
    const long uniform_j = std::uniform_int_distribution<long>(1, J)(pick_rng);
    result.uniform_iteration = uniform_j;

    std::vector<std::unique_ptr<Environment>> workers;
    for (int k = 0; k < n; ++k) workers.push_back(env->clone());
    std::vector<Trajectory> batch(static_cast<std::size_t>(n));

    ShapedRewardSpec spec;
    spec.betas = result.betas;
    spec.per_step_thresholds = result.per_step_thresholds;

    for (long j = 1; j <= J; ++j) {
        spec.t = state.t;
        spec.lambda = state.lambda;
        const SolverReport report =
            solver->solve(*env, spec, config.solver.budget, derive_seed(config.seed, seeds::driver_solver, j));

        parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
            const std::uint64_t rs = derive_seed(config.seed, seeds::driver_rollout,
                                                 static_cast<std::uint64_t>(j - 1) * n + k);
            batch[k] = rollout(*workers[k], report.policy, result.horizon, rs);
        });

        const GradEstimate grads = estimate_gradients(
            batch, state, result.betas, result.per_step_thresholds, result.gamma);
        const BatchEstimates est = batch_estimates(batch, state.t, result.betas, result.gamma);
        if (!all_finite(grads.g_t) || !all_finite(grads.g_lambda) ||
            !std::isfinite(est.objective) || !all_finite(est.constraints))
            throw nan_abort("non-finite gradient estimate at iteration " + std::to_string(j),
                            state_snapshot(state, grads));

        HistoryEntry entry;
        entry.iteration = j;
        entry.t = state.t;
        entry.lambda = state.lambda;
        entry.objective_estimate = est.objective;
        entry.constraint_estimates = est.constraints;
        entry.g_t = grads.g_t;
        entry.g_lambda = grads.g_lambda;
        state.record(entry);
        result.history.push_back(std::move(entry));
        result.proxy_series.push_back(stationarity_proxy(
            state.window(static_cast<std::size_t>(config.sgda.proxy_window)), result.boxes,
            state.eta_t));

        if (j == uniform_j) result.uniform_policy = report.policy;
        if (j == J) result.final_policy = report.policy;

        sgda_step(state, grads, result.boxes);
    }

    result.state = std::move(state);
    return result;
}

nlohmann::json checkpoint_to_json(const RunConfig& config, const RunResult& result) {
    nlohmann::json j;
    j["schema"] = "ckpt.v1";
    j["config"] = config_to_json(config);
    nlohmann::json state;
    state["iteration"] = result.state.iteration;
    state["t"] = result.state.t;
    state["lambda"] = result.state.lambda;
    state["eta_t"] = result.state.eta_t;
    state["eta_lambda"] = result.state.eta_lambda;
    j["state"] = state;
    j["final_policy"] = policy_to_json(result.final_policy);
    j["uniform_policy"] = policy_to_json(result.uniform_policy);
    j["uniform_iteration"] = result.uniform_iteration;
    j["horizon"] = result.horizon;
    j["gamma"] = result.gamma;
    j["betas"] = result.betas;
    j["per_step_thresholds"] = result.per_step_thresholds;
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    require(j.is_object(), "checkpoint: expected an object");
    require(j.value("schema", "") == "ckpt.v1", "checkpoint.schema: expected \"ckpt.v1\"");
    Checkpoint ckpt;
    ckpt.config = config_from_json(j.at("config"));
    const auto& state = j.at("state");
    ckpt.state.iteration = state.at("iteration").get<long>();
    ckpt.state.t = state.at("t").get<std::vector<double>>();
    ckpt.state.lambda = state.at("lambda").get<std::vector<double>>();
    ckpt.state.eta_t = state.at("eta_t").get<double>();
    ckpt.state.eta_lambda = state.at("eta_lambda").get<double>();
    ckpt.final_policy = policy_from_json(j.at("final_policy"));
    ckpt.uniform_policy = policy_from_json(j.at("uniform_policy"));
    ckpt.uniform_iteration = j.at("uniform_iteration").get<long>();
    ckpt.horizon = j.at("horizon").get<int>();
    ckpt.gamma = j.at("gamma").get<double>();
    ckpt.betas = j.at("betas").get<std::vector<double>>();
    ckpt.per_step_thresholds = j.at("per_step_thresholds").get<std::vector<double>>();
    require(ckpt.state.t.size() == ckpt.betas.size(),
            "checkpoint: t and betas disagree on the channel count");
    require(ckpt.state.lambda.size() + 1 == ckpt.betas.size(),
            "checkpoint: lambda and betas disagree on the constraint count");
    return ckpt;
}

} // namespace ocecrl
