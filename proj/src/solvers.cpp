#include "ocecrl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ocecrl/gradients.hpp"
#include "ocecrl/parallel.hpp"

namespace ocecrl {

namespace {

void check_spec_against_env(const Environment& env, const ShapedRewardSpec& spec) {
    spec.validate();
    require(static_cast<int>(spec.t.size()) == env.n_reward_channels(),
            "shaping spec channels must match the environment");
}

// Exact value of a tabular policy on a shaped reward table, via the
// occupancy measure.
double policy_value_on_table(const TabularMdp& mdp, const TabularPolicy& policy,
                             const std::vector<double>& table) {
    const OccupancyMeasure nu = exact_occupancy(mdp, policy);
    double acc = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) acc += nu.nu[i] * table[i];
    return acc / (1.0 - mdp.gamma);
}

struct Adam {
    std::vector<double> m, v;
    double lr;
    long t = 0;
    static constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-6;

    Adam(std::size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}

    // sign +1 ascends, -1 descends
    void step(std::vector<double>& params, const std::vector<double>& grad, double sign) {
        ++t;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] += sign * lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

struct FlatBatch {
    std::vector<int> state;       // discrete path
    std::vector<double> features; // gaussian path, [n][F]
    std::vector<int> action_d;
    std::vector<double> action_c;
    std::vector<double> logp_old, adv, ret;
    std::size_t size = 0;
};

void gae_fill(std::span<const double> shaped, std::span<const double> values, double bootstrap,
              double gamma, double lam, std::span<double> adv_out, std::span<double> ret_out) {
    const int T = static_cast<int>(shaped.size());
    double carry = 0.0;
    for (int tau = T - 1; tau >= 0; --tau) {
        const double next_v = tau + 1 < T ? values[tau + 1] : bootstrap;
        const double delta = shaped[tau] + gamma * next_v - values[tau];
        carry = delta + gamma * lam * carry;
        adv_out[tau] = carry;
        ret_out[tau] = carry + values[tau];
    }
}

double discounted_shaped_return(const Trajectory& traj, const ShapedRewardSpec& spec,
                                double gamma, int use_steps) {
    double disc = 1.0, acc = 0.0;
    std::vector<double> rv(static_cast<std::size_t>(traj.n_reward_channels));
    for (int tau = 0; tau < use_steps; ++tau) {
        for (int i = 0; i < traj.n_reward_channels; ++i) rv[i] = traj.reward(tau, i);
        acc += disc * shaped_reward(spec, rv);
        disc *= gamma;
    }
    return acc;
}

} // namespace

void PgConfig::validate() const {
    require(rollouts_per_update >= 1 && epochs >= 1 && minibatches >= 1,
            "pg config counts must be positive");
    require(clip > 0.0 && clip < 1.0, "clip parameter must lie in (0, 1)");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae weighting must lie in [0, 1]");
    require(lr > 0.0 && value_lr > 0.0, "learning rates must be positive");
    require(gaussian_features >= 1, "gaussian policies need at least the bias feature");
    require(log_std_lo <= log_std_hi, "log-std box must be ordered");
    require(horizon >= 0, "horizon must be nonnegative");
}

SolverReport ExactValueIterationSolver::solve(Environment& env, const ShapedRewardSpec& spec,
                                              const SolverBudget& budget, std::uint64_t) {
    budget.validate();
    check_spec_against_env(env, spec);
    const TabularMdp* model = env.mdp();
    require(model != nullptr, "exact solver requires a tabular model");

    const int S = model->n_states, A = model->n_actions;
    const std::vector<double> table = shaped_reward_table(*model, spec);
    std::vector<double> value(static_cast<std::size_t>(S), 0.0);
    std::vector<double> next(static_cast<std::size_t>(S), 0.0);
    bool converged = false;
    for (long sweep = 0; sweep < budget.max_updates; ++sweep) {
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double q = table[static_cast<std::size_t>(s) * A + a];
                for (int s2 = 0; s2 < S; ++s2) q += model->gamma * model->p(s, a, s2) * value[s2];
                best = std::max(best, q);
            }
            next[s] = best;
            residual = std::max(residual, std::abs(next[s] - value[s]));
        }
        value.swap(next);
        if (residual <= budget.tolerance) {
            converged = true;
            break;
        }
    }

    TabularPolicy greedy{S, A, std::vector<double>(static_cast<std::size_t>(S) * A, 0.0)};
    for (int s = 0; s < S; ++s) {
        int best_a = 0;
        double best_q = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            double q = table[static_cast<std::size_t>(s) * A + a];
            for (int s2 = 0; s2 < S; ++s2) q += model->gamma * model->p(s, a, s2) * value[s2];
            if (q > best_q) { // strict: ties keep the lowest action index
                best_q = q;
                best_a = a;
            }
        }
        greedy.probs[static_cast<std::size_t>(s) * A + best_a] = 1.0;
    }

    SolverReport report;
    report.attained_value = policy_value_on_table(*model, greedy, table);
    report.policy = std::move(greedy);
    report.steps_used = 0; // model-based, no environment interaction
    report.converged = converged;
    return report;
}

double ExactValueIterationSolver::extra_sweep_residual(const TabularMdp& mdp,
                                                       const ShapedRewardSpec& spec,
                                                       const SolverBudget& budget) {
    const int S = mdp.n_states, A = mdp.n_actions;
    const std::vector<double> table = shaped_reward_table(mdp, spec);
    std::vector<double> value(static_cast<std::size_t>(S), 0.0);
    double residual = 0.0;
    for (long sweep = 0; sweep < budget.max_updates + 1; ++sweep) {
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double q = table[static_cast<std::size_t>(s) * A + a];
                for (int s2 = 0; s2 < S; ++s2) q += mdp.gamma * mdp.p(s, a, s2) * value[s2];
                best = std::max(best, q);
            }
            const double r = std::abs(best - value[s]);
            value[s] = best;
            residual = std::max(residual, r);
        }
        if (residual <= budget.tolerance) break; // converged; the next pass is the extra sweep
    }
    return residual;
}

ClippedSurrogatePgSolver::ClippedSurrogatePgSolver(PgConfig config) : cfg_(config) {
    cfg_.validate();
}

void ClippedSurrogatePgSolver::reset_warm_start() {
    warm_policy_.reset();
    warm_values_.clear();
}

SolverReport ClippedSurrogatePgSolver::solve(Environment& env, const ShapedRewardSpec& spec,
                                             const SolverBudget& budget, std::uint64_t seed) {
    budget.validate();
    check_spec_against_env(env, spec);
    const double gamma = env.gamma();
    const int horizon = cfg_.horizon > 0 ? cfg_.horizon : truncation_horizon(gamma, 1e-6);
    const int R = cfg_.rollouts_per_update;

    const bool discrete = env.discrete_actions();
    int n_param = 0, n_value = 0, n_feat = 0, S = 0, A = 0;
    if (discrete) {
        const TabularMdp* model = env.mdp();
        require(model != nullptr, "discrete policy gradient requires a tabular state space");
        S = model->n_states;
        A = model->n_actions;
        n_param = S * A; // one-hot state features: weights are per-(s,a) logits
        n_value = S;
    } else {
        require(cfg_.gaussian_features == 1 || cfg_.gaussian_features == 1 + env.obs_dim(),
                "gaussian feature count must be 1 or 1 + obs_dim");
        n_feat = cfg_.gaussian_features;
        n_param = n_feat + 1; // mean weights plus log-std
        n_value = n_feat;
    }

    std::vector<double> params(static_cast<std::size_t>(n_param), 0.0);
    std::vector<double> values(static_cast<std::size_t>(n_value), 0.0);
    if (!discrete) params.back() = cfg_.init_log_std;
    if (cfg_.warm_start && warm_policy_ &&
        warm_values_.size() == static_cast<std::size_t>(n_value)) {
        bool compatible = false;
        if (const auto* sp = std::get_if<SoftmaxLinearPolicy>(&*warm_policy_);
            sp && discrete && sp->n_features == S && sp->n_actions == A) {
            params = sp->weights;
            compatible = true;
        } else if (const auto* gp = std::get_if<GaussianLinearPolicy>(&*warm_policy_);
                   gp && !discrete && gp->n_features == n_feat) {
            params.assign(gp->mean_weights.begin(), gp->mean_weights.end());
            params.push_back(gp->log_std);
            compatible = true;
        }
        if (compatible) values = warm_values_;
    }

    auto current_policy = [&]() -> StochasticPolicy {
        if (discrete) return SoftmaxLinearPolicy{S, A, params};
        GaussianLinearPolicy g;
        g.n_features = n_feat;
        g.mean_weights.assign(params.begin(), params.end() - 1);
        g.log_std = clip(params.back(), cfg_.log_std_lo, cfg_.log_std_hi);
        g.log_std_lo = cfg_.log_std_lo;
        g.log_std_hi = cfg_.log_std_hi;
        return g;
    };

    Adam opt_pi(static_cast<std::size_t>(n_param), cfg_.lr);
    Adam opt_v(static_cast<std::size_t>(n_value), cfg_.value_lr);

    long steps_used = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<double> best_params = params;
    std::vector<double> scores;
    std::vector<Trajectory> batch(static_cast<std::size_t>(R));
    std::vector<std::unique_ptr<Environment>> workers;
    for (int k = 0; k < R; ++k) workers.push_back(env.clone());

    for (long update = 0; update < budget.max_updates; ++update) {
        // a full batch must fit in the remaining step budget
        if (steps_used + static_cast<long>(R) * (horizon + 1) > budget.max_env_steps) break;
        const StochasticPolicy policy = current_policy();
        // rollouts are seed-isolated per (seed, update, k): scheduling-independent
        parallel_for(static_cast<std::size_t>(R), [&](std::size_t k) {
            const std::uint64_t rs = derive_seed(
                seed, seeds::pg_rollout, static_cast<std::uint64_t>(update) * R + k);
            // one extra step supplies the bootstrap observation for GAE
            batch[k] = rollout(*workers[k], policy, horizon + 1, rs);
        });

        double score = 0.0;
        for (int k = 0; k < R; ++k) {
            const int used = std::min(horizon, batch[k].length());
            score += discounted_shaped_return(batch[k], spec, gamma, used);
            steps_used += batch[k].length();
        }
        score /= R;
        scores.push_back(score);
        if (score > best_score) {
            best_score = score;
            best_params = params;
        }

        // flatten the batch
        FlatBatch flat;
        std::vector<double> shaped, stepvals, adv, ret;
        std::vector<double> rv(static_cast<std::size_t>(env.n_reward_channels()));
        for (int k = 0; k < R; ++k) {
            const Trajectory& traj = batch[k];
            const int T = std::min(horizon, traj.length());
            if (T <= 0) continue;
            shaped.resize(static_cast<std::size_t>(T));
            stepvals.resize(static_cast<std::size_t>(T));
            adv.resize(static_cast<std::size_t>(T));
            ret.resize(static_cast<std::size_t>(T));
            for (int tau = 0; tau < T; ++tau) {
                for (int i = 0; i < env.n_reward_channels(); ++i) rv[i] = traj.reward(tau, i);
                shaped[tau] = shaped_reward(spec, rv);
                if (discrete) {
                    stepvals[tau] = values[static_cast<std::size_t>(traj.obs(tau)[0])];
                } else {
                    double v = values[0];
                    for (int f = 1; f < n_feat; ++f) v += values[f] * traj.obs(tau)[f - 1];
                    stepvals[tau] = v;
                }
            }
            double bootstrap = 0.0;
            if (traj.length() > T) { // time-limit truncation: bootstrap from the extra step
                if (discrete) {
                    bootstrap = values[static_cast<std::size_t>(traj.obs(T)[0])];
                } else {
                    bootstrap = values[0];
                    for (int f = 1; f < n_feat; ++f) bootstrap += values[f] * traj.obs(T)[f - 1];
                }
            }
            gae_fill(shaped, stepvals, bootstrap, gamma, cfg_.gae_lambda, adv, ret);
            for (int tau = 0; tau < T; ++tau) {
                if (discrete) {
                    flat.state.push_back(static_cast<int>(traj.obs(tau)[0]));
                    flat.action_d.push_back(static_cast<int>(traj.action(tau)[0]));
                } else {
                    flat.features.push_back(1.0);
                    for (int f = 1; f < n_feat; ++f) flat.features.push_back(traj.obs(tau)[f - 1]);
                    flat.action_c.push_back(traj.action(tau)[0]);
                }
                flat.adv.push_back(adv[tau]);
                flat.ret.push_back(ret[tau]);
            }
        }
        flat.size = flat.adv.size();
        if (flat.size == 0) continue;

        // log-probabilities under the data-collection parameters
        flat.logp_old.resize(flat.size);
        if (discrete) {
            std::vector<double> probs(static_cast<std::size_t>(A));
            SoftmaxLinearPolicy pol{S, A, params};
            for (std::size_t i = 0; i < flat.size; ++i) {
                pol.action_probs(flat.state[i], probs);
                flat.logp_old[i] = std::log(std::max(probs[flat.action_d[i]], 1e-300));
            }
        } else {
            const double log_std = clip(params.back(), cfg_.log_std_lo, cfg_.log_std_hi);
            const double sigma = std::exp(log_std);
            for (std::size_t i = 0; i < flat.size; ++i) {
                double mu = 0.0;
                for (int f = 0; f < n_feat; ++f)
                    mu += params[f] * flat.features[i * n_feat + f];
                const double z = (flat.action_c[i] - mu) / sigma;
                flat.logp_old[i] = -0.5 * z * z - log_std - 0.9189385332046727;
            }
        }

        if (cfg_.normalize_advantages && flat.size > 1) {
            double mean = 0.0;
            for (double a : flat.adv) mean += a;
            mean /= static_cast<double>(flat.size);
            double var = 0.0;
            for (double a : flat.adv) var += (a - mean) * (a - mean);
            const double sd = std::sqrt(var / static_cast<double>(flat.size)) + 1e-8;
            for (double& a : flat.adv) a = (a - mean) / sd;
        }

        std::vector<std::size_t> order(flat.size);
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> grad_pi(static_cast<std::size_t>(n_param));
        std::vector<double> grad_v(static_cast<std::size_t>(n_value));
        std::vector<double> probs(static_cast<std::size_t>(std::max(A, 1)));
        std::mt19937_64 shuffle_rng =
            make_rng(derive_seed(seed, seeds::pg_shuffle, static_cast<std::uint64_t>(update)));

        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            const std::size_t chunk =
                (flat.size + cfg_.minibatches - 1) / static_cast<std::size_t>(cfg_.minibatches);
            for (std::size_t start = 0; start < flat.size; start += chunk) {
                const std::size_t stop = std::min(flat.size, start + chunk);
                std::fill(grad_pi.begin(), grad_pi.end(), 0.0);
                std::fill(grad_v.begin(), grad_v.end(), 0.0);
                const double inv_n = 1.0 / static_cast<double>(stop - start);
                for (std::size_t ii = start; ii < stop; ++ii) {
                    const std::size_t i = order[ii];
                    const double a_hat = flat.adv[i];
                    if (discrete) {
                        SoftmaxLinearPolicy pol{S, A, params};
                        pol.action_probs(flat.state[i], probs);
                        const int act = flat.action_d[i];
                        const double logp = std::log(std::max(probs[act], 1e-300));
                        const double ratio = std::exp(logp - flat.logp_old[i]);
                        const bool clipped =
                            (a_hat >= 0.0 && ratio > 1.0 + cfg_.clip) ||
                            (a_hat < 0.0 && ratio < 1.0 - cfg_.clip);
                        if (!clipped) {
                            const double scale = ratio * a_hat * inv_n;
                            double* row = grad_pi.data() +
                                          static_cast<std::size_t>(flat.state[i]) * A;
                            for (int a = 0; a < A; ++a)
                                row[a] += scale * ((a == act ? 1.0 : 0.0) - probs[a]);
                        }
                        if (cfg_.entropy_coef > 0.0) {
                            double entropy = 0.0;
                            for (int a = 0; a < A; ++a)
                                if (probs[a] > 0.0) entropy -= probs[a] * std::log(probs[a]);
                            double* row = grad_pi.data() +
                                          static_cast<std::size_t>(flat.state[i]) * A;
                            for (int a = 0; a < A; ++a)
                                if (probs[a] > 0.0)
                                    row[a] -= cfg_.entropy_coef * inv_n * probs[a] *
                                              (std::log(probs[a]) + entropy);
                        }
                        const double v = values[static_cast<std::size_t>(flat.state[i])];
                        grad_v[static_cast<std::size_t>(flat.state[i])] +=
                            (v - flat.ret[i]) * inv_n;
                    } else {
                        const double log_std = clip(params.back(), cfg_.log_std_lo, cfg_.log_std_hi);
                        const double sigma = std::exp(log_std);
                        double mu = 0.0, v = 0.0;
                        for (int f = 0; f < n_feat; ++f) {
                            mu += params[f] * flat.features[i * n_feat + f];
                            v += values[f] * flat.features[i * n_feat + f];
                        }
                        const double z = (flat.action_c[i] - mu) / sigma;
                        const double logp = -0.5 * z * z - log_std - 0.9189385332046727;
                        const double ratio = std::exp(logp - flat.logp_old[i]);
                        const bool clipped =
                            (a_hat >= 0.0 && ratio > 1.0 + cfg_.clip) ||
                            (a_hat < 0.0 && ratio < 1.0 - cfg_.clip);
                        if (!clipped) {
                            const double scale = ratio * a_hat * inv_n;
                            for (int f = 0; f < n_feat; ++f)
                                grad_pi[f] += scale * (z / sigma) * flat.features[i * n_feat + f];
                            grad_pi[static_cast<std::size_t>(n_feat)] += scale * (z * z - 1.0);
                        }
                        // gaussian entropy is log sigma up to a constant
                        grad_pi[static_cast<std::size_t>(n_feat)] += cfg_.entropy_coef * inv_n;
                        for (int f = 0; f < n_feat; ++f)
                            grad_v[f] += (v - flat.ret[i]) * inv_n * flat.features[i * n_feat + f];
                    }
                }
                if (cfg_.adam) {
                    opt_pi.step(params, grad_pi, +1.0);
                } else {
                    for (std::size_t i = 0; i < params.size(); ++i)
                        params[i] += cfg_.lr * grad_pi[i];
                }
                opt_v.step(values, grad_v, -1.0);
                if (!discrete)
                    params.back() = clip(params.back(), cfg_.log_std_lo, cfg_.log_std_hi);
            }
        }
    }

    std::vector<double> final_params = params;
    params = best_params;
    SolverReport report;
    report.policy = current_policy();
    // NaN when the step budget did not admit a single scored batch
    report.attained_value =
        scores.empty() ? std::numeric_limits<double>::quiet_NaN() : best_score;
    report.steps_used = steps_used;
    // plateau heuristic: no tolerance-sized improvement over the last quarter
    if (scores.size() >= 4) {
        const std::size_t cut = scores.size() - scores.size() / 4;
        double before = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cut; ++i) before = std::max(before, scores[i]);
        report.converged = best_score - before <= budget.tolerance;
    }
    if (cfg_.warm_start) {
        params = final_params; // training continues from the last iterate
        warm_policy_ = current_policy();
        warm_values_ = values;
    }
    return report;
}

OracleBiasReport measure_oracle_bias(
    const TabularMdp& mdp, PolicySolver& inexact, PolicySolver& exact,
    std::span<const std::pair<std::vector<double>, std::vector<double>>> grid,
    std::span<const double> betas, std::span<const double> per_step_thresholds, int n_samples,
    std::uint64_t seed, const SolverBudget& inexact_budget, const SolverBudget& exact_budget,
    int horizon) {
    require(!grid.empty(), "bias grid must be nonempty");
    require(n_samples >= 1, "need at least one sample trajectory");
    const int h = horizon > 0 ? horizon : truncation_horizon(mdp.gamma, 1e-6);

    OracleBiasReport report;
    auto env = make_tabular_env(mdp);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        ShapedRewardSpec spec;
        spec.t = grid[g].first;
        spec.lambda = grid[g].second;
        spec.betas.assign(betas.begin(), betas.end());
        spec.per_step_thresholds.assign(per_step_thresholds.begin(), per_step_thresholds.end());

        const SolverReport exact_report = exact.solve(*env, spec, exact_budget, derive_seed(seed, 101, g));
        const SolverReport inexact_report =
            inexact.solve(*env, spec, inexact_budget, derive_seed(seed, 102, g));

        std::vector<Trajectory> batch_exact(static_cast<std::size_t>(n_samples));
        std::vector<Trajectory> batch_inexact(static_cast<std::size_t>(n_samples));
        std::vector<std::unique_ptr<Environment>> workers;
        for (int k = 0; k < n_samples; ++k) workers.push_back(env->clone());
        parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t k) {
            // common random seeds couple the two estimates
            const std::uint64_t rs =
                derive_seed(seed, seeds::bias_rollout, g * static_cast<std::size_t>(n_samples) + k);
            batch_exact[k] = rollout(*workers[k], exact_report.policy, h, rs);
            batch_inexact[k] = rollout(*workers[k], inexact_report.policy, h, rs);
        });

        const GradEstimate ge = estimate_gradients(batch_exact, spec.t, spec.lambda, spec.betas,
                                                   spec.per_step_thresholds, mdp.gamma);
        const GradEstimate gi = estimate_gradients(batch_inexact, spec.t, spec.lambda, spec.betas,
                                                   spec.per_step_thresholds, mdp.gamma);
        double diff2 = 0.0, ref2 = 0.0;
        for (std::size_t i = 0; i < ge.g_t.size(); ++i) {
            diff2 += (gi.g_t[i] - ge.g_t[i]) * (gi.g_t[i] - ge.g_t[i]);
            ref2 += ge.g_t[i] * ge.g_t[i];
        }
        for (std::size_t i = 0; i < ge.g_lambda.size(); ++i) {
            diff2 += (gi.g_lambda[i] - ge.g_lambda[i]) * (gi.g_lambda[i] - ge.g_lambda[i]);
            ref2 += ge.g_lambda[i] * ge.g_lambda[i];
        }
        OracleBiasPoint point{grid[g].first, grid[g].second, std::sqrt(diff2), std::sqrt(ref2)};
        report.delta = std::max(report.delta, point.bias_norm);
        report.max_exact_grad_norm = std::max(report.max_exact_grad_norm, point.exact_grad_norm);
        report.points.push_back(std::move(point));
    }
    return report;
}

} // namespace ocecrl
