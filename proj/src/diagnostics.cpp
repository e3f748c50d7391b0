#include "ocecrl/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ocecrl/parallel.hpp"

namespace ocecrl {

namespace {

void append_compositions(int slots, int remaining, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
    if (slots == 1) {
        current.push_back(remaining);
        out.push_back(current);
        current.pop_back();
        return;
    }
    for (int take = 0; take <= remaining; ++take) {
        current.push_back(take);
        append_compositions(slots - 1, remaining - take, current, out);
        current.pop_back();
    }
}

double ipow(double base, int exp) {
    double acc = 1.0;
    for (int i = 0; i < exp; ++i) acc *= base;
    return acc;
}

constexpr double kGridGuard = 1e7;

struct GridContext {
    std::vector<std::vector<double>> rows; // simplex points
    std::size_t total = 0;                 // rows^S
    int n_states = 0;
    int n_actions = 0;

    TabularPolicy policy_at(std::size_t id) const {
        TabularPolicy policy{n_states, n_actions,
                             std::vector<double>(static_cast<std::size_t>(n_states) * n_actions)};
        std::size_t rest = id;
        for (int s = 0; s < n_states; ++s) {
            const std::size_t digit = rest % rows.size();
            rest /= rows.size();
            for (int a = 0; a < n_actions; ++a)
                policy.probs[static_cast<std::size_t>(s) * n_actions + a] = rows[digit][a];
        }
        return policy;
    }
};

GridContext make_grid(const TabularMdp& mdp, int resolution) {
    require(resolution >= 1, "policy grid resolution must be positive");
    GridContext ctx;
    ctx.n_states = mdp.n_states;
    ctx.n_actions = mdp.n_actions;
    ctx.rows = simplex_grid(mdp.n_actions, resolution);
    const double total = ipow(static_cast<double>(ctx.rows.size()), mdp.n_states);
    if (total > kGridGuard)
        throw validation_error("policy grid would have " + std::to_string(total) +
                               " points; the guard allows at most 1e7");
    ctx.total = static_cast<std::size_t>(total);
    return ctx;
}

void check_constraints(const TabularMdp& mdp, std::span<const ConstraintSpec> constraints) {
    for (const auto& c : constraints)
        require(c.index >= 1 && c.index < mdp.n_reward_channels(),
                "constraint index " + std::to_string(c.index) + " has no reward channel");
}

// Deterministic grid argmax: chunked parallel scan, ties toward the lowest id.
template <class Score>
std::pair<std::size_t, double> grid_argmax(std::size_t total, Score&& score) {
    const std::size_t chunks = std::min<std::size_t>(256, total);
    std::vector<std::pair<double, std::size_t>> best(chunks,
                                                     {-std::numeric_limits<double>::infinity(), 0});
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = total * c / chunks;
        const std::size_t hi = total * (c + 1) / chunks;
        double best_v = -std::numeric_limits<double>::infinity();
        std::size_t best_id = lo;
        for (std::size_t id = lo; id < hi; ++id) {
            const double v = score(id);
            if (v > best_v) {
                best_v = v;
                best_id = id;
            }
        }
        best[c] = {best_v, best_id};
    });
    double best_v = -std::numeric_limits<double>::infinity();
    std::size_t best_id = 0;
    for (const auto& [v, id] : best)
        if (v > best_v) {
            best_v = v;
            best_id = id;
        }
    return {best_id, best_v};
}

} // namespace

std::vector<std::vector<double>> simplex_grid(int n_actions, int resolution) {
    require(n_actions >= 1 && resolution >= 1, "simplex grid needs positive sizes");
    std::vector<std::vector<int>> compositions;
    std::vector<int> scratch;
    append_compositions(n_actions, resolution, scratch, compositions);
    std::vector<std::vector<double>> out;
    out.reserve(compositions.size());
    for (const auto& comp : compositions) {
        std::vector<double> row(comp.size());
        for (std::size_t i = 0; i < comp.size(); ++i)
            row[i] = static_cast<double>(comp[i]) / resolution;
        out.push_back(std::move(row));
    }
    return out;
}

OracleSolution brute_force_primal(const TabularMdp& mdp,
                                  std::span<const ConstraintSpec> constraints,
                                  double objective_beta, int policy_grid_resolution) {
    check_constraints(mdp, constraints);
    const GridContext grid = make_grid(mdp, policy_grid_resolution);
    const OceSpec obj_spec = OceSpec::cvar(objective_beta, Orientation::reward);
    std::vector<OceSpec> con_specs;
    for (const auto& c : constraints) con_specs.push_back(OceSpec::cvar(c.beta, Orientation::reward));

    auto feasible_value = [&](std::size_t id) {
        const TabularPolicy policy = grid.policy_at(id);
        const OccupancyMeasure nu = exact_occupancy(mdp, policy);
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            const auto dist = nu.reward_distribution(mdp, constraints[i].index);
            if (oce_optimize_t(con_specs[i], dist).value <
                constraints[i].per_step_threshold - 1e-12)
                return -std::numeric_limits<double>::infinity();
        }
        const auto dist0 = nu.reward_distribution(mdp, 0);
        return oce_optimize_t(obj_spec, dist0).value / (1.0 - mdp.gamma);
    };

    const auto [best_id, best_value] = grid_argmax(grid.total, feasible_value);

    OracleSolution sol;
    sol.grid_resolution = 1.0 / policy_grid_resolution;
    sol.feasible = std::isfinite(best_value);
    if (!sol.feasible) return sol;

    const TabularPolicy policy = grid.policy_at(best_id);
    sol.best_policy_params = policy.probs;
    sol.objective = best_value;
    const OccupancyMeasure nu = exact_occupancy(mdp, policy);
    const auto dist0 = nu.reward_distribution(mdp, 0);
    sol.best_t.push_back(oce_optimize_t(obj_spec, dist0).optimizer_t);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto dist = nu.reward_distribution(mdp, constraints[i].index);
        const RiskValue rv = oce_optimize_t(con_specs[i], dist);
        sol.constraint_values.push_back(rv.value);
        sol.best_t.push_back(rv.optimizer_t);
    }
    return sol;
}

NestedSupCheck nested_sup_check(const TabularMdp& mdp, std::span<const ConstraintSpec> constraints,
                                double objective_beta, int policy_grid_resolution,
                                int t_grid_points) {
    require(t_grid_points >= 2, "t grid needs at least two points");
    check_constraints(mdp, constraints);
    const GridContext grid = make_grid(mdp, policy_grid_resolution);
    const std::size_t m = constraints.size();

    // Per-channel t grids over the reward ranges.
    std::vector<std::vector<double>> tgrid(m + 1);
    std::vector<double> spacing(m + 1, 0.0);
    std::vector<double> betas(m + 1, objective_beta);
    std::vector<int> channel(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) {
        betas[i + 1] = constraints[i].beta;
        channel[i + 1] = constraints[i].index;
    }
    for (std::size_t i = 0; i <= m; ++i) {
        const auto [lo, hi] = mdp.reward_range(channel[i]);
        spacing[i] = (hi - lo) / (t_grid_points - 1);
        for (int k = 0; k < t_grid_points; ++k)
            tgrid[i].push_back(lo + spacing[i] * k);
    }

    auto joint_value = [&](std::size_t id) {
        const TabularPolicy policy = grid.policy_at(id);
        const OccupancyMeasure nu = exact_occupancy(mdp, policy);
        // Feasibility: some grid t_i clears the threshold, per constraint.
        for (std::size_t i = 0; i < m; ++i) {
            const auto dist = nu.reward_distribution(mdp, channel[i + 1]);
            const OceSpec spec = OceSpec::cvar(betas[i + 1], Orientation::reward);
            double best = -std::numeric_limits<double>::infinity();
            for (double t : tgrid[i + 1]) best = std::max(best, oce_value(spec, dist, t));
            if (best < constraints[i].per_step_threshold - 1e-12)
                return -std::numeric_limits<double>::infinity();
        }
        const auto dist0 = nu.reward_distribution(mdp, 0);
        const OceSpec spec0 = OceSpec::cvar(betas[0], Orientation::reward);
        double best0 = -std::numeric_limits<double>::infinity();
        for (double t : tgrid[0]) best0 = std::max(best0, oce_value(spec0, dist0, t));
        return best0 / (1.0 - mdp.gamma);
    };

    NestedSupCheck check;
    check.joint_grid_value = grid_argmax(grid.total, joint_value).second;
    check.nested_value =
        brute_force_primal(mdp, constraints, objective_beta, policy_grid_resolution).objective;

    // Discretization bound: each channel's convolution objective is Lipschitz
    // in t with constant max(1, 1/beta - 1); the grid can miss the exact
    // optimizer by at most half a spacing per channel.
    double bound = 0.0;
    for (std::size_t i = 0; i <= m; ++i)
        bound += std::max(1.0, 1.0 / betas[i] - 1.0) * 0.5 * spacing[i];
    check.tolerance = bound / (1.0 - mdp.gamma) + 1e-9;
    return check;
}

DualityGapProbe duality_gap_probe(const TabularMdp& mdp,
                                  std::span<const ConstraintSpec> constraints,
                                  double objective_beta, std::span<const double> t_fixed,
                                  double lambda_grid_max, int lambda_grid_points,
                                  int policy_grid_resolution) {
    check_constraints(mdp, constraints);
    require(t_fixed.size() == constraints.size() + 1, "fixed t must have m+1 entries");
    require(lambda_grid_points >= 2 && lambda_grid_max > 0.0, "lambda grid needs size and range");
    const GridContext grid = make_grid(mdp, policy_grid_resolution);
    const std::size_t m = constraints.size();
    const double scale = 1.0 / (1.0 - mdp.gamma);

    // Objective and constraint-slack values per grid policy at the fixed t.
    std::vector<double> a(grid.total);
    std::vector<double> b(grid.total * m);
    parallel_for(grid.total, [&](std::size_t id) {
        const TabularPolicy policy = grid.policy_at(id);
        const OccupancyMeasure nu = exact_occupancy(mdp, policy);
        double acc0 = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            for (int act = 0; act < mdp.n_actions; ++act)
                acc0 += nu.at(s, act) *
                        transformed_reward(mdp.r(0, s, act), t_fixed[0], objective_beta);
        a[id] = acc0 * scale;
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int s = 0; s < mdp.n_states; ++s)
                for (int act = 0; act < mdp.n_actions; ++act)
                    acc += nu.at(s, act) * transformed_reward(mdp.r(constraints[i].index, s, act),
                                                              t_fixed[i + 1], constraints[i].beta);
            b[id * m + i] = (acc - constraints[i].per_step_threshold) * scale;
        }
    });

    DualityGapProbe probe;
    double primal = -std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < grid.total; ++id) {
        bool feas = true, strict = true;
        for (std::size_t i = 0; i < m; ++i) {
            feas = feas && b[id * m + i] >= 0.0;
            strict = strict && b[id * m + i] > 0.0;
        }
        if (strict) probe.slater_ok = true;
        if (feas) primal = std::max(primal, a[id]);
    }
    if (!probe.slater_ok || !std::isfinite(primal)) {
        probe.flagged = true;
        probe.primal = primal;
        probe.gap = std::numeric_limits<double>::quiet_NaN();
        probe.relative_gap = std::numeric_limits<double>::quiet_NaN();
        return probe;
    }

    double dual = std::numeric_limits<double>::infinity();
    std::vector<double> lambda(m, 0.0);
    // For one constraint the lambda grid is a plain linspace; more
    // constraints take the product grid.
    const std::size_t lambda_total =
        static_cast<std::size_t>(ipow(static_cast<double>(lambda_grid_points), static_cast<int>(m)));
    for (std::size_t lid = 0; lid < lambda_total; ++lid) {
        std::size_t rest = lid;
        for (std::size_t i = 0; i < m; ++i) {
            lambda[i] = lambda_grid_max * static_cast<double>(rest % lambda_grid_points) /
                        (lambda_grid_points - 1);
            rest /= lambda_grid_points;
        }
        double inner = -std::numeric_limits<double>::infinity();
        for (std::size_t id = 0; id < grid.total; ++id) {
            double v = a[id];
            for (std::size_t i = 0; i < m; ++i) v += lambda[i] * b[id * m + i];
            inner = std::max(inner, v);
        }
        dual = std::min(dual, inner);
    }

    probe.primal = primal;
    probe.dual = dual;
    probe.gap = dual - primal;
    probe.relative_gap = std::abs(probe.gap) / std::max(1e-12, std::abs(primal));
    return probe;
}

EvalReport evaluate_policy(Environment& env, const StochasticPolicy& policy, int n_episodes,
                           int horizon, std::span<const double> betas,
                           std::span<const double> cost_thresholds, double converged_t,
                           std::uint64_t seed, int headline_constraint) {
    require(n_episodes >= 1, "evaluation needs at least one episode");
    const std::size_t m = cost_thresholds.size();
    require(betas.size() == m, "one beta per constraint threshold");
    require(m == 0 || (headline_constraint >= 0 && headline_constraint < static_cast<int>(m)),
            "headline constraint out of range");
    require(static_cast<std::size_t>(env.n_reward_channels()) >= m + 1,
            "environment lacks the constraint reward channels");

    std::vector<Trajectory> episodes(static_cast<std::size_t>(n_episodes));
    std::vector<std::unique_ptr<Environment>> workers;
    for (int e = 0; e < n_episodes; ++e) workers.push_back(env.clone());
    parallel_for(static_cast<std::size_t>(n_episodes), [&](std::size_t e) {
        episodes[e] = rollout_eval(*workers[e], policy, horizon,
                                   derive_seed(seed, seeds::eval_episode, e));
    });

    EvalReport report;
    report.n_episodes = n_episodes;
    report.converged_t = converged_t;
    report.threshold = m > 0 ? cost_thresholds[headline_constraint] : 0.0;

    long total_steps = 0, violating_steps = 0;
    std::vector<double> pooled;
    for (const Trajectory& traj : episodes) {
        double ret = 0.0;
        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(traj.length()));
        for (int tau = 0; tau < traj.length(); ++tau) {
            ret += traj.reward(tau, 0);
            ++total_steps;
            bool violated = false;
            for (std::size_t i = 0; i < m; ++i) {
                // + 0.0 normalizes -0.0 from negating a zero reward
                const double u = -traj.reward(tau, static_cast<int>(i) + 1) + 0.0;
                if (u > cost_thresholds[i]) violated = true;
                if (static_cast<int>(i) == headline_constraint) samples.push_back(u);
            }
            if (violated) ++violating_steps;
        }
        report.mean_return += ret;
        pooled.insert(pooled.end(), samples.begin(), samples.end());
        report.constraint_samples.push_back(std::move(samples));
    }
    report.mean_return /= n_episodes;
    report.violation_rate =
        total_steps > 0 ? static_cast<double>(violating_steps) / total_steps : 0.0;

    if (m > 0 && !pooled.empty()) {
        const double beta = betas[headline_constraint];
        std::vector<double> sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        const double n = static_cast<double>(sorted.size());
        const std::size_t k = static_cast<std::size_t>(
            clip(std::ceil((1.0 - beta) * n) - 1.0, 0.0, n - 1.0));
        report.beta_upper_quantile = sorted[k];
        report.empirical_cvar =
            oce_optimize_t(OceSpec::cvar(beta, Orientation::loss), uniform_samples(pooled)).value;
    }
    return report;
}

namespace {

void emit_number(std::ostream& out, double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf;
}

} // namespace

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history,
                       std::span<const double> proxy_series) {
    require(!history.empty(), "history must be nonempty");
    const std::size_t m = history.front().lambda.size();
    out << "iteration";
    for (std::size_t i = 0; i <= m; ++i) out << ",t_" << i;
    for (std::size_t i = 1; i <= m; ++i) out << ",lambda_" << i;
    out << ",objective_estimate";
    for (std::size_t i = 1; i <= m; ++i) out << ",constraint_estimate_" << i;
    out << ",stationarity_proxy\n";
    for (std::size_t row = 0; row < history.size(); ++row) {
        const HistoryEntry& e = history[row];
        out << e.iteration;
        for (double x : e.t) {
            out << ',';
            emit_number(out, x);
        }
        for (double x : e.lambda) {
            out << ',';
            emit_number(out, x);
        }
        out << ',';
        emit_number(out, e.objective_estimate);
        for (double x : e.constraint_estimates) {
            out << ',';
            emit_number(out, x);
        }
        out << ',';
        emit_number(out, row < proxy_series.size() ? proxy_series[row] : 0.0);
        out << '\n';
    }
}

std::vector<std::string> emit_report(std::span<const HistoryEntry> history,
                                     std::span<const double> proxy_series, const EvalReport* eval,
                                     const std::string& out_dir, const std::string& format) {
    require(!history.empty(), "report needs a nonempty history");
    require(format == "csv", "unknown report format \"" + format + "\"");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;

    auto open = [&](const std::string& name) {
        const std::string path = out_dir + "/" + name;
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        written.push_back(path);
        return out;
    };

    {
        auto out = open("return_curve.csv");
        out << "iteration,objective_estimate\n";
        for (const auto& e : history) {
            out << e.iteration << ',';
            emit_number(out, e.objective_estimate);
            out << '\n';
        }
    }
    {
        auto out = open("t_curve.csv");
        const std::size_t m = history.front().lambda.size();
        out << "iteration";
        for (std::size_t i = 0; i <= m; ++i) out << ",t_" << i;
        out << '\n';
        for (const auto& e : history) {
            out << e.iteration;
            for (double x : e.t) {
                out << ',';
                emit_number(out, x);
            }
            out << '\n';
        }
    }
    {
        auto out = open("lambda_curve.csv");
        const std::size_t m = history.front().lambda.size();
        out << "iteration";
        for (std::size_t i = 1; i <= m; ++i) out << ",lambda_" << i;
        out << '\n';
        for (const auto& e : history) {
            out << e.iteration;
            for (double x : e.lambda) {
                out << ',';
                emit_number(out, x);
            }
            out << '\n';
        }
    }
    if (eval != nullptr) {
        std::vector<double> pooled;
        for (const auto& ep : eval->constraint_samples)
            pooled.insert(pooled.end(), ep.begin(), ep.end());
        auto out = open("histogram.csv");
        out << "bin_lo,bin_hi,count\n";
        if (!pooled.empty()) {
            const auto [lo_it, hi_it] = std::minmax_element(pooled.begin(), pooled.end());
            const double lo = *lo_it;
            const double width = std::max(*hi_it - lo, 1e-12) / 50;
            std::vector<long> bins(50, 0);
            for (double x : pooled) {
                auto bin = static_cast<std::size_t>(clip((x - lo) / width, 0.0, 49.0));
                ++bins[bin];
            }
            for (int i = 0; i < 50; ++i) {
                emit_number(out, lo + i * width);
                out << ',';
                emit_number(out, lo + (i + 1) * width);
                out << ',' << bins[i] << '\n';
            }
        }
    }

    nlohmann::json summary;
    summary["schema"] = "report.v1";
    summary["iterations"] = history.back().iteration;
    summary["final_t"] = history.back().t;
    summary["final_lambda"] = history.back().lambda;
    summary["objective_estimate_last"] = history.back().objective_estimate;
    summary["stationarity_proxy_last"] =
        proxy_series.empty() ? 0.0 : proxy_series[proxy_series.size() - 1];
    if (eval != nullptr) {
        nlohmann::json e;
        e["n_episodes"] = eval->n_episodes;
        e["mean_return"] = eval->mean_return;
        e["violation_rate"] = eval->violation_rate;
        e["beta_upper_quantile"] = eval->beta_upper_quantile;
        e["empirical_cvar"] = eval->empirical_cvar;
        e["converged_t"] = eval->converged_t;
        e["threshold"] = eval->threshold;
        summary["eval"] = e;
    } else {
        summary["eval"] = nullptr;
    }
    // The single timestamp field; everything else is byte-reproducible.
    summary["generated_at_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    {
        auto out = open("summary.json");
        out << summary.dump(2) << '\n';
    }
    return written;
}

std::pair<std::vector<HistoryEntry>, std::vector<double>> parse_history_csv(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "history csv: missing header");
    std::vector<std::string> cols;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) cols.push_back(col);
    }
    std::size_t m = 0;
    for (const auto& c : cols)
        if (c.rfind("lambda_", 0) == 0) ++m;
    require(cols.size() == 1 + (m + 1) + m + 1 + m + 1, "history csv: unexpected column count");

    std::vector<HistoryEntry> history;
    std::vector<double> proxy;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::vector<double> xs;
        while (std::getline(row, cell, ',')) xs.push_back(std::stod(cell));
        require(xs.size() == cols.size(), "history csv: ragged row");
        HistoryEntry e;
        std::size_t k = 0;
        e.iteration = static_cast<long>(xs[k++]);
        for (std::size_t i = 0; i <= m; ++i) e.t.push_back(xs[k++]);
        for (std::size_t i = 0; i < m; ++i) e.lambda.push_back(xs[k++]);
        e.objective_estimate = xs[k++];
        for (std::size_t i = 0; i < m; ++i) e.constraint_estimates.push_back(xs[k++]);
        proxy.push_back(xs[k++]);
        e.g_t.assign(m + 1, 0.0); // gradients are not persisted in the CSV
        e.g_lambda.assign(m, 0.0);
        history.push_back(std::move(e));
    }
    require(!history.empty(), "history csv: no data rows");
    return {std::move(history), std::move(proxy)};
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["schema"] = "eval.v1";
    j["n_episodes"] = report.n_episodes;
    j["mean_return"] = report.mean_return;
    j["violation_rate"] = report.violation_rate;
    j["beta_upper_quantile"] = report.beta_upper_quantile;
    j["empirical_cvar"] = report.empirical_cvar;
    j["converged_t"] = report.converged_t;
    j["threshold"] = report.threshold;
    j["constraint_samples"] = report.constraint_samples;
    return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    require(j.is_object(), "eval report: expected an object");
    require(j.value("schema", "") == "eval.v1", "eval.schema: expected \"eval.v1\"");
    EvalReport report;
    report.n_episodes = j.at("n_episodes").get<int>();
    report.mean_return = j.at("mean_return").get<double>();
    report.violation_rate = j.at("violation_rate").get<double>();
    report.beta_upper_quantile = j.at("beta_upper_quantile").get<double>();
    report.empirical_cvar = j.at("empirical_cvar").get<double>();
    report.converged_t = j.at("converged_t").get<double>();
    report.threshold = j.at("threshold").get<double>();
    report.constraint_samples =
        j.at("constraint_samples").get<std::vector<std::vector<double>>>();
    return report;
}

void validate_summary(const nlohmann::json& j) {
    require(j.is_object(), "summary: expected an object");
    require(j.value("schema", "") == "report.v1", "summary.schema: expected \"report.v1\"");
    for (const char* key : {"iterations", "objective_estimate_last", "generated_at_unix_ms"})
        require(j.contains(key) && j.at(key).is_number(),
                std::string("summary.") + key + ": expected a number");
    for (const char* key : {"final_t", "final_lambda"})
        require(j.contains(key) && j.at(key).is_array(),
                std::string("summary.") + key + ": expected an array");
    require(j.contains("eval"), "summary.eval: missing");
    if (!j.at("eval").is_null()) {
        const auto& e = j.at("eval");
        for (const char* key : {"n_episodes", "mean_return", "violation_rate",
                                "beta_upper_quantile", "empirical_cvar", "converged_t",
                                "threshold"})
            require(e.contains(key) && e.at(key).is_number(),
                    std::string("summary.eval.") + key + ": expected a number");
    }
}

} // namespace ocecrl
