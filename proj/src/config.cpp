#include "ocecrl/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ocecrl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw validation_error(path + ": " + msg);
}

const json& need(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) fail(path + "." + key, "missing required field");
    return j.at(key);
}

double need_num(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

double opt_num(const json& j, const char* key, const std::string& path, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

long opt_int(const json& j, const char* key, const std::string& path, long fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<long>();
}

bool opt_bool(const json& j, const char* key, const std::string& path, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string need_str(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::pair<int, int> need_cell(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        fail(path, "expected a [x, y] integer pair");
    return {v[0].get<int>(), v[1].get<int>()};
}

EnvironmentSpecConfig parse_environment(const json& j, const std::string& path) {
    EnvironmentSpecConfig env;
    env.name = need_str(j, "name", path);
    if (env.name == "gridnav") {
        GridNavParams& g = env.gridnav;
        g.width = static_cast<int>(opt_int(j, "width", path, g.width));
        g.height = static_cast<int>(opt_int(j, "height", path, g.height));
        if (j.contains("start")) g.start = need_cell(j.at("start"), path + ".start");
        if (j.contains("goal")) g.goal = need_cell(j.at("goal"), path + ".goal");
        if (j.contains("unsafe_cells")) {
            const json& cells = j.at("unsafe_cells");
            if (!cells.is_array()) fail(path + ".unsafe_cells", "expected an array");
            for (std::size_t i = 0; i < cells.size(); ++i)
                g.unsafe_cells.push_back(
                    need_cell(cells[i], path + ".unsafe_cells[" + std::to_string(i) + "]"));
        }
        g.slip_prob = opt_num(j, "slip_prob", path, g.slip_prob);
        g.goal_bonus = opt_num(j, "goal_bonus", path, g.goal_bonus);
        g.step_penalty = opt_num(j, "step_penalty", path, g.step_penalty);
        g.gamma = opt_num(j, "gamma", path, g.gamma);
    } else if (env.name == "pointmass") {
        PointMassParams& p = env.pointmass;
        p.vel_threshold = opt_num(j, "vel_threshold", path, p.vel_threshold);
        p.action_noise_std = opt_num(j, "action_noise_std", path, p.action_noise_std);
        p.accel = opt_num(j, "accel", path, p.accel);
        p.drag = opt_num(j, "drag", path, p.drag);
        p.v_max = opt_num(j, "v_max", path, p.v_max);
        p.gamma = opt_num(j, "gamma", path, p.gamma);
    } else if (env.name == "tabular") {
        try {
            env.tabular = mdp_from_json(need(j, "mdp", path));
        } catch (const std::exception& e) {
            fail(path + ".mdp", e.what());
        }
    } else {
        fail(path + ".name", "unknown environment \"" + env.name + "\"");
    }
    return env;
}

} // namespace

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) fail("config", "expected an object");
    if (j.value("schema", "") != "config.v1") fail("config.schema", "expected \"config.v1\"");

    RunConfig cfg;
    {
        const json& s = need(j, "seed", "config");
        if (!s.is_number_unsigned() && !s.is_number_integer())
            fail("config.seed", "expected an integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    if (j.contains("output_dir")) cfg.output_dir = need_str(j, "output_dir", "config");
    cfg.environment = parse_environment(need(j, "environment", "config"), "config.environment");

    if (j.contains("constraints")) {
        const json& cons = j.at("constraints");
        if (!cons.is_array()) fail("config.constraints", "expected an array");
        for (std::size_t i = 0; i < cons.size(); ++i) {
            const std::string path = "config.constraints[" + std::to_string(i) + "]";
            const json& c = cons[i];
            ConstraintConfig cc;
            cc.index = static_cast<int>(opt_int(c, "index", path, static_cast<long>(i) + 1));
            cc.beta = need_num(c, "beta", path);
            if (!(cc.beta > 0.0 && cc.beta <= 1.0)) fail(path + ".beta", "must lie in (0, 1]");
            cc.threshold = need_num(c, "threshold", path);
            if (c.contains("orientation")) {
                cc.orientation = need_str(c, "orientation", path);
                if (cc.orientation != "cost" && cc.orientation != "reward")
                    fail(path + ".orientation", "expected \"cost\" or \"reward\"");
            }
            cfg.constraints.push_back(cc);
        }
    }

    {
        const json& s = need(j, "solver", "config");
        const std::string path = "config.solver";
        cfg.solver.kind = need_str(s, "kind", path);
        if (cfg.solver.kind != "exact" && cfg.solver.kind != "pg")
            fail(path + ".kind", "expected \"exact\" or \"pg\"");
        cfg.solver.budget.max_env_steps = opt_int(s, "max_env_steps", path, 1000000);
        cfg.solver.budget.max_updates = opt_int(s, "max_updates", path, 10000);
        cfg.solver.budget.tolerance = opt_num(s, "tolerance", path, 1e-8);
        if (cfg.solver.budget.max_env_steps <= 0) fail(path + ".max_env_steps", "must be positive");
        if (cfg.solver.budget.max_updates <= 0) fail(path + ".max_updates", "must be positive");
        if (cfg.solver.budget.tolerance <= 0.0) fail(path + ".tolerance", "must be positive");
        PgConfig& p = cfg.solver.pg;
        p.rollouts_per_update =
            static_cast<int>(opt_int(s, "rollouts_per_update", path, p.rollouts_per_update));
        p.horizon = static_cast<int>(opt_int(s, "horizon", path, p.horizon));
        p.epochs = static_cast<int>(opt_int(s, "epochs", path, p.epochs));
        p.minibatches = static_cast<int>(opt_int(s, "minibatches", path, p.minibatches));
        p.clip = opt_num(s, "clip", path, p.clip);
        p.gae_lambda = opt_num(s, "gae_lambda", path, p.gae_lambda);
        p.lr = opt_num(s, "lr", path, p.lr);
        p.value_lr = opt_num(s, "value_lr", path, p.value_lr);
        p.entropy_coef = opt_num(s, "entropy_coef", path, p.entropy_coef);
        p.adam = opt_bool(s, "adam", path, p.adam);
        p.normalize_advantages = opt_bool(s, "normalize_advantages", path, p.normalize_advantages);
        p.warm_start = opt_bool(s, "warm_start", path, p.warm_start);
        p.gaussian_features =
            static_cast<int>(opt_int(s, "gaussian_features", path, p.gaussian_features));
        p.init_log_std = opt_num(s, "init_log_std", path, p.init_log_std);
        p.log_std_lo = opt_num(s, "log_std_lo", path, p.log_std_lo);
        p.log_std_hi = opt_num(s, "log_std_hi", path, p.log_std_hi);
        if (cfg.solver.kind == "pg") {
            try {
                p.validate();
            } catch (const std::exception& e) {
                fail(path, e.what());
            }
        }
    }

    {
        const json& s = need(j, "sgda", "config");
        const std::string path = "config.sgda";
        SgdaConfig& g = cfg.sgda;
        g.iterations = opt_int(s, "iterations", path, g.iterations);
        if (g.iterations < 1) fail(path + ".iterations", "must be at least 1");
        g.batch_size = static_cast<int>(opt_int(s, "batch_size", path, g.batch_size));
        if (g.batch_size < 1) fail(path + ".batch_size", "must be at least 1");
        g.eta_t = opt_num(s, "eta_t", path, g.eta_t);
        g.eta_lambda = opt_num(s, "eta_lambda", path, g.eta_lambda);
        if (g.eta_t <= 0.0) fail(path + ".eta_t", "must be positive");
        if (g.eta_lambda <= 0.0) fail(path + ".eta_lambda", "must be positive");
        g.lambda_max = opt_num(s, "lambda_max", path, g.lambda_max);
        if (g.lambda_max <= 0.0) fail(path + ".lambda_max", "must be positive");
        g.lambda_init = opt_num(s, "lambda_init", path, g.lambda_init);
        if (g.lambda_init < 0.0 || g.lambda_init > g.lambda_max)
            fail(path + ".lambda_init", "must lie in [0, lambda_max]");
        g.objective_beta = opt_num(s, "objective_beta", path, g.objective_beta);
        if (!(g.objective_beta > 0.0 && g.objective_beta <= 1.0))
            fail(path + ".objective_beta", "must lie in (0, 1]");
        if (s.contains("t_init")) {
            const json& t = s.at("t_init");
            if (!t.is_array()) fail(path + ".t_init", "expected an array");
            g.t_init = t.get<std::vector<double>>();
        }
        if (s.contains("t_boxes")) {
            const json& tb = s.at("t_boxes");
            if (!tb.is_array()) fail(path + ".t_boxes", "expected an array of [lo, hi] pairs");
            std::vector<std::pair<double, double>> boxes;
            for (std::size_t i = 0; i < tb.size(); ++i) {
                const json& b = tb[i];
                if (!b.is_array() || b.size() != 2)
                    fail(path + ".t_boxes[" + std::to_string(i) + "]", "expected [lo, hi]");
                boxes.emplace_back(b[0].get<double>(), b[1].get<double>());
            }
            g.t_boxes = std::move(boxes);
        }
        g.t_box_margin = opt_num(s, "t_box_margin", path, g.t_box_margin);
        if (g.t_box_margin < 0.0) fail(path + ".t_box_margin", "must be nonnegative");
        g.eps_trunc = opt_num(s, "eps_trunc", path, g.eps_trunc);
        if (!(g.eps_trunc > 0.0 && g.eps_trunc < 1.0)) fail(path + ".eps_trunc", "must lie in (0, 1)");
        g.horizon_cap = static_cast<int>(opt_int(s, "horizon_cap", path, g.horizon_cap));
        if (g.horizon_cap < 1) fail(path + ".horizon_cap", "must be at least 1");
        g.history_ring = static_cast<int>(opt_int(s, "history_ring", path, g.history_ring));
        if (g.history_ring < 1) fail(path + ".history_ring", "must be at least 1");
        g.proxy_window = static_cast<int>(opt_int(s, "proxy_window", path, g.proxy_window));
        if (g.proxy_window < 1) fail(path + ".proxy_window", "must be at least 1");
    }
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    json j;
    j["schema"] = "config.v1";
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;

    json env;
    env["name"] = cfg.environment.name;
    if (cfg.environment.name == "gridnav") {
        const GridNavParams& g = cfg.environment.gridnav;
        env["width"] = g.width;
        env["height"] = g.height;
        env["start"] = {g.start.first, g.start.second};
        env["goal"] = {g.goal.first, g.goal.second};
        json cells = json::array();
        for (auto c : g.unsafe_cells) cells.push_back({c.first, c.second});
        env["unsafe_cells"] = cells;
        env["slip_prob"] = g.slip_prob;
        env["goal_bonus"] = g.goal_bonus;
        env["step_penalty"] = g.step_penalty;
        env["gamma"] = g.gamma;
    } else if (cfg.environment.name == "pointmass") {
        const PointMassParams& p = cfg.environment.pointmass;
        env["vel_threshold"] = p.vel_threshold;
        env["action_noise_std"] = p.action_noise_std;
        env["accel"] = p.accel;
        env["drag"] = p.drag;
        env["v_max"] = p.v_max;
        env["gamma"] = p.gamma;
    } else if (cfg.environment.tabular) {
        env["mdp"] = mdp_to_json(*cfg.environment.tabular);
    }
    j["environment"] = env;

    json cons = json::array();
    for (const auto& c : cfg.constraints) {
        json cc;
        cc["index"] = c.index;
        cc["beta"] = c.beta;
        cc["threshold"] = c.threshold;
        cc["orientation"] = c.orientation;
        cons.push_back(cc);
    }
    j["constraints"] = cons;

    json s;
    s["kind"] = cfg.solver.kind;
    s["max_env_steps"] = cfg.solver.budget.max_env_steps;
    s["max_updates"] = cfg.solver.budget.max_updates;
    s["tolerance"] = cfg.solver.budget.tolerance;
    const PgConfig& p = cfg.solver.pg;
    s["rollouts_per_update"] = p.rollouts_per_update;
    s["horizon"] = p.horizon;
    s["epochs"] = p.epochs;
    s["minibatches"] = p.minibatches;
    s["clip"] = p.clip;
    s["gae_lambda"] = p.gae_lambda;
    s["lr"] = p.lr;
    s["value_lr"] = p.value_lr;
    s["entropy_coef"] = p.entropy_coef;
    s["adam"] = p.adam;
    s["normalize_advantages"] = p.normalize_advantages;
    s["warm_start"] = p.warm_start;
    s["gaussian_features"] = p.gaussian_features;
    s["init_log_std"] = p.init_log_std;
    s["log_std_lo"] = p.log_std_lo;
    s["log_std_hi"] = p.log_std_hi;
    j["solver"] = s;

    json g;
    g["iterations"] = cfg.sgda.iterations;
    g["batch_size"] = cfg.sgda.batch_size;
    g["eta_t"] = cfg.sgda.eta_t;
    g["eta_lambda"] = cfg.sgda.eta_lambda;
    g["lambda_max"] = cfg.sgda.lambda_max;
    g["lambda_init"] = cfg.sgda.lambda_init;
    g["objective_beta"] = cfg.sgda.objective_beta;
    if (cfg.sgda.t_init) g["t_init"] = *cfg.sgda.t_init;
    if (cfg.sgda.t_boxes) {
        json tb = json::array();
        for (auto b : *cfg.sgda.t_boxes) tb.push_back({b.first, b.second});
        g["t_boxes"] = tb;
    }
    g["t_box_margin"] = cfg.sgda.t_box_margin;
    g["eps_trunc"] = cfg.sgda.eps_trunc;
    g["horizon_cap"] = cfg.sgda.horizon_cap;
    g["history_ring"] = cfg.sgda.history_ring;
    g["proxy_window"] = cfg.sgda.proxy_window;
    j["sgda"] = g;
    return j;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error(std::string("config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::unique_ptr<Environment> build_environment(const EnvironmentSpecConfig& spec) {
    if (spec.name == "gridnav") return make_tabular_env(make_gridnav(spec.gridnav));
    if (spec.name == "pointmass") return make_pointmass(spec.pointmass);
    if (spec.name == "tabular") {
        require(spec.tabular.has_value(), "tabular environment needs an inline model");
        return make_tabular_env(*spec.tabular);
    }
    throw validation_error("unknown environment \"" + spec.name + "\"");
}

std::unique_ptr<PolicySolver> build_solver(const SolverChoiceConfig& solver) {
    if (solver.kind == "exact") return std::make_unique<ExactValueIterationSolver>();
    if (solver.kind == "pg") return std::make_unique<ClippedSurrogatePgSolver>(solver.pg);
    throw validation_error("unknown solver \"" + solver.kind + "\"");
}

std::vector<ConstraintSpec> build_constraints(const RunConfig& config, const Environment& env) {
    std::vector<ConstraintSpec> out;
    for (const auto& c : config.constraints) {
        require(c.index >= 1 && c.index < env.n_reward_channels(),
                "constraint index " + std::to_string(c.index) + " has no reward channel");
        ConstraintSpec spec;
        spec.index = c.index;
        spec.beta = c.beta;
        spec.per_step_threshold = c.per_step_threshold();
        spec.original_orientation =
            c.orientation == "cost" ? Orientation::loss : Orientation::reward;
        out.push_back(spec);
    }
    return out;
}

} // namespace ocecrl
