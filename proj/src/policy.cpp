#include "ocecrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace ocecrl {

void TabularPolicy::validate() const {
    require(n_states > 0 && n_actions > 0, "policy dimensions must be positive");
    require(probs.size() == static_cast<std::size_t>(n_states) * n_actions,
            "policy table size mismatch");
    for (int s = 0; s < n_states; ++s) {
        double row = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            require(prob(s, a) >= 0.0, "policy probabilities must be nonnegative");
            row += prob(s, a);
        }
        require(std::abs(row - 1.0) <= 1e-12,
                "policy row " + std::to_string(s) + " must sum to 1 within 1e-12");
    }
}

void SoftmaxLinearPolicy::action_probs(int state_index, std::span<double> out) const {
    const double* logits = weights.data() + static_cast<std::size_t>(state_index) * n_actions;
    double mx = logits[0];
    for (int a = 1; a < n_actions; ++a) mx = std::max(mx, logits[a]);
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) {
        out[a] = std::exp(logits[a] - mx);
        total += out[a];
    }
    for (int a = 0; a < n_actions; ++a) out[a] /= total;
}

double GaussianLinearPolicy::mean(std::span<const double> obs) const {
    double acc = mean_weights[0]; // bias feature
    for (int f = 1; f < n_features; ++f) acc += mean_weights[f] * obs[f - 1];
    return acc;
}

void GaussianLinearPolicy::validate() const {
    require(n_features >= 1, "gaussian policy needs at least the bias feature");
    require(mean_weights.size() == static_cast<std::size_t>(n_features),
            "gaussian mean weight count mismatch");
    require(log_std_lo <= log_std_hi, "log-std box must be ordered");
    require(log_std >= log_std_lo && log_std <= log_std_hi,
            "log-std must lie in the configured box");
}

void validate_policy(const StochasticPolicy& policy) {
    std::visit([](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TabularPolicy>) p.validate();
        else if constexpr (std::is_same_v<T, GaussianLinearPolicy>) p.validate();
        else {
            require(p.n_features > 0 && p.n_actions > 0, "policy dimensions must be positive");
            require(p.weights.size() == static_cast<std::size_t>(p.n_features) * p.n_actions,
                    "softmax weight table size mismatch");
        }
    }, policy);
}

namespace {

int sample_index(std::span<const double> probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
        acc += probs[a];
        if (x < acc) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size()) - 1;
}

} // namespace

void sample_action(const StochasticPolicy& policy, std::span<const double> obs,
                   std::span<double> action_out, std::mt19937_64& rng) {
    std::visit([&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TabularPolicy>) {
            const int s = static_cast<int>(obs[0]);
            std::span<const double> row(p.probs.data() + static_cast<std::size_t>(s) * p.n_actions,
                                        static_cast<std::size_t>(p.n_actions));
            action_out[0] = sample_index(row, rng);
        } else if constexpr (std::is_same_v<T, SoftmaxLinearPolicy>) {
            const int s = static_cast<int>(obs[0]);
            std::vector<double> probs(static_cast<std::size_t>(p.n_actions));
            p.action_probs(s, probs);
            action_out[0] = sample_index(probs, rng);
        } else {
            std::normal_distribution<double> n(p.mean(obs), p.std_dev());
            action_out[0] = n(rng);
        }
    }, policy);
}

void eval_action(const StochasticPolicy& policy, std::span<const double> obs,
                 std::span<double> action_out, std::mt19937_64& rng) {
    if (const auto* g = std::get_if<GaussianLinearPolicy>(&policy)) {
        action_out[0] = g->mean(obs);
        return;
    }
    sample_action(policy, obs, action_out, rng);
}

TabularPolicy to_tabular(const StochasticPolicy& policy, int n_states, int n_actions) {
    if (const auto* t = std::get_if<TabularPolicy>(&policy)) {
        require(t->n_states == n_states && t->n_actions == n_actions,
                "tabular policy dimensions do not match the model");
        return *t;
    }
    if (const auto* s = std::get_if<SoftmaxLinearPolicy>(&policy)) {
        require(s->n_features == n_states && s->n_actions == n_actions,
                "softmax policy is not one-hot over this state space");
        TabularPolicy out{n_states, n_actions,
                          std::vector<double>(static_cast<std::size_t>(n_states) * n_actions)};
        std::vector<double> probs(static_cast<std::size_t>(n_actions));
        for (int st = 0; st < n_states; ++st) {
            s->action_probs(st, probs);
            for (int a = 0; a < n_actions; ++a)
                out.probs[static_cast<std::size_t>(st) * n_actions + a] = probs[a];
        }
        return out;
    }
    throw validation_error("gaussian policies have no tabular form");
}

nlohmann::json policy_to_json(const StochasticPolicy& policy) {
    nlohmann::json j;
    j["schema"] = "policy.v1";
    std::visit([&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TabularPolicy>) {
            j["representation"] = "tabular";
            j["n_states"] = p.n_states;
            j["n_actions"] = p.n_actions;
            j["probs"] = p.probs;
        } else if constexpr (std::is_same_v<T, SoftmaxLinearPolicy>) {
            j["representation"] = "softmax_linear";
            j["n_features"] = p.n_features;
            j["n_actions"] = p.n_actions;
            j["weights"] = p.weights;
        } else {
            j["representation"] = "gaussian_linear";
            j["n_features"] = p.n_features;
            j["mean_weights"] = p.mean_weights;
            j["log_std"] = p.log_std;
            j["log_std_box"] = {p.log_std_lo, p.log_std_hi};
        }
    }, policy);
    return j;
}

StochasticPolicy policy_from_json(const nlohmann::json& j) {
    require(j.is_object(), "policy: expected an object");
    require(j.value("schema", "") == "policy.v1", "policy.schema: expected \"policy.v1\"");
    const std::string rep = j.value("representation", "");
    if (rep == "tabular") {
        TabularPolicy p{j.at("n_states").get<int>(), j.at("n_actions").get<int>(),
                        j.at("probs").get<std::vector<double>>()};
        p.validate();
        return p;
    }
    if (rep == "softmax_linear") {
        SoftmaxLinearPolicy p{j.at("n_features").get<int>(), j.at("n_actions").get<int>(),
                              j.at("weights").get<std::vector<double>>()};
        StochasticPolicy sp = p;
        validate_policy(sp);
        return sp;
    }
    if (rep == "gaussian_linear") {
        GaussianLinearPolicy p;
        p.n_features = j.at("n_features").get<int>();
        p.mean_weights = j.at("mean_weights").get<std::vector<double>>();
        p.log_std = j.at("log_std").get<double>();
        auto box = j.at("log_std_box").get<std::vector<double>>();
        require(box.size() == 2, "policy.log_std_box: expected two entries");
        p.log_std_lo = box[0];
        p.log_std_hi = box[1];
        p.validate();
        return p;
    }
    throw validation_error("policy.representation: unknown value \"" + rep + "\"");
}

} // namespace ocecrl
