#include "ocecrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ocecrl {

int truncation_horizon(double gamma, double eps_trunc) {
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    require(eps_trunc > 0.0 && eps_trunc < 1.0, "eps_trunc must lie in (0, 1)");
    return static_cast<int>(std::ceil(std::log(eps_trunc) / std::log(gamma)));
}

namespace {

class TabularEnv final : public Environment {
  public:
    explicit TabularEnv(TabularMdp mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

    int n_reward_channels() const override { return mdp_.n_reward_channels(); }
    int obs_dim() const override { return 1; }
    int action_dim() const override { return 1; }
    bool discrete_actions() const override { return true; }
    int n_actions() const override { return mdp_.n_actions; }
    double gamma() const override { return mdp_.gamma; }
    std::pair<double, double> reward_range(int index) const override {
        return mdp_.reward_range(index);
    }
    const TabularMdp* mdp() const override { return &mdp_; }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<TabularEnv>(mdp_);
    }

    void reset(std::mt19937_64& rng, std::span<double> obs_out) override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double x = u(rng);
        double acc = 0.0;
        state_ = mdp_.n_states - 1;
        for (int s = 0; s < mdp_.n_states; ++s) {
            acc += mdp_.initial_dist[s];
            if (x < acc) {
                state_ = s;
                break;
            }
        }
        obs_out[0] = state_;
    }

    bool step(std::span<const double> action, std::mt19937_64& rng, std::span<double> obs_out,
              std::span<double> rewards_out) override {
        const int a = static_cast<int>(action[0]);
        for (int i = 0; i < mdp_.n_reward_channels(); ++i)
            rewards_out[i] = mdp_.r(i, state_, a);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double x = u(rng);
        double acc = 0.0;
        int next = mdp_.n_states - 1;
        for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
            acc += mdp_.p(state_, a, s2);
            if (x < acc) {
                next = s2;
                break;
            }
        }
        state_ = next;
        obs_out[0] = state_;
        return true;
    }

  private:
    TabularMdp mdp_;
    int state_ = 0;
};

class PointMassEnv final : public Environment {
  public:
    explicit PointMassEnv(const PointMassParams& params) : p_(params) {
        require(p_.vel_threshold > 0.0, "vel_threshold must be positive");
        require(p_.action_noise_std >= 0.0, "action noise std must be nonnegative");
        require(p_.accel > 0.0 && p_.drag > 0.0 && p_.drag < 1.0 && p_.v_max > 0.0,
                "point-mass dynamics parameters out of range");
        require(p_.gamma > 0.0 && p_.gamma < 1.0, "gamma must lie in (0, 1)");
    }

    int n_reward_channels() const override { return 2; }
    int obs_dim() const override { return 1; }
    int action_dim() const override { return 1; }
    bool discrete_actions() const override { return false; }
    int n_actions() const override { return 0; }
    double gamma() const override { return p_.gamma; }
    std::pair<double, double> reward_range(int index) const override {
        require(index >= 0 && index < 2, "reward index out of range");
        if (index == 0) return {-p_.v_max, p_.v_max};
        return {-p_.v_max, 0.0};
    }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<PointMassEnv>(p_);
    }

    void reset(std::mt19937_64&, std::span<double> obs_out) override {
        // Same initial state every episode.
        x_ = 0.0;
        v_ = 0.0;
        obs_out[0] = v_;
    }

    bool step(std::span<const double> action, std::mt19937_64& rng, std::span<double> obs_out,
              std::span<double> rewards_out) override {
        double a = action[0];
        if (p_.action_noise_std > 0.0) {
            std::normal_distribution<double> noise(0.0, p_.action_noise_std);
            a += noise(rng);
        }
        a = clip(a, -1.0, 1.0);
        v_ = clip(a * p_.accel + v_ * (1.0 - p_.drag), -p_.v_max, p_.v_max);
        x_ += v_;
        rewards_out[0] = v_;           // forward progress
        rewards_out[1] = -std::abs(v_); // velocity cost in reward orientation
        obs_out[0] = v_;
        return true;
    }

  private:
    PointMassParams p_;
    double x_ = 0.0;
    double v_ = 0.0;
};

Trajectory run_rollout(Environment& env, const StochasticPolicy& policy, int horizon,
                       std::uint64_t seed, bool eval_mode) {
    require(horizon >= 1, "horizon must be at least 1");
    Trajectory traj;
    traj.obs_dim = env.obs_dim();
    traj.action_dim = env.action_dim();
    traj.n_reward_channels = env.n_reward_channels();
    traj.observations.resize(static_cast<std::size_t>(horizon) * traj.obs_dim);
    traj.actions.resize(static_cast<std::size_t>(horizon) * traj.action_dim);
    traj.rewards.resize(static_cast<std::size_t>(horizon) * traj.n_reward_channels);

    std::mt19937_64 rng = make_rng(seed);
    std::vector<double> obs(static_cast<std::size_t>(traj.obs_dim));
    env.reset(rng, obs);
    int steps = 0;
    for (int tstep = 0; tstep < horizon; ++tstep) {
        double* obs_slot = traj.observations.data() + static_cast<std::size_t>(tstep) * traj.obs_dim;
        std::copy(obs.begin(), obs.end(), obs_slot);
        double* act_slot = traj.actions.data() + static_cast<std::size_t>(tstep) * traj.action_dim;
        std::span<double> act(act_slot, static_cast<std::size_t>(traj.action_dim));
        if (eval_mode)
            eval_action(policy, obs, act, rng);
        else
            sample_action(policy, obs, act, rng);
        double* rew_slot =
            traj.rewards.data() + static_cast<std::size_t>(tstep) * traj.n_reward_channels;
        const bool alive = env.step(act, rng, obs,
                                    {rew_slot, static_cast<std::size_t>(traj.n_reward_channels)});
        ++steps;
        if (!alive) break;
    }
    traj.truncated_at = steps;
    traj.observations.resize(static_cast<std::size_t>(steps) * traj.obs_dim);
    traj.actions.resize(static_cast<std::size_t>(steps) * traj.action_dim);
    traj.rewards.resize(static_cast<std::size_t>(steps) * traj.n_reward_channels);
    return traj;
}

} // namespace

Trajectory rollout(Environment& env, const StochasticPolicy& policy, int horizon,
                   std::uint64_t seed) {
    return run_rollout(env, policy, horizon, seed, false);
}

Trajectory rollout_eval(Environment& env, const StochasticPolicy& policy, int horizon,
                        std::uint64_t seed) {
    return run_rollout(env, policy, horizon, seed, true);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "step";
    for (int d = 0; d < traj.obs_dim; ++d) out << ",state_" << d;
    for (int d = 0; d < traj.action_dim; ++d) out << ",action_" << d;
    for (int i = 0; i < traj.n_reward_channels; ++i) out << ",r_" << i;
    out << "\n";
    char buf[64];
    for (int tstep = 0; tstep < traj.length(); ++tstep) {
        out << tstep;
        auto emit = [&](double x) {
            std::snprintf(buf, sizeof(buf), ",%.17g", x);
            out << buf;
        };
        for (double x : traj.obs(tstep)) emit(x);
        for (double x : traj.action(tstep)) emit(x);
        for (int i = 0; i < traj.n_reward_channels; ++i) emit(traj.reward(tstep, i));
        out << "\n";
    }
}

TabularMdp make_gridnav(const GridNavParams& params) {
    const int W = params.width, H = params.height;
    require(W >= 1 && H >= 1, "grid dimensions must be positive");
    require(params.slip_prob >= 0.0 && params.slip_prob < 1.0, "slip probability out of range");
    auto inside = [&](std::pair<int, int> c) {
        return c.first >= 0 && c.first < W && c.second >= 0 && c.second < H;
    };
    require(inside(params.goal), "goal outside the grid");
    require(inside(params.start), "start outside the grid");
    for (auto c : params.unsafe_cells) {
        require(inside(c), "unsafe cell outside the grid");
        require(c != params.goal, "goal overlaps an unsafe cell");
    }

    auto cell_index = [&](int x, int y) { return y * W + x; };
    const int S = W * H;
    const int A = 4; // up, down, left, right
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {1, -1, 0, 0};
    const int goal = cell_index(params.goal.first, params.goal.second);

    std::vector<bool> unsafe(static_cast<std::size_t>(S), false);
    for (auto c : params.unsafe_cells) unsafe[cell_index(c.first, c.second)] = true;

    TabularMdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.gamma = params.gamma;
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.initial_dist.assign(static_cast<std::size_t>(S), 0.0);
    mdp.initial_dist[cell_index(params.start.first, params.start.second)] = 1.0;
    mdp.rewards.assign(2, std::vector<double>(static_cast<std::size_t>(S) * A, 0.0));

    auto move_target = [&](int s, int dir) {
        const int x = s % W, y = s / W;
        const int nx = x + dx[dir], ny = y + dy[dir];
        if (nx < 0 || nx >= W || ny < 0 || ny >= H) return s; // bump the wall
        return cell_index(nx, ny);
    };

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            auto& row = mdp.transition;
            auto at = [&](int s2) -> double& {
                return row[(static_cast<std::size_t>(s) * A + a) * S + s2];
            };
            if (s == goal) {
                at(s) = 1.0; // absorbing
            } else {
                at(move_target(s, a)) += 1.0 - params.slip_prob;
                for (int d = 0; d < A; ++d)
                    if (d != a) at(move_target(s, d)) += params.slip_prob / 3.0;
            }
            mdp.rewards[0][static_cast<std::size_t>(s) * A + a] =
                s == goal ? params.goal_bonus : -params.step_penalty;
            mdp.rewards[1][static_cast<std::size_t>(s) * A + a] = unsafe[s] ? -1.0 : 0.0;
        }
    mdp.validate();
    return mdp;
}

std::unique_ptr<Environment> make_pointmass(const PointMassParams& params) {
    return std::make_unique<PointMassEnv>(params);
}

std::unique_ptr<Environment> make_tabular_env(TabularMdp mdp) {
    return std::make_unique<TabularEnv>(std::move(mdp));
}

namespace {

class ChannelMappedEnv final : public Environment {
  public:
    ChannelMappedEnv(std::unique_ptr<Environment> inner, std::vector<int> channels)
        : inner_(std::move(inner)), channels_(std::move(channels)) {
        require(!channels_.empty(), "channel map must be nonempty");
        for (int c : channels_)
            require(c >= 0 && c < inner_->n_reward_channels(),
                    "channel map entry " + std::to_string(c) + " out of range");
        if (const TabularMdp* model = inner_->mdp()) {
            TabularMdp remapped = *model;
            remapped.rewards.clear();
            for (int c : channels_) remapped.rewards.push_back(model->rewards[c]);
            mapped_mdp_ = std::move(remapped);
        }
        scratch_.resize(static_cast<std::size_t>(inner_->n_reward_channels()));
    }

    int n_reward_channels() const override { return static_cast<int>(channels_.size()); }
    int obs_dim() const override { return inner_->obs_dim(); }
    int action_dim() const override { return inner_->action_dim(); }
    bool discrete_actions() const override { return inner_->discrete_actions(); }
    int n_actions() const override { return inner_->n_actions(); }
    double gamma() const override { return inner_->gamma(); }
    std::pair<double, double> reward_range(int index) const override {
        return inner_->reward_range(channels_.at(index));
    }
    const TabularMdp* mdp() const override {
        return mapped_mdp_ ? &*mapped_mdp_ : nullptr;
    }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<ChannelMappedEnv>(inner_->clone(), channels_);
    }
    void reset(std::mt19937_64& rng, std::span<double> obs_out) override {
        inner_->reset(rng, obs_out);
    }
    bool step(std::span<const double> action, std::mt19937_64& rng, std::span<double> obs_out,
              std::span<double> rewards_out) override {
        const bool alive = inner_->step(action, rng, obs_out, scratch_);
        for (std::size_t i = 0; i < channels_.size(); ++i)
            rewards_out[i] = scratch_[channels_[i]];
        return alive;
    }

  private:
    std::unique_ptr<Environment> inner_;
    std::vector<int> channels_;
    std::optional<TabularMdp> mapped_mdp_;
    std::vector<double> scratch_;
};

} // namespace

std::unique_ptr<Environment> remap_reward_channels(std::unique_ptr<Environment> env,
                                                   std::vector<int> channels) {
    return std::make_unique<ChannelMappedEnv>(std::move(env), std::move(channels));
}

} // namespace ocecrl
