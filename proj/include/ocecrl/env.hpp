#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "ocecrl/mdp.hpp"
#include "ocecrl/policy.hpp"

namespace ocecrl {

// One rollout, stored as flat per-step arrays. Every step carries the full
// reward vector r_0..r_m.
struct Trajectory {
    int obs_dim = 1;
    int action_dim = 1;
    int n_reward_channels = 1;
    std::vector<double> observations; // [step][obs_dim]
    std::vector<double> actions;      // [step][action_dim]
    std::vector<double> rewards;      // [step][m+1]
    int truncated_at = 0;

    int length() const { return truncated_at; }
    std::span<const double> obs(int step) const {
        return {observations.data() + static_cast<std::size_t>(step) * obs_dim,
                static_cast<std::size_t>(obs_dim)};
    }
    std::span<const double> action(int step) const {
        return {actions.data() + static_cast<std::size_t>(step) * action_dim,
                static_cast<std::size_t>(action_dim)};
    }
    double reward(int step, int index) const {
        return rewards[static_cast<std::size_t>(step) * n_reward_channels + index];
    }
};

// Mutable episode state lives in the handle: use one handle per concurrent
// worker (clone() produces an independent one).
class Environment {
  public:
    virtual ~Environment() = default;

    virtual int n_reward_channels() const = 0;
    virtual int obs_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual bool discrete_actions() const = 0;
    virtual int n_actions() const = 0; // discrete envs only
    virtual double gamma() const = 0;
    virtual std::pair<double, double> reward_range(int index) const = 0;
    virtual const TabularMdp* mdp() const { return nullptr; }
    virtual std::unique_ptr<Environment> clone() const = 0;

    virtual void reset(std::mt19937_64& rng, std::span<double> obs_out) = 0;
    // Returns false when the episode terminates at this step.
    virtual bool step(std::span<const double> action, std::mt19937_64& rng,
                      std::span<double> obs_out, std::span<double> rewards_out) = 0;
};

// Horizon at which the discounted tail is below eps_trunc:
// H = ceil(log(eps_trunc) / log(gamma)). Truncation error is bounded by
// eps_trunc * ||r||_inf / (1 - gamma).
int truncation_horizon(double gamma, double eps_trunc);

// Exactly `horizon` steps unless the environment terminates earlier;
// reproducible given the seed.
Trajectory rollout(Environment& env, const StochasticPolicy& policy, int horizon,
                   std::uint64_t seed);

// Evaluation variant: Gaussian policies act with their mean.
Trajectory rollout_eval(Environment& env, const StochasticPolicy& policy, int horizon,
                        std::uint64_t seed);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

struct GridNavParams {
    int width = 5;
    int height = 5;
    std::pair<int, int> start{0, 0};
    std::pair<int, int> goal{4, 4};
    std::vector<std::pair<int, int>> unsafe_cells;
    double slip_prob = 0.0;
    double goal_bonus = 1.0;
    double step_penalty = 0.04;
    double gamma = 0.95;
};

// Grid navigation MDP. Objective reward: goal bonus on the absorbing goal
// cell, step penalty elsewhere. Constraint channel 1 is -1 on unsafe cells
// (per-step cost of 1 mapped to the reward orientation).
TabularMdp make_gridnav(const GridNavParams& params);

struct PointMassParams {
    double vel_threshold = 0.5;
    double action_noise_std = 0.05; // in action units; actions live in [-1, 1]
    double accel = 0.25;
    double drag = 0.125;
    double v_max = 1.0;
    double gamma = 0.99;
};

// 1-D point mass: v <- clip(a*accel + v*(1-drag), +-v_max), x <- x + v.
// Observation is the velocity. Reward 0 is forward progress (the new
// velocity); constraint channel 1 is -|v|. Episodes always reset to x=0, v=0.
std::unique_ptr<Environment> make_pointmass(const PointMassParams& params);

std::unique_ptr<Environment> make_tabular_env(TabularMdp mdp);

// View of an environment exposing the reward channels listed in `channels`
// (in that order). Lets a run bind constraints to arbitrary channels, or
// drop unused ones.
std::unique_ptr<Environment> remap_reward_channels(std::unique_ptr<Environment> env,
                                                   std::vector<int> channels);

} // namespace ocecrl
