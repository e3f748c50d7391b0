#pragma once

#include <span>
#include <vector>

#include "ocecrl/env.hpp"
#include "ocecrl/shaping.hpp"

namespace ocecrl {

struct GradEstimate {
    std::vector<double> g_t;      // m+1
    std::vector<double> g_lambda; // m
    int n_trajectories = 0;
};

// Batch subgradients of the discounted shaped objective at (t, lambda):
//   g_lambda[i] = mean_k sum_tau gamma^tau (r'_i - cbar_i)
//   g_t[0]      = mean_k sum_tau gamma^tau (1 - (1/beta_0) 1{t_0 >= r_0})
//   g_t[i]      = lambda_i mean_k sum_tau gamma^tau (1 - (1/beta_i) 1{t_i >= r_i})
// Trajectories are reduced in index order, so the result is independent of
// how the batch was collected.
GradEstimate estimate_gradients(std::span<const Trajectory> batch, std::span<const double> t,
                                std::span<const double> lambda, std::span<const double> betas,
                                std::span<const double> per_step_thresholds, double gamma);

} // namespace ocecrl
