#pragma once

#include <span>
#include <vector>

#include "ocecrl/common.hpp"

namespace ocecrl {

enum class Orientation { reward, loss };

// Concave nondecreasing piecewise-linear utility with g(0) = 0.
// slopes[j] applies on the segment (points[j-1], points[j]] (points strictly
// increasing, points[-1] = -inf); the slope right of the last point is 0.
// CVaR at level beta corresponds to points = {0}, slopes = {1/beta}.
struct PiecewiseLinearUtility {
    std::vector<double> points;
    std::vector<double> slopes;
};

enum class UtilityKind { cvar, mean, piecewise_linear };

class OceSpec {
  public:
    static OceSpec cvar(double beta, Orientation orientation = Orientation::reward);
    static OceSpec mean(Orientation orientation = Orientation::reward);
    static OceSpec piecewise_linear(PiecewiseLinearUtility utility,
                                    Orientation orientation = Orientation::reward);

    UtilityKind kind() const { return kind_; }
    Orientation orientation() const { return orientation_; }
    double beta() const { return beta_; }
    const PiecewiseLinearUtility& utility() const { return utility_; }

    // Utility value g(u) for the stored concave reward-side utility.
    double utility_value(double u) const;
    // Leftmost slope of g (as u -> -inf); decides whether sup_t is attained.
    double leftmost_slope() const;

  private:
    OceSpec() = default;
    UtilityKind kind_ = UtilityKind::cvar;
    Orientation orientation_ = Orientation::reward;
    double beta_ = 1.0;
    PiecewiseLinearUtility utility_;
    std::vector<double> knot_values_; // g at each point, anchored by g(0)=0
};

struct RiskValue {
    double value = 0.0;
    double optimizer_t = 0.0;
    bool attained = false;
};

struct WeightedSample {
    double value = 0.0;
    double weight = 0.0;
};

// Weights must be nonnegative and sum to 1 within 1e-12; throws otherwise.
void validate_weights(std::span<const WeightedSample> samples);

std::vector<WeightedSample> uniform_samples(std::span<const double> values);

// Convolution objective at a fixed t: t + sum_k w_k g(z_k - t) in the reward
// orientation; the loss orientation evaluates the reflected problem on -Z.
double oce_value(const OceSpec& spec, std::span<const WeightedSample> samples, double t);

// sup_t of oce_value (inf_t in the loss orientation) together with a
// maximizing t. For CVaR/reward the optimizer is the lower beta-quantile and
// the value is the mean of the worst beta-mass.
RiskValue oce_optimize_t(const OceSpec& spec, std::span<const WeightedSample> samples);

// CVaR reward transform r'(r, t) = t - (1/beta)(t - r)_+ ; equals min(t, r)
// exactly (same bits) when beta = 1.
double transformed_reward(double r, double t, double beta);

// Subgradient of t -> transformed_reward(r, t, beta); ties t = r take the
// indicator value 1.
double transformed_reward_subgrad_t(double r, double t, double beta);

// (1-gamma)^{-1} sqrt((1+1/beta_0)^2 + sum_i lambda_i^2 (1+1/beta_i)^2),
// with betas = (beta_0, beta_1, ..., beta_m) and lambda of length m.
double lipschitz_constant(double gamma, std::span<const double> betas,
                          std::span<const double> lambda);

} // namespace ocecrl
