#include "ocecrl/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ocecrl {

namespace {

constexpr double kWeightTol = 1e-12;

void check_beta(double beta) {
    require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1], got " + std::to_string(beta));
}

} // namespace

OceSpec OceSpec::cvar(double beta, Orientation orientation) {
    check_beta(beta);
    OceSpec s;
    s.kind_ = UtilityKind::cvar;
    s.orientation_ = orientation;
    s.beta_ = beta;
    return s;
}

OceSpec OceSpec::mean(Orientation orientation) {
    OceSpec s;
    s.kind_ = UtilityKind::mean;
    s.orientation_ = orientation;
    return s;
}

OceSpec OceSpec::piecewise_linear(PiecewiseLinearUtility utility, Orientation orientation) {
    require(!utility.points.empty(), "piecewise-linear utility needs at least one breakpoint");
    require(utility.points.size() == utility.slopes.size(),
            "piecewise-linear utility needs one slope per breakpoint");
    for (std::size_t j = 0; j + 1 < utility.points.size(); ++j)
        require(utility.points[j] < utility.points[j + 1],
                "piecewise-linear breakpoints must be strictly increasing");
    // Concave and nondecreasing: slopes nonincreasing and the last one >= 0
    // (the implicit terminal slope is 0).
    for (std::size_t j = 0; j + 1 < utility.slopes.size(); ++j)
        require(utility.slopes[j] >= utility.slopes[j + 1],
                "piecewise-linear utility must be concave (slopes nonincreasing)");
    require(utility.slopes.back() >= 0.0,
            "piecewise-linear utility must be nondecreasing (slopes >= 0)");
    for (double s : utility.slopes)
        require(std::isfinite(s), "piecewise-linear slopes must be finite");

    OceSpec s;
    s.kind_ = UtilityKind::piecewise_linear;
    s.orientation_ = orientation;
    s.utility_ = std::move(utility);

    // Anchor g(0) = 0 and integrate slopes to every knot.
    const auto& p = s.utility_.points;
    const auto& m = s.utility_.slopes;
    const std::size_t k = p.size();
    s.knot_values_.assign(k, 0.0);
    // segment index of u: slopes[j] on (p[j-1], p[j]], 0 beyond p[k-1]
    auto segment_slope = [&](std::size_t seg) { return seg < k ? m[seg] : 0.0; };
    // locate the segment containing 0
    std::size_t seg0 = 0;
    while (seg0 < k && p[seg0] < 0.0) ++seg0;
    // g(p[j]) for j >= seg0: integrate right from 0
    double acc = 0.0;
    double x = 0.0;
    for (std::size_t j = seg0; j < k; ++j) {
        acc += segment_slope(j) * (p[j] - x);
        x = p[j];
        s.knot_values_[j] = acc;
    }
    // g(p[j]) for j < seg0: integrate left from 0
    acc = 0.0;
    x = 0.0;
    for (std::size_t j = seg0; j-- > 0;) {
        acc -= segment_slope(j + 1) * (x - p[j]);
        x = p[j];
        s.knot_values_[j] = acc;
    }
    return s;
}

double OceSpec::utility_value(double u) const {
    switch (kind_) {
    case UtilityKind::cvar:
        return u < 0.0 ? u / beta_ : 0.0; // -(1/beta)(-u)_+
    case UtilityKind::mean:
        return u;
    case UtilityKind::piecewise_linear: {
        const auto& p = utility_.points;
        const auto& m = utility_.slopes;
        const std::size_t k = p.size();
        std::size_t seg = std::lower_bound(p.begin(), p.end(), u) - p.begin();
        if (seg < k) {
            // u <= p[seg], slope m[seg] on its segment
            return knot_values_[seg] - m[seg] * (p[seg] - u);
        }
        return knot_values_[k - 1]; // slope 0 beyond the last knot
    }
    }
    return 0.0;
}

double OceSpec::leftmost_slope() const {
    switch (kind_) {
    case UtilityKind::cvar:
        return 1.0 / beta_;
    case UtilityKind::mean:
        return 1.0;
    case UtilityKind::piecewise_linear:
        return utility_.slopes.front();
    }
    return 0.0;
}

void validate_weights(std::span<const WeightedSample> samples) {
    if (samples.empty()) throw std::domain_error("empty sample set");
    // compensated summation: the gate must not drown in its own rounding
    double total = 0.0, carry = 0.0;
    for (const auto& s : samples) {
        require(s.weight >= 0.0, "sample weights must be nonnegative");
        require(std::isfinite(s.value) && std::isfinite(s.weight),
                "samples must be finite");
        const double y = s.weight - carry;
        const double t = total + y;
        carry = (t - total) - y;
        total = t;
    }
    require(std::abs(total - 1.0) <= kWeightTol,
            "sample weights must sum to 1 within 1e-12, got " + std::to_string(total));
}

std::vector<WeightedSample> uniform_samples(std::span<const double> values) {
    if (values.empty()) throw std::domain_error("empty sample set");
    std::vector<WeightedSample> out(values.size());
    const double w = 1.0 / static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = {values[i], w};
    return out;
}

namespace {

// Reward-side convolution objective on sign-adjusted values.
double convolution_at(const OceSpec& spec, std::span<const WeightedSample> samples,
                      double sign, double t) {
    if (spec.kind() == UtilityKind::cvar) {
        const double inv_beta = 1.0 / spec.beta();
        double acc = 0.0;
        for (const auto& s : samples) {
            const double gap = t - sign * s.value;
            if (gap > 0.0) acc += s.weight * gap;
        }
        return t - inv_beta * acc;
    }
    double acc = 0.0;
    for (const auto& s : samples) acc += s.weight * spec.utility_value(sign * s.value - t);
    return t + acc;
}

// Closed form for CVaR/reward: lower beta-quantile and worst-beta-mass mean.
RiskValue cvar_reward_closed_form(double beta, std::span<const WeightedSample> samples,
                                  double sign) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sign * samples[a].value < sign * samples[b].value;
    });
    const double target = beta - 1e-12 * std::max(1.0, beta);
    double mass = 0.0, acc = 0.0, quantile = sign * samples[order.back()].value;
    for (std::size_t idx : order) {
        const double z = sign * samples[idx].value;
        const double w = samples[idx].weight;
        if (mass + w >= target) {
            acc += (beta - mass) * z;
            quantile = z;
            mass = beta;
            break;
        }
        acc += w * z;
        mass += w;
    }
    return {acc / beta, quantile, true};
}

RiskValue optimize_reward_side(const OceSpec& spec, std::span<const WeightedSample> samples,
                               double sign) {
    if (spec.kind() == UtilityKind::cvar) return cvar_reward_closed_form(spec.beta(), samples, sign);

    if (spec.kind() == UtilityKind::mean) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s.weight * sign * s.value;
        return {mean, mean, true};
    }

    // Piecewise-linear utility: the objective in t is piecewise-linear and
    // concave, so the supremum sits on a kink: t = z_k or t = z_k - p_j.
    if (spec.leftmost_slope() < 1.0) {
        // h'(t) -> 1 - leftmost_slope > 0 as t -> +inf: sup is not attained.
        return {std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), false};
    }
    double zmin = std::numeric_limits<double>::infinity();
    double zmax = -std::numeric_limits<double>::infinity();
    std::vector<double> candidates;
    candidates.reserve(samples.size() * (1 + spec.utility().points.size()));
    for (const auto& s : samples) {
        const double z = sign * s.value;
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
        candidates.push_back(z);
        for (double p : spec.utility().points) candidates.push_back(z - p);
    }
    std::sort(candidates.begin(), candidates.end());
    double best_value = -std::numeric_limits<double>::infinity();
    double best_t = candidates.front();
    bool best_in_range = false;
    for (double t : candidates) {
        const double v = convolution_at(spec, samples, sign, t);
        const bool in_range = t >= zmin && t <= zmax;
        const double tol = 1e-12 * std::max(1.0, std::abs(best_value));
        if (v > best_value + tol || (std::abs(v - best_value) <= tol && in_range && !best_in_range)) {
            best_value = v;
            best_t = t;
            best_in_range = in_range;
        }
    }
    return {best_value, best_t, true};
}

} // namespace

double oce_value(const OceSpec& spec, std::span<const WeightedSample> samples, double t) {
    validate_weights(samples);
    if (spec.orientation() == Orientation::reward) return convolution_at(spec, samples, 1.0, t);
    return -convolution_at(spec, samples, -1.0, -t);
}

RiskValue oce_optimize_t(const OceSpec& spec, std::span<const WeightedSample> samples) {
    validate_weights(samples);
    if (spec.orientation() == Orientation::reward) return optimize_reward_side(spec, samples, 1.0);
    RiskValue reflected = optimize_reward_side(spec, samples, -1.0);
    return {-reflected.value, -reflected.optimizer_t, reflected.attained};
}

double transformed_reward(double r, double t, double beta) {
    check_beta(beta);
    if (beta == 1.0) return std::min(t, r);
    const double gap = t - r;
    return gap > 0.0 ? t - gap / beta : t;
}

double transformed_reward_subgrad_t(double r, double t, double beta) {
    check_beta(beta);
    return t >= r ? 1.0 - 1.0 / beta : 1.0;
}

double lipschitz_constant(double gamma, std::span<const double> betas,
                          std::span<const double> lambda) {
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    require(!betas.empty(), "betas must include the objective entry");
    require(lambda.size() + 1 == betas.size(),
            "lambda must have one entry per constraint beta");
    for (double b : betas) check_beta(b);
    double acc = (1.0 + 1.0 / betas[0]) * (1.0 + 1.0 / betas[0]);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        require(lambda[i] >= 0.0, "lambda entries must be nonnegative");
        const double term = lambda[i] * (1.0 + 1.0 / betas[i + 1]);
        acc += term * term;
    }
    return std::sqrt(acc) / (1.0 - gamma);
}

} // namespace ocecrl
