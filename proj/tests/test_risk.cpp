#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ocecrl/risk.hpp"

using namespace ocecrl;

namespace {

std::vector<WeightedSample> uniform(std::initializer_list<double> values) {
    std::vector<double> v(values);
    return uniform_samples(v);
}

// Test-side oracle: sort, then average the lowest beta mass.
double sorted_tail_mean(std::vector<WeightedSample> samples, double beta) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const WeightedSample& a, const WeightedSample& b) {
                         return a.value < b.value;
                     });
    double mass = 0.0, acc = 0.0;
    for (const auto& s : samples) {
        const double take = std::min(s.weight, beta - mass);
        acc += take * s.value;
        mass += take;
        if (mass >= beta - 1e-15) break;
    }
    return acc / beta;
}

std::vector<WeightedSample> random_weighted(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_dist(1, 24);
    std::uniform_real_distribution<double> v_dist(-8.0, 8.0);
    std::exponential_distribution<double> w_dist(1.0);
    const int n = n_dist(rng);
    std::vector<WeightedSample> out(n);
    double total = 0.0;
    for (auto& s : out) {
        s.value = v_dist(rng);
        s.weight = w_dist(rng) + 1e-3;
        total += s.weight;
    }
    double acc = 0.0;
    for (auto& s : out) {
        s.weight /= total;
        acc += s.weight;
    }
    out.back().weight += 1.0 - acc;
    return out;
}

} // namespace

TEST_CASE("convolution objective at fixed t") {
    const auto z = uniform({1, 2, 3, 4});
    // hand expansion: 2 - 2*(0.25*1 + 0.25*0) = 1.5
    CHECK(oce_value(OceSpec::cvar(0.5), z, 2.0) == doctest::Approx(1.5).epsilon(1e-12));
    // beta = 1 at t = max telescopes to the mean
    CHECK(oce_value(OceSpec::cvar(1.0), z, 4.0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(oce_value(OceSpec::mean(), uniform({5}), 0.0) == doctest::Approx(5.0));

    CHECK_THROWS_AS(oce_value(OceSpec::cvar(0.5), {}, 0.0), std::domain_error);
    std::vector<WeightedSample> bad = {{1.0, 0.6}, {2.0, 0.6}};
    CHECK_THROWS_AS(oce_value(OceSpec::cvar(0.5), bad, 0.0), validation_error);
}

TEST_CASE("closed-form optimizer on the plateau example") {
    const auto z = uniform({1, 2, 3, 4});
    const RiskValue rv = oce_optimize_t(OceSpec::cvar(0.5), z);
    CHECK(rv.value == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(rv.optimizer_t == doctest::Approx(2.0));
    CHECK(rv.attained);

    // brute-force grid over t in [1, 4] confirms the plateau maximum
    double best = -1e300;
    for (double t = 1.0; t <= 4.0 + 1e-9; t += 1e-4)
        best = std::max(best, oce_value(OceSpec::cvar(0.5), z, t));
    CHECK(rv.value == doctest::Approx(best).epsilon(1e-8));

    CHECK(oce_optimize_t(OceSpec::cvar(1.0), z).value == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(oce_optimize_t(OceSpec::cvar(1e-6), z).value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("optimizer stays in the sample range and dominates the objective") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> beta_dist(0.02, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto z = random_weighted(rng);
        const double beta = beta_dist(rng);
        const RiskValue rv = oce_optimize_t(OceSpec::cvar(beta), z);
        const double oracle = sorted_tail_mean(z, beta);
        REQUIRE(std::abs(rv.value - oracle) <= 1e-9);
        REQUIRE(rv.attained);
        double lo = 1e300, hi = -1e300;
        for (const auto& s : z) {
            lo = std::min(lo, s.value);
            hi = std::max(hi, s.value);
        }
        REQUIRE(rv.optimizer_t >= lo - 1e-12);
        REQUIRE(rv.optimizer_t <= hi + 1e-12);
        if (trial % 25 == 0) {
            for (int k = 0; k < 100; ++k) {
                const double t = lo - 1.0 + (hi - lo + 2.0) * k / 99.0;
                REQUIRE(oce_value(OceSpec::cvar(beta), z, t) <= rv.value + 1e-9);
            }
        }
    }
}

TEST_CASE("translation equivariance") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> beta_dist(0.02, 1.0);
    std::uniform_real_distribution<double> c_dist(-5.0, 5.0);
    for (int trial = 0; trial < 300; ++trial) {
        auto z = random_weighted(rng);
        const double beta = beta_dist(rng);
        const double base = oce_optimize_t(OceSpec::cvar(beta), z).value;
        const double c = c_dist(rng);
        for (auto& s : z) s.value += c;
        CHECK(oce_optimize_t(OceSpec::cvar(beta), z).value ==
              doctest::Approx(base + c).epsilon(1e-9));
    }
}

TEST_CASE("loss orientation is the reflected problem") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto z = random_weighted(rng);
        std::vector<WeightedSample> neg = z;
        for (auto& s : neg) s.value = -s.value;
        const double beta = 0.25;
        const RiskValue reward_side = oce_optimize_t(OceSpec::cvar(beta, Orientation::reward), z);
        const RiskValue loss_side = oce_optimize_t(OceSpec::cvar(beta, Orientation::loss), neg);
        CHECK(loss_side.value == doctest::Approx(-reward_side.value).epsilon(1e-12));
        CHECK(loss_side.optimizer_t == doctest::Approx(-reward_side.optimizer_t).epsilon(1e-12));
    }
    // loss-side value at fixed t matches the infimal-convolution integrand
    const auto z = uniform({1, 2, 3, 4});
    // t + (1/beta) E[(z - t)_+] with beta 0.5, t 2: 2 + 2*(0.25*1 + 0.25*2) = 3.5
    CHECK(oce_value(OceSpec::cvar(0.5, Orientation::loss), z, 2.0) ==
          doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("small-beta limit approaches the essential infimum") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        // weights bounded below so the smallest atom carries the whole tail
        std::uniform_int_distribution<int> n_dist(2, 16);
        const int n = n_dist(rng);
        std::vector<WeightedSample> z(n);
        std::uniform_real_distribution<double> v_dist(-3.0, 3.0);
        double total = 0.0;
        for (auto& s : z) {
            s.value = v_dist(rng);
            s.weight = 0.7 / n + std::uniform_real_distribution<double>(0.0, 0.3)(rng);
            total += s.weight;
        }
        double acc = 0.0;
        for (auto& s : z) {
            s.weight /= total;
            acc += s.weight;
        }
        z.back().weight += 1.0 - acc;
        double lo = 1e300, hi = -1e300;
        for (const auto& s : z) {
            lo = std::min(lo, s.value);
            hi = std::max(hi, s.value);
        }
        for (double beta : {1e-2, 1e-3, 1e-4}) {
            const double value = oce_optimize_t(OceSpec::cvar(beta), z).value;
            CHECK(std::abs(value - lo) <= beta * (hi - lo) + 1e-8);
        }
    }
}

TEST_CASE("piecewise-linear utility reproduces the cvar closed form") {
    std::mt19937_64 rng(11);
    for (double beta : {0.2, 0.5, 1.0}) {
        const OceSpec pl = OceSpec::piecewise_linear({{0.0}, {1.0 / beta}});
        const OceSpec cv = OceSpec::cvar(beta);
        for (int trial = 0; trial < 100; ++trial) {
            const auto z = random_weighted(rng);
            CHECK(oce_optimize_t(pl, z).value ==
                  doctest::Approx(oce_optimize_t(cv, z).value).epsilon(1e-9));
            CHECK(oce_value(pl, z, 0.3) == doctest::Approx(oce_value(cv, z, 0.3)).epsilon(1e-12));
        }
    }
}

TEST_CASE("piecewise-linear admissibility checks") {
    CHECK_THROWS_AS(OceSpec::piecewise_linear({{0.0, 1.0}, {1.0, 2.0}}), validation_error);
    CHECK_THROWS_AS(OceSpec::piecewise_linear({{1.0, 0.0}, {1.0, 0.5}}), validation_error);
    CHECK_THROWS_AS(OceSpec::piecewise_linear({{0.0}, {-0.5}}), validation_error);
    CHECK_NOTHROW(OceSpec::piecewise_linear({{-1.0, 0.0}, {3.0, 2.0}}));
    // slope below 1 on the left end: the supremum runs away
    const auto z = uniform({1, 2, 3});
    const RiskValue rv = oce_optimize_t(OceSpec::piecewise_linear({{0.0}, {0.5}}), z);
    CHECK_FALSE(rv.attained);
    CHECK(std::isinf(rv.value));
}

TEST_CASE("cvar reward transform") {
    CHECK(transformed_reward(5.0, 0.0, 0.3) == doctest::Approx(0.0));
    CHECK(transformed_reward(0.0, 1.0, 0.5) == doctest::Approx(-1.0));
    CHECK(transformed_reward(3.0, 7.0, 1.0) == doctest::Approx(3.0));
    // beta = 1 returns min(t, r) with the exact input bits
    const double big = 1e16, small = 1.0;
    CHECK(transformed_reward(small, big, 1.0) == small);
    CHECK_THROWS_AS(transformed_reward(1.0, 0.0, 0.0), validation_error);
    CHECK_THROWS_AS(transformed_reward(1.0, 0.0, 1.5), validation_error);
}

TEST_CASE("transform subgradient in t") {
    CHECK(transformed_reward_subgrad_t(5.0, 0.0, 0.3) == doctest::Approx(1.0));
    CHECK(transformed_reward_subgrad_t(0.0, 1.0, 0.5) == doctest::Approx(-1.0));
    // tie convention: the indicator fires at t = r
    CHECK(transformed_reward_subgrad_t(2.0, 2.0, 0.5) == doctest::Approx(-1.0));

    // central finite difference away from the kink
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double r = u(rng), t = u(rng), beta = 0.1 + 0.9 * std::abs(u(rng)) / 4.0;
        if (std::abs(t - r) <= 1e-3) continue;
        const double h = 1e-5;
        const double fd =
            (transformed_reward(r, t + h, beta) - transformed_reward(r, t - h, beta)) / (2 * h);
        CHECK(transformed_reward_subgrad_t(r, t, beta) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("shaping lipschitz scale") {
    std::vector<double> betas0 = {1.0};
    CHECK(lipschitz_constant(0.5, betas0, {}) == doctest::Approx(4.0));

    std::vector<double> betas1 = {0.3, 0.3};
    std::vector<double> lam0 = {0.0};
    CHECK(lipschitz_constant(0.99, betas1, lam0) ==
          doctest::Approx(100.0 * (1.0 + 1.0 / 0.3)).epsilon(1e-9));

    // zero multipliers drop the constraint terms
    std::vector<double> betas2 = {1.0, 0.2, 0.7};
    std::vector<double> lam2 = {0.0, 0.0};
    CHECK(lipschitz_constant(0.5, betas2, lam2) == doctest::Approx(4.0));

    // monotone in each multiplier
    std::vector<double> lam_small = {0.5, 0.1};
    std::vector<double> lam_big = {0.5, 0.4};
    CHECK(lipschitz_constant(0.5, betas2, lam_big) >= lipschitz_constant(0.5, betas2, lam_small));

    CHECK_THROWS_AS(lipschitz_constant(1.0, betas0, {}), validation_error);
    std::vector<double> neg = {-0.1};
    CHECK_THROWS_AS(lipschitz_constant(0.5, betas1, neg), validation_error);
}
