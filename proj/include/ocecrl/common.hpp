#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ocecrl {

// Raised when an input violates a documented precondition or schema.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

inline double clip(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Key-derived seeding: sub-streams are a pure function of (master, stream, index),
// so the realized randomness does not depend on scheduling or call order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ (0xa0761d6478bd642full * (stream + 1))) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Named sub-stream keys for derive_seed.
namespace seeds {
constexpr std::uint64_t pg_rollout = 1;
constexpr std::uint64_t pg_shuffle = 2;
constexpr std::uint64_t bias_rollout = 3;
constexpr std::uint64_t driver_rollout = 4;
constexpr std::uint64_t driver_solver = 5;
constexpr std::uint64_t driver_pick = 6;
constexpr std::uint64_t eval_episode = 7;
} // namespace seeds

} // namespace ocecrl
