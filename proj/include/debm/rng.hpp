#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace debm {

// All stochastic code in the library draws from this wrapper instead of the
// std distributions: the mt19937_64 engine is fully specified by the
// standard, but std::normal_distribution and friends are not, so sampling
// through them would not reproduce bit-identically across standard library
// implementations.

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Derives an independent stream seed from a base seed, a component tag and
/// up to three indices. Every random consumer in the pipeline (simulation
/// subject, bootstrap replicate, experiment cell) gets its own derived seed,
/// so results do not depend on execution order or worker count.
inline uint64_t derive_seed(uint64_t base, std::string_view component,
                            uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t state = base;
    (void)detail::splitmix64(state);
    state ^= detail::fnv1a64(component);
    (void)detail::splitmix64(state);
    state ^= a * 0x9e3779b97f4a7c15ULL + 0x0123456789abcdefULL;
    (void)detail::splitmix64(state);
    state ^= b * 0xc2b2ae3d27d4eb4fULL + 0xfedcba9876543210ULL;
    (void)detail::splitmix64(state);
    state ^= c * 0x165667b19e3779f9ULL + 1;
    return detail::splitmix64(state);
}

/// Deterministic random stream: mt19937_64 engine with hand-rolled
/// uniform / normal / bounded-integer sampling.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller. No caching: each call consumes
    /// exactly two engine draws, which keeps call sites order-independent.
    double normal() {
        double u1 = 1.0 - uniform01(); // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    /// Uniform integer in [0, n) by rejection (unbiased).
    uint64_t uniform_index(uint64_t n) {
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace debm
