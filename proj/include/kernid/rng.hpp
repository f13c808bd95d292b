#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kernid {

// Reproducibility contract (documented in the README):
//   * engine: std::mt19937_64, whose output sequence is fully specified by the
//     C++ standard for a given 64-bit seed;
//   * uniforms: 53-bit mantissa doubles, u = (x >> 11) * 2^-53, in [0, 1);
//   * normals: Box-Muller on consecutive uniform pairs, cosine variate first;
//   * derived seeds: splitmix64 absorption of the stream keys.
// Distribution helpers from <random> are avoided because their mappings are
// implementation-defined.

/// One splitmix64 step; advances `state` and returns the next value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and up to two keys.
/// derive_seed(master, a, b): absorb each key with one splitmix64 step.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key_a, std::uint64_t key_b = 0) {
    std::uint64_t state = master;
    state ^= splitmix64(state) + key_a;
    state ^= splitmix64(state) + key_b;
    return splitmix64(state);
}

/// Deterministic random stream with the documented uniform and normal maps.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; generates pairs and caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - u keeps the argument of log strictly positive.
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace kernid
