#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace kgqa {

/// Deterministic sub-stream derived from a master seed and a stream name
/// ("data", "init", "shuffle", ...). Streams with different names are
/// independent, so reseeding one component never perturbs another.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform double in [0,1) built directly from the engine bits; unlike
/// std::uniform_real_distribution its output does not depend on the stdlib.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Box-Muller standard normal.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Normal truncated at two standard deviations (resampling).
inline double truncated_normal(std::mt19937_64& rng, double stddev) {
    double z = standard_normal(rng);
    while (std::abs(z) > 2.0) z = standard_normal(rng);
    return z * stddev;
}

/// Fisher-Yates with the engine-only index helper above.
template <typename Range>
void deterministic_shuffle(Range& r, std::mt19937_64& rng) {
    const std::size_t n = r.size();
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        std::swap(r[i - 1], r[j]);
    }
}

}  // namespace kgqa
