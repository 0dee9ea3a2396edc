#pragma once

// Seedable generator with a pinned algorithm so that every experiment is
// reproducible from a single master seed, independent of the standard
// library's distribution implementations.
//
//   * core generator: xoshiro256** (Blackman & Vigna), state seeded by splitmix64
//   * uniform doubles: top 53 bits scaled by 2^-53
//   * bounded integers: rejection sampling on a power-of-two mask
//   * normals: Box-Muller, both outputs used (second one cached)
//   * sub-streams: derive(purpose) = splitmix64(seed ^ fnv1a64(purpose))

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "wiretap/error.hpp"

namespace wiretap {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text, std::uint64_t hash = 0xCBF29CE484222325ULL) {
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }

    // Independent stream for a named purpose ("noise", "messages", "init", ...).
    Rng derive(std::string_view purpose) const {
        std::uint64_t sm = seed_ ^ fnv1a64(purpose);
        return Rng(splitmix64(sm));
    }

    Rng derive(std::string_view purpose, std::uint64_t index) const {
        std::uint64_t sm = seed_ ^ fnv1a64(purpose) ^ (index * 0xD1B54A32D192ED03ULL);
        return Rng(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw usage_error("Rng::below: bound must be positive");
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const std::uint64_t candidate = next_u64() & mask;
            if (candidate < bound) return candidate;
        }
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace wiretap
