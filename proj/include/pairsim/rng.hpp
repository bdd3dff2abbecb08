#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pairsim {

// Sentinel for "no further event in any realistic index range".
inline constexpr std::uint64_t kNeverIndex = 1ull << 62;

// splitmix64 step: advances the state and returns a mixed 64-bit value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Seed for the independent RNG stream of one simulation block.  Two rounds of
// splitmix64 over (master_seed, block_index) decorrelate neighbouring blocks,
// so blocks can be processed in any order (and in parallel) while the total
// stream of random numbers consumed per block stays fixed.
inline std::uint64_t block_stream_seed(std::uint64_t master_seed, std::uint64_t block_index) {
    std::uint64_t s = master_seed + 0x9E3779B97F4A7C15ull * (block_index + 1);
    (void)splitmix64(s);
    return splitmix64(s);
}

// Deterministic random stream.  All samplers are built on top of the raw
// 64-bit output of std::mt19937_64 (whose sequence is fixed by the standard)
// using explicit inversion/transform formulas, so a given seed produces the
// same draws on every platform and build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform double in [0, 1) with 2^-53 granularity.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (uses two uniforms per call).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1)); // log(1-u1) <= 0
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Exponential inter-arrival time for a Poisson process of `rate` (1/s).
    double exponential(double rate) {
        return -std::log1p(-uniform()) / rate;
    }

    // Number of failures before the next success in a Bernoulli(p) sequence.
    // Returns kNeverIndex when p <= 0 or when the skip is astronomically far.
    std::uint64_t geometric_skip(double p) {
        if (p >= 1.0) return 0;
        if (p <= 0.0) return kNeverIndex;
        const double u = uniform();
        const double g = std::floor(std::log1p(-u) / std::log1p(-p));
        if (!(g >= 0.0)) return 0;
        if (g >= 4.0e18) return kNeverIndex;
        return static_cast<std::uint64_t>(g);
    }

    // Poisson count by the multiplicative product method; exact and cheap for
    // the small means used here (events per detector per block).  Large means
    // are split using Poisson additivity.
    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 32.0) {
            total += poisson_small(32.0);
            mean -= 32.0;
        }
        return total + poisson_small(mean);
    }

private:
    std::uint64_t poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::mt19937_64 gen_;
};

} // namespace pairsim
