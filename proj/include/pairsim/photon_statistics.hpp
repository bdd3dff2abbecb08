#pragma once

#include <cstdint>
#include <string>

#include "pairsim/rng.hpp"

namespace pairsim {

// Photon-number statistics of the pair source.  A single spectral mode gives
// thermal statistics; many multiplexed modes tend to poissonian.
enum class PairStatistics { poisson, thermal };

PairStatistics pair_statistics_from_string(const std::string& name);
const char* to_string(PairStatistics s);

// Per-pulse photon-pair number distribution wp(n) with mean mu.
class PhotonNumberDistribution {
public:
    PhotonNumberDistribution(PairStatistics kind, double mu);

    PairStatistics kind() const { return kind_; }
    double mu() const { return mu_; }

    // Probability of exactly n pairs in one pulse.
    double pmf(std::int64_t n) const;

    // Factorial moment E[n(n-1)...(n-order+1)], order in {1, 2, 3}.
    double factorial_moment(int order) const;

    // P(n = 0); 1 - vacuum_probability() is the per-pulse emission probability.
    double vacuum_probability() const;

    // Draw a pair number for one pulse.
    std::uint64_t sample(Rng& rng) const;

    // Draw from the conditional law n | n >= 1 (used by the event-skip
    // simulation kernel, which visits only pulses that emit).
    std::uint64_t sample_given_at_least_one(Rng& rng) const;

private:
    PairStatistics kind_;
    double mu_;
};

} // namespace pairsim
