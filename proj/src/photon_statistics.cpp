#include "pairsim/photon_statistics.hpp"

#include <cmath>
#include <stdexcept>

namespace pairsim {

PairStatistics pair_statistics_from_string(const std::string& name) {
    if (name == "poisson") return PairStatistics::poisson;
    if (name == "thermal") return PairStatistics::thermal;
    throw std::invalid_argument("unknown pair statistics '" + name +
                                "' (expected 'poisson' or 'thermal')");
}

const char* to_string(PairStatistics s) {
    return s == PairStatistics::poisson ? "poisson" : "thermal";
}

PhotonNumberDistribution::PhotonNumberDistribution(PairStatistics kind, double mu)
    : kind_(kind), mu_(mu) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("photon number distribution requires mu >= 0 and finite");
    }
}

double PhotonNumberDistribution::pmf(std::int64_t n) const {
    if (n < 0) throw std::invalid_argument("pmf: n must be >= 0");
    if (mu_ == 0.0) return n == 0 ? 1.0 : 0.0;
    const double x = static_cast<double>(n);
    if (kind_ == PairStatistics::poisson) {
        // exp-log form stays finite far into the tail
        return std::exp(x * std::log(mu_) - mu_ - std::lgamma(x + 1.0));
    }
    // thermal: wp(n) = mu^n / (1 + mu)^(n+1)
    return std::exp(x * (std::log(mu_) - std::log1p(mu_)) - std::log1p(mu_));
}

double PhotonNumberDistribution::factorial_moment(int order) const {
    if (order < 1 || order > 3) {
        throw std::invalid_argument("factorial_moment: order must be 1, 2 or 3");
    }
    const double muk = std::pow(mu_, order);
    if (kind_ == PairStatistics::poisson) return muk;
    // thermal: E[n(n-1)...(n-k+1)] = k! mu^k
    static constexpr double kFactorial[4] = {1.0, 1.0, 2.0, 6.0};
    return kFactorial[order] * muk;
}

double PhotonNumberDistribution::vacuum_probability() const {
    if (kind_ == PairStatistics::poisson) return std::exp(-mu_);
    return 1.0 / (1.0 + mu_);
}

std::uint64_t PhotonNumberDistribution::sample(Rng& rng) const {
    if (mu_ == 0.0) return 0;
    if (kind_ == PairStatistics::thermal) {
        // Geometric inversion: P(n = k) = (1-q) q^k with q = mu/(1+mu).
        const double log_q = std::log(mu_) - std::log1p(mu_);
        const double g = std::floor(std::log1p(-rng.uniform()) / log_q);
        if (!(g >= 0.0)) return 0;
        return static_cast<std::uint64_t>(g);
    }
    return rng.poisson(mu_);
}

std::uint64_t PhotonNumberDistribution::sample_given_at_least_one(Rng& rng) const {
    if (mu_ == 0.0) {
        throw std::invalid_argument("sample_given_at_least_one: mu = 0 has no emitting pulses");
    }
    if (kind_ == PairStatistics::thermal) {
        // Conditional law is geometric shifted by one: P(n=k | n>=1) = (1-q) q^(k-1).
        const double log_q = std::log(mu_) - std::log1p(mu_);
        const double g = std::floor(std::log1p(-rng.uniform()) / log_q);
        if (!(g >= 0.0)) return 1;
        return 1 + static_cast<std::uint64_t>(g);
    }
    // Poisson conditioned on n >= 1 by sequential inversion over the
    // renormalized tail.  -expm1(-mu) = 1 - exp(-mu) is accurate at small mu.
    const double tail = -std::expm1(-mu_);
    double u = rng.uniform() * tail;
    double term = mu_ * std::exp(-mu_); // wp(1)
    std::uint64_t n = 1;
    while (u > term && n < 10000) {
        u -= term;
        ++n;
        term *= mu_ / static_cast<double>(n);
    }
    return n;
}

} // namespace pairsim
