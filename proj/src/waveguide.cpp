#include "pairsim/waveguide.hpp"

#include <cmath>
#include <stdexcept>

#include "pairsim/errors.hpp"
#include "pairsim/quadrature.hpp"

namespace pairsim {

void WaveguideModel::validate() const {
    auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(length)) throw std::invalid_argument("waveguide: length must be > 0");
    if (!positive(a_eff)) throw std::invalid_argument("waveguide: a_eff must be > 0");
    if (!positive(pulse_width)) throw std::invalid_argument("waveguide: pulse_width must be > 0");
    if (!positive(rep_rate)) throw std::invalid_argument("waveguide: rep_rate must be > 0");
    if (!positive(pump_wavelength)) throw std::invalid_argument("waveguide: pump_wavelength must be > 0");
    if (!nonneg(alpha_pump) || !nonneg(alpha_idler) || !nonneg(alpha_signal)) {
        throw std::invalid_argument("waveguide: linear losses must be >= 0");
    }
    if (!nonneg(beta_tpa) || !nonneg(gamma_xtpa_idler) || !nonneg(gamma_xtpa_signal) ||
        !nonneg(sigma_fca) || !nonneg(carrier_factor)) {
        throw std::invalid_argument("waveguide: nonlinear coefficients must be >= 0");
    }
    if (!nonneg(pump_split[0]) || !nonneg(pump_split[1]) ||
        std::abs(pump_split[0] + pump_split[1] - 1.0) > 1e-9) {
        throw std::invalid_argument("waveguide: pump_split fractions must be >= 0 and sum to 1");
    }
}

double WaveguideModel::carrier_density(double power) const {
    // Carriers created by pump TPA during one pulse, held quasi-static:
    // N_c = beta / (2 hbar*omega a_eff^2) P^2 tau, times a tunable scale.
    const double photon_energy = kPlanck * kLightSpeed / pump_wavelength; // J
    return carrier_factor * beta_tpa / (2.0 * photon_energy * a_eff * a_eff) * power * power *
           pulse_width;
}

namespace {

double pump_loss_rate(const WaveguideModel& wg, double p) {
    return wg.alpha_pump + wg.beta_tpa / wg.a_eff * p + wg.sigma_fca * wg.carrier_density(p);
}

double channel_loss_rate(const WaveguideModel& wg, GeneratedChannel ch, double p) {
    const double alpha = ch == GeneratedChannel::idler ? wg.alpha_idler : wg.alpha_signal;
    const double gamma = ch == GeneratedChannel::idler ? wg.gamma_xtpa_idler : wg.gamma_xtpa_signal;
    return alpha + 2.0 * gamma / wg.a_eff * p + wg.sigma_fca * wg.carrier_density(p);
}

} // namespace

PowerProfile propagate_pump(const WaveguideModel& wg, double input_power, int grid_points) {
    wg.validate();
    if (!(input_power >= 0.0) || !std::isfinite(input_power)) {
        throw std::invalid_argument("propagate_pump: input power must be >= 0 and finite");
    }
    if (grid_points < 2) throw std::invalid_argument("propagate_pump: need at least 2 grid points");

    const std::size_t n = static_cast<std::size_t>(grid_points);
    const double h = wg.length / static_cast<double>(n - 1);
    auto rhs = [&wg](double p) { return -pump_loss_rate(wg, p) * p; };

    PowerProfile out;
    out.input_power = input_power;
    out.z.resize(n);
    out.power.resize(n);
    double p = input_power;
    for (std::size_t i = 0; i < n; ++i) {
        out.z[i] = wg.length * static_cast<double>(i) / static_cast<double>(n - 1);
        out.power[i] = p;
        if (i + 1 == n) break;
        const double k1 = rhs(p);
        const double k2 = rhs(p + 0.5 * h * k1);
        const double k3 = rhs(p + 0.5 * h * k2);
        const double k4 = rhs(p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(p) || p < 0.0) {
            throw NumericalError("propagate_pump: pump power became non-finite or negative");
        }
    }
    return out;
}

double effective_pump_power(const PowerProfile& profile) {
    if (profile.power.size() < 2) {
        throw std::invalid_argument("effective_pump_power: profile needs >= 2 samples");
    }
    std::vector<double> p2(profile.power.size());
    for (std::size_t i = 0; i < p2.size(); ++i) p2[i] = profile.power[i] * profile.power[i];
    return std::sqrt(average_uniform(p2));
}

std::vector<double> survival_curve(const WaveguideModel& wg, GeneratedChannel ch,
                                   const PowerProfile& profile) {
    if (profile.power.size() < 2) {
        throw std::invalid_argument("survival_curve: profile needs >= 2 samples");
    }
    const std::size_t n = profile.power.size();
    std::vector<double> rate(n);
    for (std::size_t i = 0; i < n; ++i) rate[i] = channel_loss_rate(wg, ch, profile.power[i]);
    // Lambda(z) = int_0^z rate dz'; survival from z is exp(-(Lambda(L)-Lambda(z))).
    const std::vector<double> lambda = cumulative_trapezoid(rate, profile.step());
    std::vector<double> eta(n);
    const double total = lambda.back();
    for (std::size_t i = 0; i < n; ++i) eta[i] = std::exp(-(total - lambda[i]));
    return eta;
}

double photon_survival(const WaveguideModel& wg, GeneratedChannel ch, double z,
                       const PowerProfile& profile) {
    if (!(z >= 0.0) || z > wg.length * (1.0 + 1e-12)) {
        throw std::invalid_argument("photon_survival: creation point outside the waveguide");
    }
    const std::vector<double> eta = survival_curve(wg, ch, profile);
    const double h = profile.step();
    const double x = std::min(z / h, static_cast<double>(eta.size() - 1));
    const std::size_t i = static_cast<std::size_t>(x) >= eta.size() - 1
                              ? eta.size() - 2
                              : static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(i);
    // linear interpolation between grid samples
    return eta[i] + frac * (eta[i + 1] - eta[i]);
}

double average_on_chip_efficiency(const WaveguideModel& wg, GeneratedChannel ch,
                                  const PowerProfile& profile) {
    return average_uniform(survival_curve(wg, ch, profile));
}

} // namespace pairsim
