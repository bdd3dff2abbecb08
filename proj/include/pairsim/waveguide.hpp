#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pairsim {

inline constexpr double kPlanck = 6.62607015e-34;    // J s
inline constexpr double kLightSpeed = 299792458.0;   // m/s

// On-chip propagation model: linear loss plus pump-induced two-photon
// absorption (TPA), cross-TPA on the generated photons, and free-carrier
// absorption (FCA) from carriers created by pump TPA.  Powers are peak powers
// inside the pulse; the quasi-static carrier density uses the pulse width.
struct WaveguideModel {
    double length = 0.015;              // m
    double alpha_pump = 0.0;            // 1/m linear pump loss
    double alpha_idler = 0.0;           // 1/m linear loss at the idler wavelength
    double alpha_signal = 0.0;          // 1/m linear loss at the signal wavelength
    double beta_tpa = 0.0;              // m/W pump degenerate TPA
    double gamma_xtpa_idler = 0.0;      // m/W cross-TPA pump+idler
    double gamma_xtpa_signal = 0.0;     // m/W cross-TPA pump+signal
    double sigma_fca = 0.0;             // m^2 free-carrier absorption cross-section
    double carrier_factor = 1.0;        // dimensionless scale on the carrier density
    double a_eff = 1.0e-12;             // m^2 effective mode area
    std::array<double, 2> pump_split = {0.5, 0.5}; // power fractions of the two pump lines
    double pulse_width = 40.0e-12;      // s
    double rep_rate = 80.0e6;           // 1/s
    double pump_wavelength = 1550.3e-9; // m (used for the TPA photon energy)

    void validate() const;

    // Quasi-static free-carrier density (1/m^3) generated by pump TPA at
    // local peak power `power` (W).
    double carrier_density(double power) const;
};

// Pump peak power along the waveguide on a uniform grid.
struct PowerProfile {
    std::vector<double> z;     // m, uniform grid from 0 to length
    std::vector<double> power; // W at each grid point
    double input_power = 0.0;  // W at z = 0

    double step() const { return z.size() > 1 ? z[1] - z[0] : 0.0; }
};

enum class GeneratedChannel { idler, signal };

// Integrate dP/dz = -(alpha_p + beta_tpa/a_eff P + sigma_fca N_c(P)) P with a
// classical fixed-step RK4 on `grid_points` points.
PowerProfile propagate_pump(const WaveguideModel& wg, double input_power, int grid_points = 2048);

// Effective quadratic-mean pump power: sqrt( (1/L) int_0^L P(z)^2 dz ).
double effective_pump_power(const PowerProfile& profile);

// Survival probability from creation point z to the output facet for a photon
// of the given channel, exp(-int_z^L [alpha_j + 2 gamma_j/a_eff P + sigma N_c] dz').
double photon_survival(const WaveguideModel& wg, GeneratedChannel ch, double z,
                       const PowerProfile& profile);

// Survival sampled on the profile grid (same length as profile.z).
std::vector<double> survival_curve(const WaveguideModel& wg, GeneratedChannel ch,
                                   const PowerProfile& profile);

// Generation-averaged on-chip efficiency (1/L) int_0^L eta_on(z) dz, treating
// the pair creation density as uniform along the waveguide.
double average_on_chip_efficiency(const WaveguideModel& wg, GeneratedChannel ch,
                                  const PowerProfile& profile);

} // namespace pairsim
