#pragma once

#include <exception>
#include <filesystem>
#include <optional>

#include "pairsim/config.hpp"

namespace pairsim {

// Pump propagation summary at one input power.
struct OperatingPoint {
    double p0 = 0.0;       // W input peak power
    double pbar = 0.0;     // W effective (quadratic-mean) pump power
    double eta_on_i = 1.0; // generation-averaged on-chip survival, idler
    double eta_on_s = 1.0; // generation-averaged on-chip survival, signal
    double mu = 0.0;       // xi * pbar^2
};

OperatingPoint operating_point(const RunConfig& cfg, double input_power);

// Idler gate nonlinearity at this operating point (optional saturation form).
double resolve_eta_nd(const IdlerChannelConfig& idler, double pbar);

// Channel models at one operating point.  `signal_window` feeds the signal
// accidental/dark term (one of analysis.windows_s).
ChannelModel make_idler_channel(const RunConfig& cfg, const OperatingPoint& op);
ChannelModel make_signal_channel(const RunConfig& cfg, const OperatingPoint& op,
                                 double signal_window);
ChannelModel make_arm_channel(const RunConfig& cfg, const OperatingPoint& op,
                              const ArmChannelConfig& arm);

// Monte Carlo run description at the configured montecarlo.power_w.
ExperimentConfig make_experiment(const RunConfig& cfg, std::optional<std::uint64_t> seed = {});

// CLI commands.  Each writes its artifacts under out_dir (created on demand)
// and never embeds run timestamps, so identical inputs give identical bytes.
void run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                  std::optional<std::uint64_t> seed = {}, bool verbose = false);
void run_analyze(const RunConfig& cfg, const std::filesystem::path& tag_file,
                 const std::filesystem::path& out_dir, bool verbose = false);
void run_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed = {}, bool verbose = false);
void run_curves(const RunConfig& cfg, const std::filesystem::path& out_dir,
                bool verbose = false);

// Exit code for an error escaping a CLI command (see errors.hpp).
int classify_exit_code(const std::exception& e);

} // namespace pairsim
