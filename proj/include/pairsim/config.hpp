#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairsim/analytic_model.hpp"
#include "pairsim/montecarlo.hpp"
#include "pairsim/waveguide.hpp"

namespace pairsim {

// Idler detector configuration (gated).
struct IdlerChannelConfig {
    double eta_off = 1.0;
    double eta_nd = 1.0;                     // constant gate-nonlinearity factor
    std::optional<double> eta_nd_psat = {};  // W; if set, eta_nd(pbar) = eta_nd / (1 + pbar/psat)
    double dark_rate = 0.0;                  // 1/s
    double gate_width = 1.9e-9;              // s (documentation of the gate; darks use rep rate)
    double linear_noise_per_w = 0.0;
};

// Free-running signal-side detector configuration.
struct SignalChannelConfig {
    double eta_off = 1.0;
    double dark_rate = 0.0;  // 1/s
    double linear_noise_per_w = 0.0;
};

struct ArmChannelConfig {
    double dark_rate = 0.0;  // 1/s
    double window = 2.0e-9;  // s, coincidence window for this arm's accidentals
    double linear_noise_per_w = 0.0;
};

struct SweepConfig {
    std::vector<double> powers;     // W input peak powers
    std::string model = "analytic"; // "analytic" or "montecarlo"
    double fit_max_pbar = 1e9;      // W; points with pbar above this are excluded from fits
};

struct MonteCarloConfig {
    std::uint64_t pulses = 0;
    std::uint64_t seed = 1;
    std::uint64_t block_size = 65536;
    double power = 0.0; // W input peak power of the simulated run
};

struct AnalysisConfig {
    double bin_width = 50.0e-12;        // s
    double span = 312.5e-9;             // s, histogram covers [-span, span]
    std::vector<double> windows = {1.1e-9}; // s coincidence windows
    int exclusion_bins = 1;             // peaks skipped around zero in g2h normalization
    int min_accidental_peaks = 4;
    double g2h_window = 2.0e-9;         // s window for the heralded-g2 pipeline
};

struct IoConfig {
    std::string out_dir = "out";
    std::string tag_format = "csv"; // "csv" or "bin"
};

// Full run configuration as loaded from JSON.
struct RunConfig {
    SourceParams source;
    WaveguideModel waveguide;
    int grid_points = 2048;
    IdlerChannelConfig idler;
    SignalChannelConfig signal;
    ArmChannelConfig arm1;
    ArmChannelConfig arm2;
    std::optional<HbtSplit> hbt;
    std::optional<SweepConfig> sweep;
    std::optional<MonteCarloConfig> montecarlo;
    AnalysisConfig analysis;
    TimingConfig timing{0.0, 0.0, 0.0, 0.1e-9};
    double g2_true_unheralded = 1.0; // intrinsic unheralded g2(0) of the signal channel
    std::optional<std::pair<double, double>> filter; // {signal FWHM, filter FWHM} (nm)
    IoConfig io;

    std::string hash;    // FNV-1a of the canonical JSON text
    nlohmann::json raw;  // document as loaded
};

// FNV-1a 64-bit over the canonical (compact) JSON serialization.
std::string config_hash(const nlohmann::json& doc);

// Parse and validate a configuration document; unknown keys are rejected and
// all diagnostics carry the JSON path of the offending field.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace pairsim
