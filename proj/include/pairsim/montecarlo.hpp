#pragma once

#include <cstdint>
#include <optional>

#include "pairsim/analytic_model.hpp"
#include "pairsim/tagstream.hpp"

namespace pairsim {

// Channel delays and gaussian timing jitter applied to photon/noise tags.
struct TimingConfig {
    double idler_delay = 0.0;  // s
    double sig1_delay = 0.0;   // s
    double sig2_delay = 0.0;   // s
    double jitter_sigma = 0.0; // s, per-detector gaussian jitter (0 = off)
};

// Complete description of one simulated run at a fixed operating point.
// `signal` is the undivided signal channel (its efficiency covers chip,
// coupling and detector); when `hbt` is set, surviving signal photons are
// routed through the splitter onto two arms whose dark counts come from
// `arm1` / `arm2` (their efficiency fields are ignored by the simulation).
struct ExperimentConfig {
    SourceParams source;
    double pbar = 0.0; // W effective pump power at this operating point
    ChannelModel idler;
    ChannelModel signal;
    std::optional<HbtSplit> hbt;
    ChannelModel arm1;
    ChannelModel arm2;
    std::uint64_t pulses = 0;
    std::uint64_t seed = 0;
    std::uint64_t block_size = 65536; // pulses per RNG block
    double rep_period = 12.5e-9;      // s between pulses
    TimingConfig timing;

    double mu() const { return source.xi * pbar * pbar; }
    void validate() const;
};

// Per-pulse click tallies over the whole run.  In a run without HBT the
// single signal detector is counted as arm 1 and n_2 stays zero.
struct CountSummary {
    std::uint64_t pulses = 0;
    std::uint64_t n_i = 0;      // idler clicks
    std::uint64_t n_1 = 0;      // signal arm-1 clicks
    std::uint64_t n_2 = 0;      // signal arm-2 clicks
    std::uint64_t n_12 = 0;     // arm1 & arm2 in the same pulse
    std::uint64_t n_si_raw = 0; // idler & (arm1 | arm2) in the same pulse
    std::uint64_t n_1i = 0;     // arm1 & idler
    std::uint64_t n_2i = 0;     // arm2 & idler
    std::uint64_t n_12i = 0;    // arm1 & arm2 & idler (threefold)
    std::uint64_t n_acc_estimate = 0; // idler at pulse k & signal at pulse k+1
};

// Pulse-synchronous click counting.  The production kernel processes blocks
// of pulses on independent RNG streams (parallelized with OpenMP) and, inside
// a block, jumps directly between pulses that contain an emission or a noise
// event; results are invariant under the thread count.
CountSummary simulate_counts(const ExperimentConfig& cfg);

// Straightforward pulse-by-pulse implementation on a single stream; kept as a
// reference for validation and benchmarking.  Statistically equivalent to
// simulate_counts but draws random numbers in a different order.
CountSummary simulate_counts_reference(const ExperimentConfig& cfg);

// Time-tag generation.  Photon and pulse-synchronous noise events are placed
// at pulse_index * rep_period + channel delay + jitter; free-running dark
// counts are continuous Poisson processes per channel.  The idler dark rate
// is thinned by eta_nd (gate nonlinearity applies to everything in the gate).
// Output is sorted by (time, channel).
TagStream simulate_timetags(const ExperimentConfig& cfg);
TagStream simulate_timetags_reference(const ExperimentConfig& cfg);

} // namespace pairsim
