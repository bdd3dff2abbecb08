// Benchmark: event-skip block kernel vs. pulse-by-pulse reference, and the
// parallel histogram vs. its nested-loop reference.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pairsim/coincidence.hpp"
#include "pairsim/montecarlo.hpp"

using namespace pairsim;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig bench_config(std::uint64_t pulses) {
    ExperimentConfig ec;
    ec.source.xi = 0.72;
    ec.source.rep_rate = 80.0e6;
    ec.source.statistics = PairStatistics::thermal;
    ec.pbar = 0.088; // mu ~ 5.6e-3
    ec.idler.eta_on_avg = 0.95;
    ec.idler.eta_off = 2.81e-3;
    ec.idler.dark_rate = 620.0;
    ec.signal.eta_on_avg = 0.56;
    ec.signal.eta_off = 3.97e-4;
    ec.signal.dark_rate = 2150.0;
    ec.signal.window = 1.1e-9;
    ec.hbt = HbtSplit{};
    ec.arm1.dark_rate = 1150.0;
    ec.arm1.window = 2.0e-9;
    ec.arm2.dark_rate = 1160.0;
    ec.arm2.window = 2.0e-9;
    ec.pulses = pulses;
    ec.seed = 20240817;
    ec.timing.jitter_sigma = 0.1e-9;
    return ec;
}

} // namespace

int main(int argc, char** argv) {
    const std::uint64_t pulses = argc > 1 ? std::stoull(argv[1]) : 100000000ull;
    const std::uint64_t ref_pulses = argc > 2 ? std::stoull(argv[2]) : pulses / 20;
    ExperimentConfig ec = bench_config(pulses);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("pairsim-bench: %llu pulses (reference: %llu), %d thread(s)\n",
                static_cast<unsigned long long>(pulses),
                static_cast<unsigned long long>(ref_pulses), threads);

    // --- counts: block kernel vs reference ---------------------------------
    auto t0 = std::chrono::steady_clock::now();
    const CountSummary fast = simulate_counts(ec);
    const double t_fast = seconds_since(t0);

    ExperimentConfig ec_ref = ec;
    ec_ref.pulses = ref_pulses;
    t0 = std::chrono::steady_clock::now();
    const CountSummary ref = simulate_counts_reference(ec_ref);
    const double t_ref = seconds_since(t0);

    const double ns_fast = t_fast / static_cast<double>(pulses) * 1e9;
    const double ns_ref = t_ref / static_cast<double>(ref_pulses) * 1e9;
    std::printf("counts   block kernel : %8.3f s  (%7.3f ns/pulse)  n_si_raw=%llu\n", t_fast,
                ns_fast, static_cast<unsigned long long>(fast.n_si_raw));
    std::printf("counts   reference    : %8.3f s  (%7.3f ns/pulse)  n_si_raw=%llu\n", t_ref,
                ns_ref, static_cast<unsigned long long>(ref.n_si_raw));
    std::printf("counts   speedup      : %8.1fx per pulse\n", ns_ref / ns_fast);

    // determinism check: the kernel must not depend on the thread count
    const CountSummary again = simulate_counts(ec);
    const bool stable = again.n_i == fast.n_i && again.n_si_raw == fast.n_si_raw &&
                        again.n_12i == fast.n_12i && again.n_acc_estimate == fast.n_acc_estimate;
    std::printf("counts   rerun equal  : %s\n", stable ? "yes" : "NO");

    // --- tags + histogram ---------------------------------------------------
    ExperimentConfig ec_tags = ec;
    ec_tags.pulses = std::min<std::uint64_t>(pulses, 2000000000ull);
    t0 = std::chrono::steady_clock::now();
    const TagStream tags = simulate_timetags(ec_tags);
    const double t_tags = seconds_since(t0);
    std::printf("tags     block kernel : %8.3f s  (%zu tags)\n", t_tags, tags.size());

    const double bin_width = 50e-12, span = 312.5e-9, rep_period = 12.5e-9;
    t0 = std::chrono::steady_clock::now();
    const CoincidenceHistogram h_par =
        histogram(tags, TagChannel::idler, TagChannel::sig1, bin_width, span, rep_period);
    const double t_hist = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const CoincidenceHistogram h_ref =
        histogram_reference(tags, TagChannel::idler, TagChannel::sig1, bin_width, span,
                            rep_period);
    const double t_hist_ref = seconds_since(t0);
    std::printf("histogram parallel    : %8.3f s\n", t_hist);
    std::printf("histogram reference   : %8.3f s  (identical: %s)\n", t_hist_ref,
                h_par.counts == h_ref.counts ? "yes" : "NO");
    if (!stable || h_par.counts != h_ref.counts) return 1;
    return 0;
}
