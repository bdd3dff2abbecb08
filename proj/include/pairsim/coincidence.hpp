#pragma once

#include <cstdint>
#include <vector>

#include "pairsim/tagstream.hpp"

namespace pairsim {

// Start-stop delay histogram with bin 0 of `counts` at delay origin_delay and
// uniform bin width; bin centers are origin_delay + k * bin_width.
struct CoincidenceHistogram {
    double bin_width = 0.0;    // s
    double origin_delay = 0.0; // s, center of counts[0]
    double rep_period = 0.0;   // s, pulse spacing of the source
    std::vector<std::uint64_t> counts;

    double delay_of(std::size_t bin) const {
        return origin_delay + static_cast<double>(bin) * bin_width;
    }
    std::size_t size() const { return counts.size(); }
};

// Histogram of stop-start delays for every start tag, covering delays in
// [-span, span].  The stream must be sorted by time.  Parallelized over
// start tags; thread count does not change the result.
CoincidenceHistogram histogram(const TagStream& tags, TagChannel start, TagChannel stop,
                               double bin_width, double span, double rep_period);

// Same binning for pre-extracted, sorted start/stop time lists (ps).
CoincidenceHistogram histogram_times(const std::vector<std::int64_t>& starts,
                                     const std::vector<std::int64_t>& stops, double bin_width,
                                     double span, double rep_period);

// Simple nested-loop implementation kept as a reference; returns results
// identical to histogram().
CoincidenceHistogram histogram_reference(const TagStream& tags, TagChannel start, TagChannel stop,
                                         double bin_width, double span, double rep_period);

// Index of the histogram's calibrated zero-delay bin (global maximum; the
// first one if tied).
std::size_t calibrated_zero_bin(const CoincidenceHistogram& hist);

// Integrated counts of the pulse-synchronous peaks: the window (rounded to
// whole bins) around the zero peak and around every fully contained peak at
// multiples of the repetition period.
struct PeakSeries {
    std::vector<long> peak_offset;  // in units of rep_period (0 = true peak)
    std::vector<double> counts;     // windowed counts per peak
    std::size_t zero_pos = 0;       // index of offset 0 in the vectors
    int window_bins = 0;            // bins actually integrated per peak (2J+1)
    double window_effective = 0.0;  // s, (2J+1) * bin_width
};

PeakSeries windowed_peak_counts(const CoincidenceHistogram& hist, double window,
                                std::size_t zero_bin);

// Coincidence-to-accidental ratio from a start-stop histogram:
// CAR = (N_raw - N_acc) / N_acc with N_acc the mean accidental-peak counts.
struct CarEstimate {
    double car = 0.0;
    double car_sigma = 0.0;
    double n_raw = 0.0;       // windowed zero-peak counts
    double n_acc = 0.0;       // mean windowed accidental-peak counts
    double n_net = 0.0;       // n_raw - n_acc
    double n_net_sigma = 0.0;
    int accidental_peaks = 0;
    double window_requested = 0.0; // s
    double window_effective = 0.0; // s, after rounding to whole bins
    std::size_t zero_bin = 0;
};

CarEstimate car_from_histogram(const CoincidenceHistogram& hist, double window,
                               int min_accidental_peaks = 4);

// Times of channel `a` tags that have a channel `b` tag within +/- window/2
// of (t_a + delay); used to build heralded-coincidence start streams.
std::vector<std::int64_t> pair_coincidence_times(const TagStream& tags, TagChannel a,
                                                 TagChannel b, double window, double delay = 0.0);

// Heralded g2 from windowed peak series of threefold (N_12i) and heralded
// arm-2 (N_2i) counts: g2[k] = (N_12i[k]/<N_12i>) * (<N_2i>/N_2i[k]) with the
// averages over peaks more than `exclusion` positions away from zero_pos.
// Bins with zero N_2i get NaN.
struct G2hEstimate {
    std::vector<double> g2;
    std::vector<double> sigma;
    double g2_zero = 0.0;
    double sigma_zero = 0.0;
    std::size_t zero_pos = 0;
};

G2hEstimate g2h_from_counts(const std::vector<double>& n_12i, const std::vector<double>& n_2i,
                            std::size_t zero_pos, int exclusion = 1);

// One power point of a rate sweep (rates in 1/s; sigmas 0 for noiseless data).
struct PowerSweepPoint {
    double pbar = 0.0; // W
    double rate_i = 0.0;
    double rate_s = 0.0;
    double rate_si_net = 0.0;
    double sigma_i = 0.0;
    double sigma_s = 0.0;
    double sigma_si = 0.0;
};

// Detector- and noise-corrected observables that are quadratic in pbar:
// y = xi * pbar^2 * eta_off (per channel) and y_si = xi pbar^2 eta_i_off eta_s_off.
struct ReducedObservables {
    double y_i = 0.0;
    double y_s = 0.0;
    double y_si = 0.0;
    double sigma_i = 0.0;
    double sigma_s = 0.0;
    double sigma_si = 0.0;
};

ReducedObservables reduce_observables(const PowerSweepPoint& point, double eta_on_i,
                                      double eta_on_s, double eta_nd, double d_i, double d_s,
                                      double rep_rate);

// Weighted least squares for y = a x^2 + b.  With sigma_y given, the
// covariance is the unscaled (A^T W A)^-1; without it, unit weights are used
// and the covariance is scaled by chi2/(n-2).
struct QuadraticFit {
    double a = 0.0;
    double b = 0.0;
    double sigma_a = 0.0;
    double sigma_b = 0.0;
    double cov_ab = 0.0;
    double chi2 = 0.0;
    int points = 0;
};

QuadraticFit quadratic_fit(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& sigma_y = {});

// Source brightness and off-chip efficiencies from the three sweep fits:
// xi = a_i a_s / a_si, eta_i_off = a_si / a_s, eta_s_off = a_si / a_i,
// with first-order independent error propagation.
struct SourceExtraction {
    double xi = 0.0;
    double xi_sigma = 0.0;
    double eta_i_off = 0.0;
    double eta_i_off_sigma = 0.0;
    double eta_s_off = 0.0;
    double eta_s_off_sigma = 0.0;
};

SourceExtraction extract_source_params(const QuadraticFit& fit_i, const QuadraticFit& fit_s,
                                       const QuadraticFit& fit_si);

// Intrinsic heralding efficiency eta_I = R_si_net / ((R_i - R_dc_i) eta_s_off).
struct HeraldingEstimate {
    double eta = 0.0;
    bool physical = true; // false when eta > 1
};

HeraldingEstimate intrinsic_heralding(double r_si_net, double r_i, double r_dc_i,
                                      double eta_s_off);

} // namespace pairsim
