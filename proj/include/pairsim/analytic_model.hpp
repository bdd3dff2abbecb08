#pragma once

#include "pairsim/photon_statistics.hpp"

namespace pairsim {

// Pair source brightness and timing.
struct SourceParams {
    double xi = 0.0;                                    // 1/W^2 pair-generation coefficient
    double rep_rate = 80.0e6;                           // 1/s pump repetition rate
    PairStatistics statistics = PairStatistics::thermal;

    void validate() const;
};

// One detection channel: on-chip survival, off-chip transmission, detector
// behaviour and noise.  `efficiency()` is the photon transmission from the
// creation point to a detector click (before any gating deadtime factor).
struct ChannelModel {
    double eta_on_avg = 1.0;        // generation-averaged on-chip survival
    double eta_off = 1.0;           // off-chip transmission x detector efficiency
    double eta_nd = 1.0;            // gated-detector nonlinearity factor (idler only in practice)
    double dark_rate = 0.0;         // 1/s free-running dark/background rate
    double window = 1.0e-9;         // s coincidence window feeding this channel's accidental term
    double linear_noise_per_w = 0.0; // per-pulse noise probability per watt of effective pump
                                     // (spontaneous Raman / pump leakage; 0 = off)

    double efficiency() const { return eta_on_avg * eta_off; }
    void validate() const;
};

// Balanced (or not) splitter feeding the two signal arms of an HBT setup.
struct HbtSplit {
    double t2 = 0.5;     // transmitted-port power fraction
    double r2 = 0.5;     // reflected-port power fraction
    double eta_bs = 1.0; // excess transmission of the splitter

    void validate() const;
};

// Per-pulse dark probabilities.
// Gated idler detector: one gate per pulse, d = dark_rate / rep_rate.
double dark_prob_idler(double dark_rate_cps, double rep_rate_hz);
// Free-running signal detector inside a coincidence window:
// d = 1 - exp(-dark_rate * window).
double dark_prob_signal(double dark_rate_cps, double window_s);

// Per-pulse detection probabilities at effective pump power pbar (Fermi
// golden-rule quadratic gain mu = xi pbar^2).
struct DetectionProbabilities {
    double mu = 0.0;    // mean pairs per pulse
    double p_i = 0.0;   // idler detection probability per pulse (darks included)
    double p_s = 0.0;   // signal detection probability per pulse (darks included)
    double p_si = 0.0;  // true-coincidence probability per pulse
    double p_acc = 0.0; // accidental-coincidence probability per pulse (= p_i p_s)
    double d_i = 0.0;   // idler noise probability actually used (darks + linear noise)
    double d_s = 0.0;   // signal noise probability actually used
    bool low_gain_warning = false; // mu > 0.1: single-pair treatment degrades
};

DetectionProbabilities detection_probabilities(const SourceParams& src, double pbar,
                                               const ChannelModel& idler,
                                               const ChannelModel& signal);

// Coincidence-to-accidental ratio p_si / (p_i p_s).
double car(const SourceParams& src, double pbar, const ChannelModel& idler,
           const ChannelModel& signal);

// Net (accidental-subtracted) coincidence rate in 1/s.
double net_coincidence_rate(const SourceParams& src, double pbar, const ChannelModel& idler,
                            const ChannelModel& signal);

// The seven ways a threefold arm1+arm2+idler coincidence arises in one pulse,
// expanded to lowest order in the per-photon efficiencies and keeping the
// photon-number factorial moments exactly.
struct ThreefoldTerms {
    double pairs_all_three = 0.0;       // photons on both arms and the idler
    double pair_plus_one_arm_dark = 0.0; // photon on one arm + dark on the other + idler photon
    double two_pairs_idler_dark = 0.0;  // photons on both arms + idler dark
    double arm1_photon_darks = 0.0;     // photon on arm 1, darks on arm 2 and idler
    double arm2_photon_darks = 0.0;     // photon on arm 2, darks on arm 1 and idler
    double idler_photon_arm_darks = 0.0; // idler photon, darks on both arms
    double all_darks = 0.0;

    double total() const {
        return pairs_all_three + pair_plus_one_arm_dark + two_pairs_idler_dark +
               arm1_photon_darks + arm2_photon_darks + idler_photon_arm_darks + all_darks;
    }
};

// Twofold arm+idler coincidence decomposition.
struct TwofoldTerms {
    double photon_photon = 0.0;
    double photon_dark = 0.0; // photon on one detector, dark on the other (both orders)
    double dark_dark = 0.0;

    double total() const { return photon_photon + photon_dark + dark_dark; }
};

// eta_1/eta_2/eta_i are full per-photon detection efficiencies of the two
// signal arms and the idler; d_* are per-pulse noise probabilities; eta_nd
// multiplies every term (idler gate nonlinearity).
ThreefoldTerms threefold_coincidence_terms(const PhotonNumberDistribution& dist, double eta_1,
                                           double eta_2, double eta_i, double d_1, double d_2,
                                           double d_i, double eta_nd);

TwofoldTerms twofold_coincidence_terms(const PhotonNumberDistribution& dist, double eta_k,
                                       double eta_i, double d_k, double d_i, double eta_nd);

// Heralded second-order correlation at zero delay:
// g2h = p_12i p_i / (p_1i p_2i), with the arm efficiencies derived from the
// signal-channel transmission and the splitter fractions.
struct G2hPrediction {
    double value = 0.0;
    bool single_photon = false; // value < 0.5
    double mu = 0.0;
    double p_i = 0.0;
    double p_12i = 0.0;
    double p_1i = 0.0;
    double p_2i = 0.0;
    ThreefoldTerms threefold;
    TwofoldTerms twofold_arm1;
    TwofoldTerms twofold_arm2;
};

G2hPrediction g2h_predicted(const SourceParams& src, double pbar, const ChannelModel& arm1,
                            const ChannelModel& arm2, const ChannelModel& idler,
                            const HbtSplit& hbt);

// Unheralded signal-channel g2(0) diluted by uncorrelated noise:
// g2 = (S^2 g2_true + 2 S D + D^2) / (S + D)^2 for per-pulse signal.
// and noise probabilities S and D on the undivided signal channel.
double g2_unheralded(double signal_prob, double noise_prob, double g2_true);

// Spectral overlap of a gaussian photon (FWHM signal_fwhm) with a unit-peak
// squared-sinc bandpass (FWHM filter_fwhm), both in the same units.
double filter_overlap(double signal_fwhm, double filter_fwhm);

} // namespace pairsim
