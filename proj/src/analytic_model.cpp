#include "pairsim/analytic_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pairsim/errors.hpp"

namespace pairsim {

void SourceParams::validate() const {
    if (!(xi >= 0.0) || !std::isfinite(xi)) {
        throw std::invalid_argument("source: xi must be >= 0 and finite");
    }
    if (!(rep_rate > 0.0) || !std::isfinite(rep_rate)) {
        throw std::invalid_argument("source: rep_rate must be > 0");
    }
}

void ChannelModel::validate() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!unit(eta_on_avg)) throw std::invalid_argument("channel: eta_on_avg must be in [0, 1]");
    if (!unit(eta_off)) throw std::invalid_argument("channel: eta_off must be in [0, 1]");
    if (!unit(eta_nd) || eta_nd <= 0.0) {
        throw std::invalid_argument("channel: eta_nd must be in (0, 1]");
    }
    if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate)) {
        throw std::invalid_argument("channel: dark_rate must be >= 0");
    }
    if (!(window >= 0.0) || !std::isfinite(window)) {
        throw std::invalid_argument("channel: window must be >= 0");
    }
    if (dark_rate > 0.0 && !(window > 0.0)) {
        throw std::invalid_argument("channel: window must be > 0 when dark_rate > 0");
    }
    if (!(linear_noise_per_w >= 0.0) || !std::isfinite(linear_noise_per_w)) {
        throw std::invalid_argument("channel: linear_noise_per_w must be >= 0");
    }
}

void HbtSplit::validate() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!unit(t2) || !unit(r2) || !unit(eta_bs)) {
        throw std::invalid_argument("hbt: t2, r2, eta_bs must be in [0, 1]");
    }
    if (std::abs(t2 + r2 - 1.0) > 1e-9) {
        throw std::invalid_argument("hbt: t2 + r2 must equal 1");
    }
}

double dark_prob_idler(double dark_rate_cps, double rep_rate_hz) {
    if (!(dark_rate_cps >= 0.0)) throw std::invalid_argument("dark_prob_idler: rate must be >= 0");
    if (!(rep_rate_hz > 0.0)) throw std::invalid_argument("dark_prob_idler: rep rate must be > 0");
    // One gate per pulse: the free-running dark rate is divided among gates.
    return dark_rate_cps / rep_rate_hz;
}

double dark_prob_signal(double dark_rate_cps, double window_s) {
    if (!(dark_rate_cps >= 0.0)) throw std::invalid_argument("dark_prob_signal: rate must be >= 0");
    if (!(window_s > 0.0)) throw std::invalid_argument("dark_prob_signal: window must be > 0");
    // Probability of at least one dark count inside the window.
    return -std::expm1(-dark_rate_cps * window_s);
}

namespace {

// Idler-channel per-pulse noise probability: gated darks plus optional
// linear-in-power noise (Raman / pump leakage), referenced to the detector.
double idler_noise_prob(const ChannelModel& ch, double rep_rate, double pbar) {
    double d = dark_prob_idler(ch.dark_rate, rep_rate);
    if (ch.linear_noise_per_w > 0.0) d += ch.linear_noise_per_w * pbar;
    return d;
}

double signal_noise_prob(const ChannelModel& ch, double pbar) {
    double d = ch.dark_rate > 0.0 ? dark_prob_signal(ch.dark_rate, ch.window) : 0.0;
    if (ch.linear_noise_per_w > 0.0) d += ch.linear_noise_per_w * pbar;
    return d;
}

} // namespace

DetectionProbabilities detection_probabilities(const SourceParams& src, double pbar,
                                               const ChannelModel& idler,
                                               const ChannelModel& signal) {
    src.validate();
    idler.validate();
    signal.validate();
    if (!(pbar >= 0.0) || !std::isfinite(pbar)) {
        throw std::invalid_argument("detection_probabilities: pbar must be >= 0");
    }

    DetectionProbabilities out;
    out.mu = src.xi * pbar * pbar;
    out.low_gain_warning = out.mu > 0.1;
    out.d_i = idler_noise_prob(idler, src.rep_rate, pbar);
    out.d_s = signal_noise_prob(signal, pbar);

    const double eta_i = idler.efficiency();
    const double eta_s = signal.efficiency();
    // Lowest-order single-pair detection model:
    out.p_si = out.mu * eta_i * eta_s * idler.eta_nd;
    out.p_i = (out.mu * eta_i + out.d_i) * idler.eta_nd;
    out.p_s = out.mu * eta_s + out.d_s;
    out.p_acc = out.p_i * out.p_s;
    return out;
}

double car(const SourceParams& src, double pbar, const ChannelModel& idler,
           const ChannelModel& signal) {
    const DetectionProbabilities p = detection_probabilities(src, pbar, idler, signal);
    if (!(p.p_acc > 0.0)) {
        throw NumericalError("car: accidental probability is zero, CAR undefined");
    }
    return p.p_si / p.p_acc;
}

double net_coincidence_rate(const SourceParams& src, double pbar, const ChannelModel& idler,
                            const ChannelModel& signal) {
    const DetectionProbabilities p = detection_probabilities(src, pbar, idler, signal);
    return p.p_si * src.rep_rate;
}

ThreefoldTerms threefold_coincidence_terms(const PhotonNumberDistribution& dist, double eta_1,
                                           double eta_2, double eta_i, double d_1, double d_2,
                                           double d_i, double eta_nd) {
    const double m1 = dist.factorial_moment(1);
    const double m2 = dist.factorial_moment(2);
    const double m3 = dist.factorial_moment(3);
    // Lowest order in the (small) efficiencies; photon-number moments exact.
    // A pair feeding both arms and the idler needs two pairs for the arms and
    // either one of them or a third for the idler: (M3 + 2 M2) eta1 eta2 etai.
    ThreefoldTerms t;
    t.pairs_all_three = (m3 + 2.0 * m2) * eta_1 * eta_2 * eta_i;
    t.pair_plus_one_arm_dark = (m2 + m1) * (eta_1 * d_2 + d_1 * eta_2) * eta_i;
    t.two_pairs_idler_dark = 0.5 * m2 * eta_1 * eta_2 * d_i;
    t.arm1_photon_darks = m1 * eta_1 * d_2 * d_i;
    t.arm2_photon_darks = m1 * d_1 * eta_2 * d_i;
    t.idler_photon_arm_darks = m1 * d_1 * d_2 * eta_i;
    t.all_darks = d_1 * d_2 * d_i;
    t.pairs_all_three *= eta_nd;
    t.pair_plus_one_arm_dark *= eta_nd;
    t.two_pairs_idler_dark *= eta_nd;
    t.arm1_photon_darks *= eta_nd;
    t.arm2_photon_darks *= eta_nd;
    t.idler_photon_arm_darks *= eta_nd;
    t.all_darks *= eta_nd;
    return t;
}

TwofoldTerms twofold_coincidence_terms(const PhotonNumberDistribution& dist, double eta_k,
                                       double eta_i, double d_k, double d_i, double eta_nd) {
    const double m1 = dist.factorial_moment(1);
    const double m2 = dist.factorial_moment(2);
    TwofoldTerms t;
    // Same photon pair on both detectors (M1) or photons from two pairs (M2).
    t.photon_photon = (m2 + m1) * eta_k * eta_i * eta_nd;
    t.photon_dark = m1 * (eta_k * d_i + d_k * eta_i) * eta_nd;
    t.dark_dark = d_k * d_i * eta_nd;
    return t;
}

G2hPrediction g2h_predicted(const SourceParams& src, double pbar, const ChannelModel& arm1,
                            const ChannelModel& arm2, const ChannelModel& idler,
                            const HbtSplit& hbt) {
    src.validate();
    arm1.validate();
    arm2.validate();
    idler.validate();
    hbt.validate();
    if (!(pbar >= 0.0) || !std::isfinite(pbar)) {
        throw std::invalid_argument("g2h_predicted: pbar must be >= 0");
    }

    G2hPrediction out;
    out.mu = src.xi * pbar * pbar;
    const PhotonNumberDistribution dist(src.statistics, out.mu);

    const double eta_1 = arm1.efficiency() * hbt.t2 * hbt.eta_bs;
    const double eta_2 = arm2.efficiency() * hbt.r2 * hbt.eta_bs;
    const double eta_i = idler.efficiency();
    const double d_1 = signal_noise_prob(arm1, pbar);
    const double d_2 = signal_noise_prob(arm2, pbar);
    const double d_i = idler_noise_prob(idler, src.rep_rate, pbar);
    const double eta_nd = idler.eta_nd;

    out.threefold = threefold_coincidence_terms(dist, eta_1, eta_2, eta_i, d_1, d_2, d_i, eta_nd);
    out.twofold_arm1 = twofold_coincidence_terms(dist, eta_1, eta_i, d_1, d_i, eta_nd);
    out.twofold_arm2 = twofold_coincidence_terms(dist, eta_2, eta_i, d_2, d_i, eta_nd);
    out.p_12i = out.threefold.total();
    out.p_1i = out.twofold_arm1.total();
    out.p_2i = out.twofold_arm2.total();
    out.p_i = (out.mu * eta_i + d_i) * eta_nd;

    if (!(out.p_1i > 0.0) || !(out.p_2i > 0.0)) {
        throw NumericalError("g2h_predicted: a heralded singles probability is zero");
    }
    out.value = out.p_12i * out.p_i / (out.p_1i * out.p_2i);
    out.single_photon = out.value < 0.5;
    return out;
}

double g2_unheralded(double signal_prob, double noise_prob, double g2_true) {
    if (!(signal_prob >= 0.0) || !(noise_prob >= 0.0)) {
        throw std::invalid_argument("g2_unheralded: probabilities must be >= 0");
    }
    if (!(g2_true >= 0.0)) throw std::invalid_argument("g2_unheralded: g2_true must be >= 0");
    const double total = signal_prob + noise_prob;
    if (!(total > 0.0)) {
        throw NumericalError("g2_unheralded: undefined for zero signal and zero noise");
    }
    return (signal_prob * signal_prob * g2_true + 2.0 * signal_prob * noise_prob +
            noise_prob * noise_prob) /
           (total * total);
}

double filter_overlap(double signal_fwhm, double filter_fwhm) {
    if (!(signal_fwhm > 0.0) || !(filter_fwhm > 0.0)) {
        throw std::invalid_argument("filter_overlap: FWHMs must be > 0");
    }
    // Normalized gaussian line of FWHM w_s against a unit-peak squared-sinc
    // bandpass of FWHM w_f.  sinc^2(t0) = 1/2 at t0 below; the argument scale
    // maps the half-width onto t0.
    constexpr double kSincHalfPoint = 1.3915573782515135; // solves sin(t)^2 = t^2 / 2
    const double a = 2.0 * kSincHalfPoint / filter_fwhm;
    const double gauss_k = 4.0 * std::log(2.0) / (signal_fwhm * signal_fwhm);

    const double half_span = 10.0 * std::max(signal_fwhm, filter_fwhm);
    const std::size_t intervals = 1u << 18; // composite Simpson, even count
    const double h = 2.0 * half_span / static_cast<double>(intervals);

    auto gauss = [&](double x) { return std::exp(-gauss_k * x * x); };
    auto sinc2 = [&](double x) {
        const double t = a * x;
        if (std::abs(t) < 1e-8) return 1.0 - t * t / 3.0;
        const double s = std::sin(t) / t;
        return s * s;
    };

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double x = -half_span + h * static_cast<double>(i);
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double g = gauss(x);
        num += w * g * sinc2(x);
        den += w * g;
    }
    return num / den;
}

} // namespace pairsim
