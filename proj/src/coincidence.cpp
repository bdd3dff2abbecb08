#include "pairsim/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "pairsim/errors.hpp"

namespace pairsim {

namespace {

std::vector<std::int64_t> channel_times(const TagStream& tags, TagChannel ch) {
    std::vector<std::int64_t> out;
    for (const TimeTag& t : tags) {
        if (t.channel == ch) out.push_back(t.time_ps);
    }
    return out;
}

void check_histogram_args(const TagStream& tags, double bin_width, double span,
                          double rep_period) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("histogram: bin_width must be > 0");
    if (!(span >= bin_width)) throw std::invalid_argument("histogram: span must be >= bin_width");
    if (!(rep_period > 0.0)) throw std::invalid_argument("histogram: rep_period must be > 0");
    if (!is_time_sorted(tags)) {
        throw std::invalid_argument("histogram: tag stream must be sorted by time");
    }
}

} // namespace

CoincidenceHistogram histogram(const TagStream& tags, TagChannel start, TagChannel stop,
                               double bin_width, double span, double rep_period) {
    check_histogram_args(tags, bin_width, span, rep_period);
    return histogram_times(channel_times(tags, start), channel_times(tags, stop), bin_width, span,
                           rep_period);
}

CoincidenceHistogram histogram_times(const std::vector<std::int64_t>& starts,
                                     const std::vector<std::int64_t>& stops, double bin_width,
                                     double span, double rep_period) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("histogram: bin_width must be > 0");
    if (!(span >= bin_width)) throw std::invalid_argument("histogram: span must be >= bin_width");
    if (!(rep_period > 0.0)) throw std::invalid_argument("histogram: rep_period must be > 0");
    if (!std::is_sorted(starts.begin(), starts.end()) ||
        !std::is_sorted(stops.begin(), stops.end())) {
        throw std::invalid_argument("histogram: time lists must be sorted");
    }

    const long long half_bins = std::llround(span / bin_width);
    const std::size_t nbins = static_cast<std::size_t>(2 * half_bins + 1);
    const double bw_ps = bin_width * 1e12;
    const std::int64_t reach_ps =
        static_cast<std::int64_t>(std::llround((span + bin_width) * 1e12));

    CoincidenceHistogram hist;
    hist.bin_width = bin_width;
    hist.origin_delay = -static_cast<double>(half_bins) * bin_width;
    hist.rep_period = rep_period;
    hist.counts.assign(nbins, 0);

#pragma omp parallel
    {
        std::vector<std::uint64_t> local(nbins, 0);
#pragma omp for nowait
        for (long long i = 0; i < static_cast<long long>(starts.size()); ++i) {
            const std::int64_t t0 = starts[static_cast<std::size_t>(i)];
            auto lo = std::lower_bound(stops.begin(), stops.end(), t0 - reach_ps);
            auto hi = std::upper_bound(lo, stops.end(), t0 + reach_ps);
            for (auto it = lo; it != hi; ++it) {
                const double dt_bins = static_cast<double>(*it - t0) / bw_ps;
                const long long k = std::llround(dt_bins);
                if (k >= -half_bins && k <= half_bins) {
                    ++local[static_cast<std::size_t>(k + half_bins)];
                }
            }
        }
#pragma omp critical
        {
            for (std::size_t b = 0; b < nbins; ++b) hist.counts[b] += local[b];
        }
    }
    return hist;
}

CoincidenceHistogram histogram_reference(const TagStream& tags, TagChannel start, TagChannel stop,
                                         double bin_width, double span, double rep_period) {
    check_histogram_args(tags, bin_width, span, rep_period);
    const std::vector<std::int64_t> starts = channel_times(tags, start);
    const std::vector<std::int64_t> stops = channel_times(tags, stop);

    const long long half_bins = std::llround(span / bin_width);
    const double bw_ps = bin_width * 1e12;

    CoincidenceHistogram hist;
    hist.bin_width = bin_width;
    hist.origin_delay = -static_cast<double>(half_bins) * bin_width;
    hist.rep_period = rep_period;
    hist.counts.assign(static_cast<std::size_t>(2 * half_bins + 1), 0);

    for (const std::int64_t t0 : starts) {
        for (const std::int64_t t1 : stops) {
            const long long k = std::llround(static_cast<double>(t1 - t0) / bw_ps);
            if (k >= -half_bins && k <= half_bins) {
                ++hist.counts[static_cast<std::size_t>(k + half_bins)];
            }
        }
    }
    return hist;
}

std::size_t calibrated_zero_bin(const CoincidenceHistogram& hist) {
    if (hist.counts.empty()) throw std::invalid_argument("calibrated_zero_bin: empty histogram");
    return static_cast<std::size_t>(
        std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
}

PeakSeries windowed_peak_counts(const CoincidenceHistogram& hist, double window,
                                std::size_t zero_bin) {
    if (hist.counts.empty()) throw std::invalid_argument("windowed_peak_counts: empty histogram");
    if (zero_bin >= hist.counts.size()) {
        throw std::invalid_argument("windowed_peak_counts: zero_bin out of range");
    }
    if (!(window > 0.0)) throw std::invalid_argument("windowed_peak_counts: window must be > 0");
    if (!(window <= hist.rep_period / 2.0)) {
        throw std::invalid_argument("windowed_peak_counts: window must be <= rep_period / 2");
    }
    // Bins whose centers lie within +/- window/2 of the peak center.
    const long long j_half =
        static_cast<long long>(std::floor(window / (2.0 * hist.bin_width) + 1e-9));
    const long long n = static_cast<long long>(hist.counts.size());
    const long long z = static_cast<long long>(zero_bin);

    PeakSeries series;
    series.window_bins = static_cast<int>(2 * j_half + 1);
    series.window_effective = static_cast<double>(series.window_bins) * hist.bin_width;

    // Peak m sits at zero_bin + round(m * rep_period / bin_width).
    long m_lo = 0, m_hi = 0;
    auto center_of = [&](long m) {
        return z + std::llround(static_cast<double>(m) * hist.rep_period / hist.bin_width);
    };
    while (center_of(m_lo - 1) - j_half >= 0) --m_lo;
    while (center_of(m_hi + 1) + j_half < n) ++m_hi;

    for (long m = m_lo; m <= m_hi; ++m) {
        const long long c = center_of(m);
        if (c - j_half < 0 || c + j_half >= n) continue;
        double sum = 0.0;
        for (long long k = c - j_half; k <= c + j_half; ++k) {
            sum += static_cast<double>(hist.counts[static_cast<std::size_t>(k)]);
        }
        if (m == 0) series.zero_pos = series.counts.size();
        series.peak_offset.push_back(m);
        series.counts.push_back(sum);
    }
    return series;
}

CarEstimate car_from_histogram(const CoincidenceHistogram& hist, double window,
                               int min_accidental_peaks) {
    if (min_accidental_peaks < 1) {
        throw std::invalid_argument("car_from_histogram: min_accidental_peaks must be >= 1");
    }
    const std::size_t zero = calibrated_zero_bin(hist);
    const PeakSeries series = windowed_peak_counts(hist, window, zero);

    CarEstimate est;
    est.window_requested = window;
    est.window_effective = series.window_effective;
    est.zero_bin = zero;
    est.n_raw = series.counts[series.zero_pos];

    double acc_total = 0.0;
    int peaks = 0;
    for (std::size_t i = 0; i < series.counts.size(); ++i) {
        if (series.peak_offset[i] == 0) continue;
        acc_total += series.counts[i];
        ++peaks;
    }
    if (peaks < min_accidental_peaks) {
        throw std::invalid_argument("car_from_histogram: only " + std::to_string(peaks) +
                                    " accidental peaks in span, need >= " +
                                    std::to_string(min_accidental_peaks));
    }
    est.accidental_peaks = peaks;
    est.n_acc = acc_total / static_cast<double>(peaks);
    if (!(est.n_acc > 0.0)) {
        throw NumericalError("car_from_histogram: zero accidental counts, CAR undefined");
    }
    // Poisson errors on the raw and accidental windowed counts.
    const double sigma_raw = std::sqrt(est.n_raw);
    const double sigma_acc = std::sqrt(acc_total) / static_cast<double>(peaks);
    est.n_net = est.n_raw - est.n_acc;
    est.n_net_sigma = std::sqrt(sigma_raw * sigma_raw + sigma_acc * sigma_acc);
    est.car = est.n_net / est.n_acc;
    const double ratio = est.n_raw / est.n_acc;
    double rel2 = 0.0;
    if (est.n_raw > 0.0) rel2 += 1.0 / est.n_raw;
    if (acc_total > 0.0) rel2 += 1.0 / acc_total;
    est.car_sigma = ratio * std::sqrt(rel2);
    return est;
}

std::vector<std::int64_t> pair_coincidence_times(const TagStream& tags, TagChannel a,
                                                 TagChannel b, double window, double delay) {
    if (!(window > 0.0)) throw std::invalid_argument("pair_coincidence_times: window must be > 0");
    if (!is_time_sorted(tags)) {
        throw std::invalid_argument("pair_coincidence_times: tag stream must be sorted by time");
    }
    const std::vector<std::int64_t> ta = channel_times(tags, a);
    const std::vector<std::int64_t> tb = channel_times(tags, b);
    const std::int64_t half = std::llround(window / 2.0 * 1e12);
    const std::int64_t d = std::llround(delay * 1e12);
    std::vector<std::int64_t> out;
    for (const std::int64_t t : ta) {
        auto lo = std::lower_bound(tb.begin(), tb.end(), t + d - half);
        if (lo != tb.end() && *lo <= t + d + half) out.push_back(t);
    }
    return out;
}

G2hEstimate g2h_from_counts(const std::vector<double>& n_12i, const std::vector<double>& n_2i,
                            std::size_t zero_pos, int exclusion) {
    if (n_12i.size() != n_2i.size() || n_12i.empty()) {
        throw std::invalid_argument("g2h_from_counts: count series must be non-empty, same size");
    }
    if (zero_pos >= n_12i.size()) {
        throw std::invalid_argument("g2h_from_counts: zero_pos out of range");
    }
    if (exclusion < 0) throw std::invalid_argument("g2h_from_counts: exclusion must be >= 0");

    double sum12 = 0.0, sum2 = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n_12i.size(); ++i) {
        const long long dist = std::llabs(static_cast<long long>(i) -
                                          static_cast<long long>(zero_pos));
        if (dist <= exclusion) continue;
        sum12 += n_12i[i];
        sum2 += n_2i[i];
        ++used;
    }
    if (used == 0) {
        throw std::invalid_argument("g2h_from_counts: no peaks outside the exclusion region");
    }
    const double avg12 = sum12 / static_cast<double>(used);
    const double avg2 = sum2 / static_cast<double>(used);
    if (!(avg12 > 0.0) || !(avg2 > 0.0)) {
        throw NumericalError("g2h_from_counts: zero normalization average");
    }

    G2hEstimate est;
    est.zero_pos = zero_pos;
    est.g2.assign(n_12i.size(), 0.0);
    est.sigma.assign(n_12i.size(), 0.0);
    for (std::size_t i = 0; i < n_12i.size(); ++i) {
        if (!(n_2i[i] > 0.0)) {
            est.g2[i] = std::numeric_limits<double>::quiet_NaN();
            est.sigma[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        est.g2[i] = (n_12i[i] / avg12) * (avg2 / n_2i[i]);
        // Poisson errors; a zero numerator keeps a one-count error scale.
        const double rel2 = 1.0 / std::max(n_12i[i], 1.0) + 1.0 / n_2i[i] + 1.0 / sum12 +
                            1.0 / sum2;
        const double scale = est.g2[i] > 0.0 ? est.g2[i] : avg2 / (avg12 * n_2i[i]);
        est.sigma[i] = scale * std::sqrt(rel2);
    }
    est.g2_zero = est.g2[zero_pos];
    est.sigma_zero = est.sigma[zero_pos];
    return est;
}

ReducedObservables reduce_observables(const PowerSweepPoint& point, double eta_on_i,
                                      double eta_on_s, double eta_nd, double d_i, double d_s,
                                      double rep_rate) {
    if (!(eta_on_i > 0.0) || eta_on_i > 1.0 || !(eta_on_s > 0.0) || eta_on_s > 1.0) {
        throw std::invalid_argument("reduce_observables: eta_on must be in (0, 1]");
    }
    if (!(eta_nd > 0.0) || eta_nd > 1.0) {
        throw std::invalid_argument("reduce_observables: eta_nd must be in (0, 1]");
    }
    if (!(rep_rate > 0.0)) throw std::invalid_argument("reduce_observables: rep_rate must be > 0");

    const double p_i = point.rate_i / rep_rate;
    const double p_s = point.rate_s / rep_rate;
    const double p_si = point.rate_si_net / rep_rate;

    ReducedObservables out;
    out.y_i = (p_i - eta_nd * d_i) / (eta_on_i * eta_nd);
    out.y_s = (p_s - d_s) / eta_on_s;
    out.y_si = p_si / (eta_on_i * eta_nd * eta_on_s);
    out.sigma_i = point.sigma_i / rep_rate / (eta_on_i * eta_nd);
    out.sigma_s = point.sigma_s / rep_rate / eta_on_s;
    out.sigma_si = point.sigma_si / rep_rate / (eta_on_i * eta_nd * eta_on_s);
    return out;
}

QuadraticFit quadratic_fit(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& sigma_y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw std::invalid_argument("quadratic_fit: x and y sizes differ");
    const bool weighted = !sigma_y.empty();
    if (weighted && sigma_y.size() != n) {
        throw std::invalid_argument("quadratic_fit: sigma_y size mismatch");
    }
    if (n < 3) throw std::invalid_argument("quadratic_fit: need at least 3 points");

    // Normal equations for y = a t + b with t = x^2.
    long double s = 0, st = 0, stt = 0, sy = 0, sty = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        if (weighted) {
            if (!(sigma_y[i] > 0.0)) {
                throw std::invalid_argument("quadratic_fit: sigma_y entries must be > 0");
            }
            w = 1.0 / (sigma_y[i] * sigma_y[i]);
        }
        const long double t = static_cast<long double>(x[i]) * x[i];
        s += w;
        st += w * t;
        stt += w * t * t;
        sy += w * y[i];
        sty += w * t * y[i];
    }
    const long double det = s * stt - st * st;
    if (!(det > 0.0L) || det <= 1e-24L * s * stt) {
        throw NumericalError("quadratic_fit: degenerate design (need distinct |x| values)");
    }

    QuadraticFit fit;
    fit.points = static_cast<int>(n);
    fit.a = static_cast<double>((s * sty - st * sy) / det);
    fit.b = static_cast<double>((stt * sy - st * sty) / det);

    long double chi2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = weighted ? 1.0 / (sigma_y[i] * sigma_y[i]) : 1.0;
        const long double t = static_cast<long double>(x[i]) * x[i];
        const long double r = y[i] - (fit.a * t + fit.b);
        chi2 += w * r * r;
    }
    fit.chi2 = static_cast<double>(chi2);

    long double var_a = s / det;
    long double var_b = stt / det;
    long double cov = -st / det;
    if (!weighted) {
        // Scale the unit-weight covariance by the residual variance estimate.
        const long double scale = n > 2 ? chi2 / static_cast<long double>(n - 2) : 0.0L;
        var_a *= scale;
        var_b *= scale;
        cov *= scale;
    }
    fit.sigma_a = std::sqrt(static_cast<double>(var_a));
    fit.sigma_b = std::sqrt(static_cast<double>(var_b));
    fit.cov_ab = static_cast<double>(cov);
    return fit;
}

SourceExtraction extract_source_params(const QuadraticFit& fit_i, const QuadraticFit& fit_s,
                                       const QuadraticFit& fit_si) {
    const double a_i = fit_i.a;
    const double a_s = fit_s.a;
    const double a_si = fit_si.a;
    if (!(a_i > 0.0) || !(a_s > 0.0) || !(a_si > 0.0)) {
        throw NumericalError("extract_source_params: non-positive fitted coefficient");
    }

    SourceExtraction out;
    out.xi = a_i * a_s / a_si;
    out.eta_i_off = a_si / a_s;
    out.eta_s_off = a_si / a_i;

    // First-order propagation treating the three fits as independent.
    const double ri = fit_i.sigma_a / a_i;
    const double rs = fit_s.sigma_a / a_s;
    const double rsi = fit_si.sigma_a / a_si;
    out.xi_sigma = out.xi * std::sqrt(ri * ri + rs * rs + rsi * rsi);
    out.eta_i_off_sigma = out.eta_i_off * std::sqrt(rsi * rsi + rs * rs);
    out.eta_s_off_sigma = out.eta_s_off * std::sqrt(rsi * rsi + ri * ri);
    return out;
}

HeraldingEstimate intrinsic_heralding(double r_si_net, double r_i, double r_dc_i,
                                      double eta_s_off) {
    if (!(r_si_net >= 0.0)) throw std::invalid_argument("intrinsic_heralding: R_si must be >= 0");
    if (!(r_i > r_dc_i)) {
        throw std::invalid_argument("intrinsic_heralding: idler rate must exceed its dark rate");
    }
    if (!(eta_s_off > 0.0) || eta_s_off > 1.0) {
        throw std::invalid_argument("intrinsic_heralding: eta_s_off must be in (0, 1]");
    }
    HeraldingEstimate est;
    est.eta = r_si_net / ((r_i - r_dc_i) * eta_s_off);
    est.physical = est.eta <= 1.0;
    return est;
}

} // namespace pairsim
