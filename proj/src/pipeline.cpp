#include "pairsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "pairsim/coincidence.hpp"
#include "pairsim/errors.hpp"
#include "pairsim/version.hpp"

namespace pairsim {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

json meta_block(const RunConfig& cfg, std::optional<std::uint64_t> seed = {}) {
    json meta;
    meta["tool"] = "pairsim";
    meta["version"] = kVersion;
    meta["config_hash"] = cfg.hash;
    if (seed) meta["seed"] = *seed;
    return meta;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out = open_out(path);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string csv_header_comment(const RunConfig& cfg, std::optional<std::uint64_t> seed = {}) {
    std::string line = "# pairsim version=" + std::string(kVersion) + " config_hash=" + cfg.hash;
    if (seed) line += " seed=" + std::to_string(*seed);
    return line + "\n";
}

} // namespace

OperatingPoint operating_point(const RunConfig& cfg, double input_power) {
    const PowerProfile profile = propagate_pump(cfg.waveguide, input_power, cfg.grid_points);
    OperatingPoint op;
    op.p0 = input_power;
    op.pbar = effective_pump_power(profile);
    op.eta_on_i = average_on_chip_efficiency(cfg.waveguide, GeneratedChannel::idler, profile);
    op.eta_on_s = average_on_chip_efficiency(cfg.waveguide, GeneratedChannel::signal, profile);
    op.mu = cfg.source.xi * op.pbar * op.pbar;
    return op;
}

double resolve_eta_nd(const IdlerChannelConfig& idler, double pbar) {
    if (!idler.eta_nd_psat) return idler.eta_nd;
    return idler.eta_nd / (1.0 + pbar / *idler.eta_nd_psat);
}

ChannelModel make_idler_channel(const RunConfig& cfg, const OperatingPoint& op) {
    ChannelModel ch;
    ch.eta_on_avg = op.eta_on_i;
    ch.eta_off = cfg.idler.eta_off;
    ch.eta_nd = resolve_eta_nd(cfg.idler, op.pbar);
    ch.dark_rate = cfg.idler.dark_rate;
    ch.window = cfg.idler.gate_width;
    ch.linear_noise_per_w = cfg.idler.linear_noise_per_w;
    return ch;
}

ChannelModel make_signal_channel(const RunConfig& cfg, const OperatingPoint& op,
                                 double signal_window) {
    ChannelModel ch;
    ch.eta_on_avg = op.eta_on_s;
    ch.eta_off = cfg.signal.eta_off;
    ch.eta_nd = 1.0;
    ch.dark_rate = cfg.signal.dark_rate;
    ch.window = signal_window;
    ch.linear_noise_per_w = cfg.signal.linear_noise_per_w;
    return ch;
}

ChannelModel make_arm_channel(const RunConfig& cfg, const OperatingPoint& op,
                              const ArmChannelConfig& arm) {
    // Arms inherit the signal-chain transmission; their own fields carry the
    // per-arm noise model.
    ChannelModel ch;
    ch.eta_on_avg = op.eta_on_s;
    ch.eta_off = cfg.signal.eta_off;
    ch.eta_nd = 1.0;
    ch.dark_rate = arm.dark_rate;
    ch.window = arm.window;
    ch.linear_noise_per_w = arm.linear_noise_per_w;
    return ch;
}

ExperimentConfig make_experiment(const RunConfig& cfg, std::optional<std::uint64_t> seed) {
    if (!cfg.montecarlo) throw ConfigError("config: 'montecarlo' section required for simulation");
    const OperatingPoint op = operating_point(cfg, cfg.montecarlo->power);

    ExperimentConfig ec;
    ec.source = cfg.source;
    ec.pbar = op.pbar;
    ec.idler = make_idler_channel(cfg, op);
    ec.signal = make_signal_channel(cfg, op, cfg.analysis.windows.front());
    ec.hbt = cfg.hbt;
    if (cfg.hbt) {
        ec.arm1 = make_arm_channel(cfg, op, cfg.arm1);
        ec.arm2 = make_arm_channel(cfg, op, cfg.arm2);
    }
    ec.pulses = cfg.montecarlo->pulses;
    ec.seed = seed.value_or(cfg.montecarlo->seed);
    ec.block_size = cfg.montecarlo->block_size;
    ec.rep_period = 1.0 / cfg.source.rep_rate;
    ec.timing = cfg.timing;
    return ec;
}

void run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                  std::optional<std::uint64_t> seed, bool verbose) {
    const ExperimentConfig ec = make_experiment(cfg, seed);
    const OperatingPoint op = operating_point(cfg, cfg.montecarlo->power);
    ensure_dir(out_dir);

    const DetectionProbabilities pred =
        detection_probabilities(cfg.source, ec.pbar, ec.idler, ec.signal);
    if (pred.low_gain_warning) {
        std::cerr << "warning: mu = " << pred.mu
                  << " > 0.1; the low-gain model underlying the analysis degrades\n";
    }

    const CountSummary counts = simulate_counts(ec);
    const TagStream tags = simulate_timetags(ec);

    const std::string tag_name = cfg.io.tag_format == "bin" ? "tags.bin" : "tags.csv";
    const FileMeta meta{kVersion, cfg.hash, ec.seed};
    write_tags(out_dir / tag_name, tags, &meta);

    const double pulses = static_cast<double>(counts.pulses);
    json doc;
    doc["meta"] = meta_block(cfg, ec.seed);
    doc["meta"]["tag_file"] = tag_name;
    doc["meta"]["tag_format"] = cfg.io.tag_format;
    doc["operating_point"] = {{"p0_w", op.p0},
                              {"pbar_w", op.pbar},
                              {"eta_on_idler", op.eta_on_i},
                              {"eta_on_signal", op.eta_on_s},
                              {"eta_nd", ec.idler.eta_nd},
                              {"mu", op.mu}};
    doc["counts"] = {{"pulses", counts.pulses},
                     {"n_i", counts.n_i},
                     {"n_1", counts.n_1},
                     {"n_2", counts.n_2},
                     {"n_12", counts.n_12},
                     {"n_si_raw", counts.n_si_raw},
                     {"n_1i", counts.n_1i},
                     {"n_2i", counts.n_2i},
                     {"n_12i", counts.n_12i},
                     {"n_acc_estimate", counts.n_acc_estimate}};
    doc["rates_hz"] = {{"idler", counts.n_i / pulses * cfg.source.rep_rate},
                       {"signal", (counts.n_1 + counts.n_2) / pulses * cfg.source.rep_rate},
                       {"si_raw", counts.n_si_raw / pulses * cfg.source.rep_rate},
                       {"si_net", (static_cast<double>(counts.n_si_raw) -
                                   static_cast<double>(counts.n_acc_estimate)) /
                                      pulses * cfg.source.rep_rate}};
    doc["analytic"] = {{"mu", pred.mu},          {"p_i", pred.p_i},   {"p_s", pred.p_s},
                       {"p_si", pred.p_si},      {"p_acc", pred.p_acc},
                       {"d_i", pred.d_i},        {"d_s", pred.d_s},
                       {"low_gain_warning", pred.low_gain_warning}};
    write_json(out_dir / "counts.json", doc);

    if (verbose) {
        std::cerr << "simulate: " << tags.size() << " tags, " << counts.n_si_raw
                  << " raw coincidences over " << counts.pulses << " pulses\n";
    }
}

namespace {

// Extract sorted per-channel times (ps) from a sorted stream.
std::vector<std::int64_t> times_of(const TagStream& tags, TagChannel ch) {
    std::vector<std::int64_t> out;
    for (const TimeTag& t : tags) {
        if (t.channel == ch) out.push_back(t.time_ps);
    }
    return out;
}

} // namespace

void run_analyze(const RunConfig& cfg, const std::filesystem::path& tag_file,
                 const std::filesystem::path& out_dir, bool verbose) {
    const TagStream tags = read_tags(tag_file);
    if (tags.empty()) throw NumericalError("analyze: tag stream is empty");
    if (!is_time_sorted(tags)) throw NumericalError("analyze: tag stream is not time-sorted");
    ensure_dir(out_dir);

    const double rep_period = 1.0 / cfg.source.rep_rate;
    const AnalysisConfig& an = cfg.analysis;
    const CoincidenceHistogram hist =
        histogram(tags, TagChannel::idler, TagChannel::sig1, an.bin_width, an.span, rep_period);

    {
        std::ofstream out = open_out(out_dir / "histogram.csv");
        out << csv_header_comment(cfg);
        out << "delay_s,counts\n";
        for (std::size_t b = 0; b < hist.size(); ++b) {
            out << fmt(hist.delay_of(b)) << ',' << hist.counts[b] << '\n';
        }
    }

    json doc;
    doc["meta"] = meta_block(cfg);
    doc["meta"]["tag_file"] = tag_file.filename().string();
    doc["windows"] = json::array();
    for (const double w : an.windows) {
        const CarEstimate est = car_from_histogram(hist, w, an.min_accidental_peaks);
        doc["windows"].push_back({{"window_s", w},
                                  {"window_effective_s", est.window_effective},
                                  {"car", est.car},
                                  {"car_sigma", est.car_sigma},
                                  {"n_raw", est.n_raw},
                                  {"n_acc", est.n_acc},
                                  {"n_net", est.n_net},
                                  {"n_net_sigma", est.n_net_sigma},
                                  {"accidental_peaks", est.accidental_peaks},
                                  {"zero_delay_s", hist.delay_of(est.zero_bin)}});
        if (verbose) {
            std::cerr << "analyze: window " << w << " s -> CAR = " << est.car << " +/- "
                      << est.car_sigma << "\n";
        }
    }

    // Heralded g2 when the stream carries both splitter arms.
    const std::vector<std::int64_t> sig2_times = times_of(tags, TagChannel::sig2);
    if (!sig2_times.empty()) {
        const double w = an.g2h_window;
        // Time-reference every coincidence to the idler tag; compensate the
        // configured channel delays.
        const double delay_1 = cfg.timing.sig1_delay - cfg.timing.idler_delay;
        const double delay_2 = cfg.timing.sig2_delay - cfg.timing.idler_delay;
        const std::vector<std::int64_t> heralds_1 =
            pair_coincidence_times(tags, TagChannel::idler, TagChannel::sig1, w, delay_1);
        const std::vector<std::int64_t> idler_times = times_of(tags, TagChannel::idler);

        const CoincidenceHistogram h_12i =
            histogram_times(heralds_1, sig2_times, an.bin_width, an.span, rep_period);
        const CoincidenceHistogram h_2i =
            histogram_times(idler_times, sig2_times, an.bin_width, an.span, rep_period);

        // Anchor the zero-delay bin on the much richer twofold histogram.
        const std::size_t zero = calibrated_zero_bin(h_2i);
        const PeakSeries p_12i = windowed_peak_counts(h_12i, w, zero);
        const PeakSeries p_2i = windowed_peak_counts(h_2i, w, zero);
        if (p_12i.peak_offset != p_2i.peak_offset) {
            throw NumericalError("analyze: threefold and twofold peak grids disagree");
        }
        const G2hEstimate g2 =
            g2h_from_counts(p_12i.counts, p_2i.counts, p_12i.zero_pos, an.exclusion_bins);

        {
            std::ofstream out = open_out(out_dir / "g2h.csv");
            out << csv_header_comment(cfg);
            out << "peak_offset,delay_s,n_12i,n_2i,g2,g2_sigma\n";
            for (std::size_t i = 0; i < g2.g2.size(); ++i) {
                out << p_12i.peak_offset[i] << ','
                    << fmt(static_cast<double>(p_12i.peak_offset[i]) * rep_period) << ','
                    << fmt(p_12i.counts[i]) << ',' << fmt(p_2i.counts[i]) << ','
                    << fmt(g2.g2[i]) << ',' << fmt(g2.sigma[i]) << '\n';
            }
        }
        doc["g2h"] = {{"window_s", w},
                      {"value", g2.g2_zero},
                      {"sigma", g2.sigma_zero},
                      {"exclusion_bins", an.exclusion_bins},
                      {"peaks", g2.g2.size()},
                      {"single_photon", g2.g2_zero < 0.5}};
        if (verbose) {
            std::cerr << "analyze: g2h(0) = " << g2.g2_zero << " +/- " << g2.sigma_zero << "\n";
        }
    }
    write_json(out_dir / "summary.json", doc);
}

namespace {

struct SweepRow {
    OperatingPoint op;
    PowerSweepPoint point;
    ReducedObservables reduced;
    bool used = false;
};

} // namespace

void run_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed, bool verbose) {
    if (!cfg.sweep) throw ConfigError("config: 'sweep' section required for sweep");
    const SweepConfig& sw = *cfg.sweep;
    const bool monte = sw.model == "montecarlo";
    if (monte && !cfg.montecarlo) {
        throw ConfigError("config: 'montecarlo' section required for a montecarlo sweep");
    }
    ensure_dir(out_dir);

    const double rep = cfg.source.rep_rate;
    const double signal_window = cfg.analysis.windows.front();
    std::vector<SweepRow> rows;
    bool warned_low_gain = false;
    for (std::size_t idx = 0; idx < sw.powers.size(); ++idx) {
        SweepRow row;
        row.op = operating_point(cfg, sw.powers[idx]);
        const ChannelModel idler = make_idler_channel(cfg, row.op);
        const ChannelModel signal = make_signal_channel(cfg, row.op, signal_window);
        const DetectionProbabilities pred =
            detection_probabilities(cfg.source, row.op.pbar, idler, signal);
        if (pred.low_gain_warning && !warned_low_gain) {
            std::cerr << "warning: mu exceeds 0.1 inside the sweep; quadratic-model fits will "
                         "be biased at those points\n";
            warned_low_gain = true;
        }

        row.point.pbar = row.op.pbar;
        if (monte) {
            RunConfig point_cfg = cfg;
            point_cfg.montecarlo->power = sw.powers[idx];
            // One independent stream per sweep point.
            const std::uint64_t base_seed = seed.value_or(cfg.montecarlo->seed);
            ExperimentConfig ec = make_experiment(point_cfg, base_seed + idx);
            ec.hbt.reset(); // rate sweep uses the undivided signal channel
            const CountSummary c = simulate_counts(ec);
            const double pulses = static_cast<double>(c.pulses);
            row.point.rate_i = c.n_i / pulses * rep;
            row.point.rate_s = (c.n_1 + c.n_2) / pulses * rep;
            row.point.rate_si_net = (static_cast<double>(c.n_si_raw) -
                                     static_cast<double>(c.n_acc_estimate)) /
                                    pulses * rep;
            row.point.sigma_i = std::sqrt(std::max<double>(c.n_i, 1.0)) / pulses * rep;
            row.point.sigma_s =
                std::sqrt(std::max<double>(c.n_1 + c.n_2, 1.0)) / pulses * rep;
            row.point.sigma_si =
                std::sqrt(static_cast<double>(c.n_si_raw + c.n_acc_estimate) + 1.0) / pulses *
                rep;
        } else {
            row.point.rate_i = pred.p_i * rep;
            row.point.rate_s = pred.p_s * rep;
            row.point.rate_si_net = pred.p_si * rep;
        }
        row.reduced = reduce_observables(row.point, row.op.eta_on_i, row.op.eta_on_s,
                                         idler.eta_nd, pred.d_i, pred.d_s, rep);
        row.used = row.op.pbar <= sw.fit_max_pbar;
        rows.push_back(row);
    }

    std::vector<double> x, yi, ys, ysi, si, ss, ssi;
    for (const SweepRow& r : rows) {
        if (!r.used) continue;
        x.push_back(r.point.pbar);
        yi.push_back(r.reduced.y_i);
        ys.push_back(r.reduced.y_s);
        ysi.push_back(r.reduced.y_si);
        si.push_back(r.reduced.sigma_i);
        ss.push_back(r.reduced.sigma_s);
        ssi.push_back(r.reduced.sigma_si);
    }
    if (x.size() < 3) {
        throw NumericalError("sweep: fewer than 3 points below fit_max_pbar_w; cannot fit");
    }
    const bool weighted = monte;
    const QuadraticFit fit_i = quadratic_fit(x, yi, weighted ? si : std::vector<double>{});
    const QuadraticFit fit_s = quadratic_fit(x, ys, weighted ? ss : std::vector<double>{});
    const QuadraticFit fit_si = quadratic_fit(x, ysi, weighted ? ssi : std::vector<double>{});
    const SourceExtraction ext = extract_source_params(fit_i, fit_s, fit_si);

    {
        std::ofstream out = open_out(out_dir / "sweep.csv");
        out << csv_header_comment(cfg, seed);
        out << "p0_w,pbar_w,eta_on_i,eta_on_s,rate_i_cps,rate_s_cps,rate_si_net_cps,"
               "y_i,y_s,y_si,used_in_fit\n";
        for (const SweepRow& r : rows) {
            out << fmt(r.op.p0) << ',' << fmt(r.op.pbar) << ',' << fmt(r.op.eta_on_i) << ','
                << fmt(r.op.eta_on_s) << ',' << fmt(r.point.rate_i) << ',' << fmt(r.point.rate_s)
                << ',' << fmt(r.point.rate_si_net) << ',' << fmt(r.reduced.y_i) << ','
                << fmt(r.reduced.y_s) << ',' << fmt(r.reduced.y_si) << ',' << (r.used ? 1 : 0)
                << '\n';
        }
    }

    auto fit_json = [](const QuadraticFit& f) {
        return json{{"a", f.a},           {"sigma_a", f.sigma_a}, {"b", f.b},
                    {"sigma_b", f.sigma_b}, {"cov_ab", f.cov_ab},   {"chi2", f.chi2},
                    {"points", f.points}};
    };
    json doc;
    doc["meta"] = meta_block(cfg, monte ? std::optional<std::uint64_t>(
                                              seed.value_or(cfg.montecarlo->seed))
                                        : seed);
    doc["model"] = sw.model;
    doc["fit_max_pbar_w"] = sw.fit_max_pbar;
    doc["points_total"] = rows.size();
    doc["points_used"] = x.size();
    doc["fits"] = {{"y_i", fit_json(fit_i)}, {"y_s", fit_json(fit_s)}, {"y_si", fit_json(fit_si)}};
    doc["extraction"] = {{"xi_per_w2", ext.xi},
                         {"xi_sigma", ext.xi_sigma},
                         {"eta_i_off", ext.eta_i_off},
                         {"eta_i_off_sigma", ext.eta_i_off_sigma},
                         {"eta_s_off", ext.eta_s_off},
                         {"eta_s_off_sigma", ext.eta_s_off_sigma}};
    write_json(out_dir / "fit.json", doc);

    if (verbose) {
        std::cerr << "sweep: xi = " << ext.xi << " +/- " << ext.xi_sigma << " 1/W^2 over "
                  << x.size() << " points\n";
    }
}

void run_curves(const RunConfig& cfg, const std::filesystem::path& out_dir, bool verbose) {
    if (!cfg.sweep) throw ConfigError("config: 'sweep' section (powers_w) required for curves");
    ensure_dir(out_dir);

    const HbtSplit hbt = cfg.hbt.value_or(HbtSplit{});
    const AnalysisConfig& an = cfg.analysis;

    std::ofstream out = open_out(out_dir / "curves.csv");
    out << csv_header_comment(cfg);
    out << "# windows_s =";
    for (std::size_t i = 0; i < an.windows.size(); ++i) {
        out << (i == 0 ? " " : ",") << fmt(an.windows[i]);
    }
    out << "\n";
    out << "p0_w,pbar_w,mu,eta_on_i,eta_on_s";
    for (std::size_t i = 0; i < an.windows.size(); ++i) out << ",car_win" << (i + 1);
    out << ",n_net_cps,g2h_poisson,g2h_thermal,g2_unh,g2_unh_poisson,g2_unh_thermal\n";

    SourceParams poisson_src = cfg.source;
    poisson_src.statistics = PairStatistics::poisson;
    SourceParams thermal_src = cfg.source;
    thermal_src.statistics = PairStatistics::thermal;

    for (const double p0 : cfg.sweep->powers) {
        const OperatingPoint op = operating_point(cfg, p0);
        const ChannelModel idler = make_idler_channel(cfg, op);
        const ChannelModel arm1 = make_arm_channel(cfg, op, cfg.arm1);
        const ChannelModel arm2 = make_arm_channel(cfg, op, cfg.arm2);

        out << fmt(op.p0) << ',' << fmt(op.pbar) << ',' << fmt(op.mu) << ','
            << fmt(op.eta_on_i) << ',' << fmt(op.eta_on_s);
        for (const double w : an.windows) {
            const ChannelModel signal = make_signal_channel(cfg, op, w);
            out << ',' << fmt(car(cfg.source, op.pbar, idler, signal));
        }
        const ChannelModel signal0 = make_signal_channel(cfg, op, an.windows.front());
        out << ',' << fmt(net_coincidence_rate(cfg.source, op.pbar, idler, signal0));

        const G2hPrediction g2p = g2h_predicted(poisson_src, op.pbar, arm1, arm2, idler, hbt);
        const G2hPrediction g2t = g2h_predicted(thermal_src, op.pbar, arm1, arm2, idler, hbt);
        out << ',' << fmt(g2p.value) << ',' << fmt(g2t.value);

        // Unheralded signal-channel g2 diluted by the arm noise.
        const double s_prob = op.mu * signal0.efficiency();
        double d_prob = 0.0;
        if (cfg.hbt) {
            d_prob = (cfg.arm1.dark_rate > 0.0
                          ? dark_prob_signal(cfg.arm1.dark_rate, cfg.arm1.window)
                          : 0.0) +
                     (cfg.arm2.dark_rate > 0.0
                          ? dark_prob_signal(cfg.arm2.dark_rate, cfg.arm2.window)
                          : 0.0);
        } else if (cfg.signal.dark_rate > 0.0) {
            d_prob = dark_prob_signal(cfg.signal.dark_rate, an.windows.front());
        }
        d_prob += (cfg.arm1.linear_noise_per_w + cfg.arm2.linear_noise_per_w) * op.pbar;
        out << ',' << fmt(g2_unheralded(s_prob, d_prob, cfg.g2_true_unheralded));
        out << ',' << fmt(g2_unheralded(s_prob, d_prob, 1.0));
        out << ',' << fmt(g2_unheralded(s_prob, d_prob, 2.0));
        out << '\n';
    }
    if (!out) throw IoError("write failed for curves.csv");
    if (verbose) std::cerr << "curves: " << cfg.sweep->powers.size() << " power points\n";
}

int classify_exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return 4;
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) return 3;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e) != nullptr) return 4;
    return 1;
}

} // namespace pairsim
