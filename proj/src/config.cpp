#include "pairsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "pairsim/errors.hpp"

namespace pairsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback,
                  bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path + "." + key, "missing required value");
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

std::uint64_t get_uint(const json& j, const std::string& path, const char* key,
                       std::uint64_t fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path + "." + key, "missing required value");
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number_unsigned()) fail(path + "." + key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::vector<double> get_number_array(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) fail(path + "." + key, "missing required value");
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) fail(path + "." + key, "expected a non-empty array");
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) fail(path + "." + key, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void parse_source(const json& j, RunConfig& cfg) {
    require_object(j, "source");
    reject_unknown(j, "source", {"xi_per_w2", "rep_rate_hz", "statistics"});
    cfg.source.xi = get_number(j, "source", "xi_per_w2", 0.0, true);
    cfg.source.rep_rate = get_number(j, "source", "rep_rate_hz", 80.0e6, true);
    const std::string stats = get_string(j, "source", "statistics", "thermal");
    try {
        cfg.source.statistics = pair_statistics_from_string(stats);
    } catch (const std::invalid_argument& e) {
        fail("source.statistics", e.what());
    }
}

void parse_waveguide(const json& j, RunConfig& cfg) {
    require_object(j, "waveguide");
    reject_unknown(j, "waveguide",
                   {"length_m", "alpha_pump_per_m", "alpha_idler_per_m", "alpha_signal_per_m",
                    "beta_tpa_m_per_w", "gamma_xtpa_idler_m_per_w", "gamma_xtpa_signal_m_per_w",
                    "sigma_fca_m2", "carrier_factor", "a_eff_m2", "pump_split", "pulse_width_s",
                    "pump_wavelength_m", "grid_points"});
    WaveguideModel& wg = cfg.waveguide;
    wg.length = get_number(j, "waveguide", "length_m", wg.length, true);
    wg.alpha_pump = get_number(j, "waveguide", "alpha_pump_per_m", 0.0);
    wg.alpha_idler = get_number(j, "waveguide", "alpha_idler_per_m", 0.0);
    wg.alpha_signal = get_number(j, "waveguide", "alpha_signal_per_m", 0.0);
    wg.beta_tpa = get_number(j, "waveguide", "beta_tpa_m_per_w", 0.0);
    wg.gamma_xtpa_idler = get_number(j, "waveguide", "gamma_xtpa_idler_m_per_w", 0.0);
    wg.gamma_xtpa_signal = get_number(j, "waveguide", "gamma_xtpa_signal_m_per_w", 0.0);
    wg.sigma_fca = get_number(j, "waveguide", "sigma_fca_m2", 0.0);
    wg.carrier_factor = get_number(j, "waveguide", "carrier_factor", 1.0);
    wg.a_eff = get_number(j, "waveguide", "a_eff_m2", wg.a_eff, true);
    wg.pulse_width = get_number(j, "waveguide", "pulse_width_s", wg.pulse_width);
    wg.pump_wavelength = get_number(j, "waveguide", "pump_wavelength_m", wg.pump_wavelength);
    if (j.contains("pump_split")) {
        const json& v = j.at("pump_split");
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            fail("waveguide.pump_split", "expected an array of two numbers");
        }
        wg.pump_split = {v[0].get<double>(), v[1].get<double>()};
    }
    const std::uint64_t gp = get_uint(j, "waveguide", "grid_points", 2048);
    if (gp < 2 || gp > 100000000) fail("waveguide.grid_points", "expected an integer in [2, 1e8]");
    cfg.grid_points = static_cast<int>(gp);
}

void parse_channels(const json& j, RunConfig& cfg) {
    require_object(j, "channels");
    reject_unknown(j, "channels", {"idler", "signal", "arm1", "arm2"});
    if (!j.contains("idler") || !j.contains("signal")) {
        fail("channels", "both 'idler' and 'signal' are required");
    }

    const json& ji = j.at("idler");
    require_object(ji, "channels.idler");
    reject_unknown(ji, "channels.idler",
                   {"eta_off", "eta_nd", "eta_nd_psat_w", "dark_rate_cps", "gate_width_s",
                    "linear_noise_per_w"});
    cfg.idler.eta_off = get_number(ji, "channels.idler", "eta_off", 1.0, true);
    cfg.idler.eta_nd = get_number(ji, "channels.idler", "eta_nd", 1.0);
    if (ji.contains("eta_nd_psat_w")) {
        const double psat = get_number(ji, "channels.idler", "eta_nd_psat_w", 0.0);
        if (!(psat > 0.0)) fail("channels.idler.eta_nd_psat_w", "must be > 0");
        cfg.idler.eta_nd_psat = psat;
    }
    cfg.idler.dark_rate = get_number(ji, "channels.idler", "dark_rate_cps", 0.0);
    cfg.idler.gate_width = get_number(ji, "channels.idler", "gate_width_s", 1.9e-9);
    cfg.idler.linear_noise_per_w = get_number(ji, "channels.idler", "linear_noise_per_w", 0.0);

    const json& js = j.at("signal");
    require_object(js, "channels.signal");
    reject_unknown(js, "channels.signal", {"eta_off", "dark_rate_cps", "linear_noise_per_w"});
    cfg.signal.eta_off = get_number(js, "channels.signal", "eta_off", 1.0, true);
    cfg.signal.dark_rate = get_number(js, "channels.signal", "dark_rate_cps", 0.0);
    cfg.signal.linear_noise_per_w = get_number(js, "channels.signal", "linear_noise_per_w", 0.0);

    for (const char* name : {"arm1", "arm2"}) {
        if (!j.contains(name)) continue;
        const std::string path = std::string("channels.") + name;
        const json& ja = j.at(name);
        require_object(ja, path);
        reject_unknown(ja, path, {"dark_rate_cps", "window_s", "linear_noise_per_w"});
        ArmChannelConfig& arm = std::string(name) == "arm1" ? cfg.arm1 : cfg.arm2;
        arm.dark_rate = get_number(ja, path, "dark_rate_cps", 0.0);
        arm.window = get_number(ja, path, "window_s", 2.0e-9);
        arm.linear_noise_per_w = get_number(ja, path, "linear_noise_per_w", 0.0);
    }
}

void parse_hbt(const json& j, RunConfig& cfg) {
    require_object(j, "hbt");
    reject_unknown(j, "hbt", {"t2", "r2", "eta_bs"});
    HbtSplit hbt;
    hbt.t2 = get_number(j, "hbt", "t2", 0.5);
    hbt.r2 = get_number(j, "hbt", "r2", 0.5);
    hbt.eta_bs = get_number(j, "hbt", "eta_bs", 1.0);
    cfg.hbt = hbt;
}

void parse_sweep(const json& j, RunConfig& cfg) {
    require_object(j, "sweep");
    reject_unknown(j, "sweep", {"powers_w", "model", "fit_max_pbar_w"});
    SweepConfig sw;
    sw.powers = get_number_array(j, "sweep", "powers_w");
    sw.model = get_string(j, "sweep", "model", "analytic");
    if (sw.model != "analytic" && sw.model != "montecarlo") {
        fail("sweep.model", "expected 'analytic' or 'montecarlo'");
    }
    sw.fit_max_pbar = get_number(j, "sweep", "fit_max_pbar_w", 1e9);
    for (double p : sw.powers) {
        if (!(p >= 0.0)) fail("sweep.powers_w", "powers must be >= 0");
    }
    cfg.sweep = sw;
}

void parse_montecarlo(const json& j, RunConfig& cfg) {
    require_object(j, "montecarlo");
    reject_unknown(j, "montecarlo", {"pulses", "seed", "block_size", "power_w"});
    MonteCarloConfig mc;
    mc.pulses = get_uint(j, "montecarlo", "pulses", 0, true);
    mc.seed = get_uint(j, "montecarlo", "seed", 1);
    mc.block_size = get_uint(j, "montecarlo", "block_size", 65536);
    mc.power = get_number(j, "montecarlo", "power_w", 0.0, true);
    if (mc.pulses == 0) fail("montecarlo.pulses", "must be >= 1");
    if (mc.block_size == 0) fail("montecarlo.block_size", "must be >= 1");
    cfg.montecarlo = mc;
}

void parse_analysis(const json& j, RunConfig& cfg) {
    require_object(j, "analysis");
    reject_unknown(j, "analysis",
                   {"bin_width_s", "span_s", "windows_s", "exclusion_bins",
                    "min_accidental_peaks", "g2h_window_s"});
    AnalysisConfig& an = cfg.analysis;
    an.bin_width = get_number(j, "analysis", "bin_width_s", an.bin_width);
    an.span = get_number(j, "analysis", "span_s", an.span);
    if (j.contains("windows_s")) an.windows = get_number_array(j, "analysis", "windows_s");
    an.exclusion_bins = static_cast<int>(get_uint(j, "analysis", "exclusion_bins", 1));
    an.min_accidental_peaks =
        static_cast<int>(get_uint(j, "analysis", "min_accidental_peaks", 4));
    an.g2h_window = get_number(j, "analysis", "g2h_window_s", an.g2h_window);
    if (!(an.bin_width > 0.0)) fail("analysis.bin_width_s", "must be > 0");
    if (!(an.span >= an.bin_width)) fail("analysis.span_s", "must be >= bin_width_s");
    for (double w : an.windows) {
        if (!(w > 0.0)) fail("analysis.windows_s", "windows must be > 0");
    }
    if (an.min_accidental_peaks < 1) fail("analysis.min_accidental_peaks", "must be >= 1");
    if (!(an.g2h_window > 0.0)) fail("analysis.g2h_window_s", "must be > 0");
}

void parse_timing(const json& j, RunConfig& cfg) {
    require_object(j, "timing");
    reject_unknown(j, "timing", {"idler_delay_s", "sig1_delay_s", "sig2_delay_s",
                                 "jitter_sigma_s"});
    cfg.timing.idler_delay = get_number(j, "timing", "idler_delay_s", 0.0);
    cfg.timing.sig1_delay = get_number(j, "timing", "sig1_delay_s", 0.0);
    cfg.timing.sig2_delay = get_number(j, "timing", "sig2_delay_s", 0.0);
    cfg.timing.jitter_sigma = get_number(j, "timing", "jitter_sigma_s", 0.1e-9);
    if (!(cfg.timing.jitter_sigma >= 0.0)) fail("timing.jitter_sigma_s", "must be >= 0");
}

void parse_io(const json& j, RunConfig& cfg) {
    require_object(j, "io");
    reject_unknown(j, "io", {"out_dir", "tag_format"});
    cfg.io.out_dir = get_string(j, "io", "out_dir", "out");
    cfg.io.tag_format = get_string(j, "io", "tag_format", "csv");
    if (cfg.io.tag_format != "csv" && cfg.io.tag_format != "bin") {
        fail("io.tag_format", "expected 'csv' or 'bin'");
    }
}

} // namespace

std::string config_hash(const nlohmann::json& doc) {
    const std::string text = doc.dump();
    std::uint64_t h = 14695981039346656037ull; // FNV offset basis
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull; // FNV prime
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
    reject_unknown(doc, "",
                   {"source", "waveguide", "channels", "hbt", "sweep", "montecarlo", "analysis",
                    "timing", "g2", "filter", "io"});
    for (const char* req : {"source", "waveguide", "channels"}) {
        if (!doc.contains(req)) throw ConfigError(std::string("config: missing section '") + req + "'");
    }

    RunConfig cfg;
    parse_source(doc.at("source"), cfg);
    parse_waveguide(doc.at("waveguide"), cfg);
    parse_channels(doc.at("channels"), cfg);
    if (doc.contains("hbt")) parse_hbt(doc.at("hbt"), cfg);
    if (doc.contains("sweep")) parse_sweep(doc.at("sweep"), cfg);
    if (doc.contains("montecarlo")) parse_montecarlo(doc.at("montecarlo"), cfg);
    if (doc.contains("analysis")) parse_analysis(doc.at("analysis"), cfg);
    if (doc.contains("timing")) parse_timing(doc.at("timing"), cfg);
    if (doc.contains("io")) parse_io(doc.at("io"), cfg);
    if (doc.contains("g2")) {
        const json& jg = doc.at("g2");
        require_object(jg, "g2");
        reject_unknown(jg, "g2", {"unheralded_true"});
        cfg.g2_true_unheralded = get_number(jg, "g2", "unheralded_true", 1.0);
        if (!(cfg.g2_true_unheralded >= 0.0)) fail("g2.unheralded_true", "must be >= 0");
    }
    if (doc.contains("filter")) {
        const json& jf = doc.at("filter");
        require_object(jf, "filter");
        reject_unknown(jf, "filter", {"signal_fwhm_nm", "filter_fwhm_nm"});
        const double ws = get_number(jf, "filter", "signal_fwhm_nm", 0.0, true);
        const double wf = get_number(jf, "filter", "filter_fwhm_nm", 0.0, true);
        if (!(ws > 0.0) || !(wf > 0.0)) fail("filter", "FWHMs must be > 0");
        cfg.filter = std::make_pair(ws, wf);
    }

    // Semantic validation via the model types; report as configuration errors.
    try {
        cfg.source.validate();
        cfg.waveguide.validate();
        if (cfg.hbt) cfg.hbt->validate();
        auto unit = [](double v, const char* where) {
            if (!(v >= 0.0) || v > 1.0) {
                throw std::invalid_argument(std::string(where) + " must be in [0, 1]");
            }
        };
        unit(cfg.idler.eta_off, "channels.idler.eta_off");
        unit(cfg.signal.eta_off, "channels.signal.eta_off");
        if (!(cfg.idler.eta_nd > 0.0) || cfg.idler.eta_nd > 1.0) {
            throw std::invalid_argument("channels.idler.eta_nd must be in (0, 1]");
        }
        if (!(cfg.idler.dark_rate >= 0.0) || !(cfg.signal.dark_rate >= 0.0) ||
            !(cfg.arm1.dark_rate >= 0.0) || !(cfg.arm2.dark_rate >= 0.0)) {
            throw std::invalid_argument("channel dark rates must be >= 0");
        }
        if (!(cfg.arm1.window > 0.0) || !(cfg.arm2.window > 0.0)) {
            throw std::invalid_argument("arm windows must be > 0");
        }
        if (!(cfg.idler.gate_width > 0.0)) {
            throw std::invalid_argument("channels.idler.gate_width_s must be > 0");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    cfg.raw = doc;
    cfg.hash = config_hash(doc);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_run_config(doc);
}

} // namespace pairsim
