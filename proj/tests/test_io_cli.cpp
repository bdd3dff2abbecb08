// Configuration parsing, tag-stream serialization, and pipeline artifacts.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairsim/analytic_model.hpp"
#include "pairsim/coincidence.hpp"
#include "pairsim/config.hpp"
#include "pairsim/errors.hpp"
#include "pairsim/pipeline.hpp"
#include "pairsim/tagstream.hpp"
#include "pairsim/version.hpp"

using namespace pairsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh scratch directory under the system temp dir, wiped on entry so reruns
// start clean.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pairsim_io_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

// All non-comment rows of a CSV file; the first returned row is the header.
std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(split_csv(line));
    }
    return rows;
}

// Lossless waveguide: the pump propagates unchanged, so pbar == p0 and the
// on-chip efficiencies are exactly 1, which keeps the arithmetic transparent.
json base_doc() {
    json doc;
    doc["source"] = {{"xi_per_w2", 0.72}, {"rep_rate_hz", 80.0e6}, {"statistics", "thermal"}};
    doc["waveguide"] = {{"length_m", 0.015}, {"a_eff_m2", 1.0e-12}};
    doc["channels"] = {
        {"idler", {{"eta_off", 0.3}, {"dark_rate_cps", 620.0}, {"gate_width_s", 1.9e-9}}},
        {"signal", {{"eta_off", 0.2}, {"dark_rate_cps", 2150.0}}},
        {"arm1", {{"dark_rate_cps", 1150.0}, {"window_s", 2.0e-9}}},
        {"arm2", {{"dark_rate_cps", 1160.0}, {"window_s", 2.0e-9}}}};
    doc["hbt"] = {{"t2", 0.5}, {"r2", 0.5}, {"eta_bs", 1.0}};
    doc["analysis"] = {{"bin_width_s", 50.0e-12},
                       {"span_s", 312.5e-9},
                       {"windows_s", {1.1e-9, 2.0e-9}},
                       {"g2h_window_s", 2.0e-9}};
    doc["timing"] = {{"idler_delay_s", 3.2e-9},
                     {"sig1_delay_s", 1.1e-9},
                     {"sig2_delay_s", 1.15e-9},
                     {"jitter_sigma_s", 0.1e-9}};
    return doc;
}

void check_config_error(json doc, const std::string& needle) {
    try {
        parse_run_config(doc);
        FAIL_CHECK("expected ConfigError mentioning '" << needle << "'");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK_MESSAGE(what.find(needle) != std::string::npos,
                      "'" << what << "' does not mention '" << needle << "'");
    }
}

} // namespace

TEST_CASE("config: minimal document parses with documented defaults") {
    json doc;
    doc["source"] = {{"xi_per_w2", 0.5}, {"rep_rate_hz", 80.0e6}};
    doc["waveguide"] = {{"length_m", 0.01}, {"a_eff_m2", 1.0e-12}};
    doc["channels"] = {{"idler", {{"eta_off", 0.1}}}, {"signal", {{"eta_off", 0.2}}}};

    const RunConfig cfg = parse_run_config(doc);
    CHECK(cfg.source.xi == 0.5);
    CHECK(cfg.source.rep_rate == 80.0e6);
    CHECK(cfg.source.statistics == PairStatistics::thermal);
    CHECK(cfg.grid_points == 2048);
    CHECK(cfg.idler.eta_off == 0.1);
    CHECK(cfg.idler.eta_nd == 1.0);
    CHECK_FALSE(cfg.idler.eta_nd_psat.has_value());
    CHECK(cfg.idler.dark_rate == 0.0);
    CHECK(cfg.idler.gate_width == doctest::Approx(1.9e-9));
    CHECK(cfg.signal.eta_off == 0.2);
    CHECK(cfg.arm1.window == doctest::Approx(2.0e-9));
    CHECK_FALSE(cfg.hbt.has_value());
    CHECK_FALSE(cfg.sweep.has_value());
    CHECK_FALSE(cfg.montecarlo.has_value());
    CHECK_FALSE(cfg.filter.has_value());
    CHECK(cfg.analysis.bin_width == doctest::Approx(50.0e-12));
    CHECK(cfg.analysis.span == doctest::Approx(312.5e-9));
    REQUIRE(cfg.analysis.windows.size() == 1);
    CHECK(cfg.analysis.windows[0] == doctest::Approx(1.1e-9));
    CHECK(cfg.analysis.exclusion_bins == 1);
    CHECK(cfg.analysis.min_accidental_peaks == 4);
    CHECK(cfg.timing.jitter_sigma == doctest::Approx(0.1e-9));
    CHECK(cfg.g2_true_unheralded == 1.0);
    CHECK(cfg.io.out_dir == "out");
    CHECK(cfg.io.tag_format == "csv");
    CHECK(cfg.hash == config_hash(doc));
    CHECK(cfg.raw == doc);
}

TEST_CASE("config: optional sections land in their fields") {
    json doc = base_doc();
    doc["sweep"] = {{"powers_w", {0.04, 0.08, 0.12}}, {"fit_max_pbar_w", 0.1}};
    doc["montecarlo"] = {{"pulses", 1000u}, {"seed", 99u}, {"block_size", 128u},
                         {"power_w", 0.2}};
    doc["g2"] = {{"unheralded_true", 1.67}};
    doc["filter"] = {{"signal_fwhm_nm", 5.1}, {"filter_fwhm_nm", 1.15}};
    doc["io"] = {{"out_dir", "results"}, {"tag_format", "bin"}};
    doc["channels"]["idler"]["eta_nd"] = 0.9;
    doc["channels"]["idler"]["eta_nd_psat_w"] = 0.5;

    const RunConfig cfg = parse_run_config(doc);
    REQUIRE(cfg.hbt.has_value());
    CHECK(cfg.hbt->t2 == 0.5);
    REQUIRE(cfg.sweep.has_value());
    CHECK(cfg.sweep->powers == std::vector<double>{0.04, 0.08, 0.12});
    CHECK(cfg.sweep->model == "analytic");
    CHECK(cfg.sweep->fit_max_pbar == doctest::Approx(0.1));
    REQUIRE(cfg.montecarlo.has_value());
    CHECK(cfg.montecarlo->pulses == 1000);
    CHECK(cfg.montecarlo->seed == 99);
    CHECK(cfg.montecarlo->block_size == 128);
    CHECK(cfg.montecarlo->power == doctest::Approx(0.2));
    CHECK(cfg.g2_true_unheralded == doctest::Approx(1.67));
    REQUIRE(cfg.filter.has_value());
    CHECK(cfg.filter->first == doctest::Approx(5.1));
    CHECK(cfg.filter->second == doctest::Approx(1.15));
    CHECK(cfg.io.out_dir == "results");
    CHECK(cfg.io.tag_format == "bin");
    CHECK(cfg.idler.eta_nd == doctest::Approx(0.9));
    REQUIRE(cfg.idler.eta_nd_psat.has_value());
    CHECK(*cfg.idler.eta_nd_psat == doctest::Approx(0.5));
    REQUIRE(cfg.analysis.windows.size() == 2);
    CHECK(cfg.timing.idler_delay == doctest::Approx(3.2e-9));
}

TEST_CASE("config: diagnostics carry the dotted path of the offending field") {
    // Missing required sections and values.
    {
        json doc = base_doc();
        doc.erase("source");
        check_config_error(doc, "missing section 'source'");
    }
    {
        json doc = base_doc();
        doc["source"].erase("xi_per_w2");
        check_config_error(doc, "source.xi_per_w2");
    }
    {
        json doc = base_doc();
        doc["waveguide"].erase("length_m");
        check_config_error(doc, "waveguide.length_m");
    }
    {
        json doc = base_doc();
        doc["channels"]["idler"].erase("eta_off");
        check_config_error(doc, "channels.idler.eta_off");
    }
    {
        json doc = base_doc();
        doc["channels"].erase("signal");
        check_config_error(doc, "channels");
    }

    // Unknown keys are rejected with their full path.
    {
        json doc = base_doc();
        doc["detectors"] = json::object();
        check_config_error(doc, "detectors");
    }
    {
        json doc = base_doc();
        doc["waveguide"]["alpha_pump"] = 18.0; // missing the _per_m suffix
        check_config_error(doc, "waveguide.alpha_pump");
    }
    {
        json doc = base_doc();
        doc["channels"]["signal"]["gate_width_s"] = 1e-9; // idler-only field
        check_config_error(doc, "channels.signal.gate_width_s");
    }

    // Type errors.
    {
        json doc = base_doc();
        doc["source"]["xi_per_w2"] = "0.72";
        check_config_error(doc, "source.xi_per_w2");
    }
    {
        json doc = base_doc();
        doc["montecarlo"] = {{"pulses", -5}, {"power_w", 0.1}};
        check_config_error(doc, "montecarlo.pulses");
    }
    {
        json doc = base_doc();
        doc["sweep"] = {{"powers_w", json::array()}};
        check_config_error(doc, "sweep.powers_w");
    }

    // Value constraints.
    {
        json doc = base_doc();
        doc["montecarlo"] = {{"pulses", 0u}, {"power_w", 0.1}};
        check_config_error(doc, "montecarlo.pulses");
    }
    {
        json doc = base_doc();
        doc["sweep"] = {{"powers_w", {0.1}}, {"model", "banana"}};
        check_config_error(doc, "sweep.model");
    }
    {
        json doc = base_doc();
        doc["io"] = {{"tag_format", "xml"}};
        check_config_error(doc, "io.tag_format");
    }
    {
        json doc = base_doc();
        doc["analysis"]["bin_width_s"] = 0.0;
        check_config_error(doc, "analysis.bin_width_s");
    }
    {
        json doc = base_doc();
        doc["channels"]["idler"]["eta_off"] = 1.5;
        check_config_error(doc, "channels.idler.eta_off");
    }
    {
        json doc = base_doc();
        doc["channels"]["idler"]["eta_nd"] = 0.0;
        check_config_error(doc, "channels.idler.eta_nd");
    }
    {
        json doc = base_doc();
        doc["channels"]["idler"]["eta_nd_psat_w"] = 0.0;
        check_config_error(doc, "channels.idler.eta_nd_psat_w");
    }
    {
        json doc = base_doc();
        doc["timing"]["jitter_sigma_s"] = -1.0e-9;
        check_config_error(doc, "timing.jitter_sigma_s");
    }
    {
        json doc = base_doc();
        doc["g2"] = {{"unheralded_true", -0.5}};
        check_config_error(doc, "g2.unheralded_true");
    }
    {
        json doc = base_doc();
        doc["filter"] = {{"signal_fwhm_nm", 5.1}};
        check_config_error(doc, "filter.filter_fwhm_nm");
    }

    // Semantic validation routed through the model types.
    {
        json doc = base_doc();
        doc["waveguide"]["pump_split"] = {0.3, 0.3};
        CHECK_THROWS_AS(parse_run_config(doc), ConfigError);
    }
    {
        json doc = base_doc();
        doc["hbt"] = {{"t2", 0.9}, {"r2", 0.3}};
        CHECK_THROWS_AS(parse_run_config(doc), ConfigError);
    }
    CHECK_THROWS_AS(parse_run_config(json::array({1, 2})), ConfigError);
}

TEST_CASE("config: hash is FNV-1a over the canonical serialization") {
    // Reference values computed independently from the FNV-1a definition.
    CHECK(config_hash(json::object()) == "08f44b07b5901a25");
    CHECK(config_hash(json{{"a", 1}}) == "9c3e82dd6fcae8b1");

    const std::string h = config_hash(base_doc());
    REQUIRE(h.size() == 16);
    for (const char c : h) {
        CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
    }

    // Stable across parses, sensitive to any value change.
    CHECK(parse_run_config(base_doc()).hash == h);
    json other = base_doc();
    other["source"]["xi_per_w2"] = 0.73;
    CHECK(parse_run_config(other).hash != h);
}

TEST_CASE("config: load_run_config reads files and ignores formatting") {
    const fs::path dir = scratch("config_files");
    const json doc = base_doc();

    {
        std::ofstream out(dir / "compact.json");
        out << doc.dump();
    }
    {
        std::ofstream out(dir / "pretty.json");
        out << doc.dump(4) << "\n\n";
    }
    const RunConfig a = load_run_config(dir / "compact.json");
    const RunConfig b = load_run_config(dir / "pretty.json");
    CHECK(a.hash == b.hash);
    CHECK(a.hash == config_hash(doc));
    CHECK(a.source.xi == 0.72);

    CHECK_THROWS_AS(load_run_config(dir / "nope.json"), IoError);
    {
        std::ofstream out(dir / "broken.json");
        out << "{ \"source\": ";
    }
    try {
        load_run_config(dir / "broken.json");
        FAIL_CHECK("expected a parse failure");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
}

TEST_CASE("tags: CSV round trip preserves every record") {
    const fs::path dir = scratch("tags_csv");
    std::mt19937_64 gen(123);
    TagStream tags;
    std::int64_t t = -5000; // negative times are legal in the format
    for (int i = 0; i < 5000; ++i) {
        t += static_cast<std::int64_t>(gen() % 100000);
        tags.push_back({t, static_cast<TagChannel>(gen() % 3)});
    }

    const FileMeta meta{kVersion, "deadbeefdeadbeef", 42};
    write_tags_csv(dir / "tags.csv", tags, &meta);
    const TagStream back = read_tags_csv(dir / "tags.csv");
    CHECK(back == tags);

    const std::string text = slurp(dir / "tags.csv");
    CHECK(text.rfind("# pairsim tags", 0) == 0);
    CHECK(text.find("config_hash=deadbeefdeadbeef") != std::string::npos);
    CHECK(text.find("time_ps,channel\n") != std::string::npos);

    // Without metadata the file starts directly with the column header.
    write_tags_csv(dir / "bare.csv", {}, nullptr);
    CHECK(slurp(dir / "bare.csv") == "time_ps,channel\n");
    CHECK(read_tags_csv(dir / "bare.csv").empty());
}

TEST_CASE("tags: binary round trip uses fixed 9-byte records") {
    const fs::path dir = scratch("tags_bin");
    const TagStream tags = {
        {std::numeric_limits<std::int64_t>::min(), TagChannel::idler},
        {-1, TagChannel::sig2},
        {0, TagChannel::sig1},
        {1234567890123456789, TagChannel::idler},
        {std::numeric_limits<std::int64_t>::max(), TagChannel::sig2},
    };
    write_tags_binary(dir / "tags.bin", tags);
    CHECK(fs::file_size(dir / "tags.bin") == 9 * tags.size());
    CHECK(read_tags_binary(dir / "tags.bin") == tags);

    // Extension dispatch picks the matching codec.
    write_tags(dir / "auto.bin", tags);
    CHECK(fs::file_size(dir / "auto.bin") == 9 * tags.size());
    CHECK(read_tags(dir / "auto.bin") == tags);
    write_tags(dir / "auto.csv", tags);
    CHECK(read_tags(dir / "auto.csv") == tags);
}

TEST_CASE("tags: malformed inputs are rejected") {
    const fs::path dir = scratch("tags_bad");
    auto write_text = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name);
        out << body;
        return dir / name;
    };

    CHECK_THROWS_AS(read_tags_csv(dir / "missing.csv"), IoError);
    CHECK_THROWS_AS(read_tags_csv(write_text("chan.csv", "time_ps,channel\n10,7\n")), IoError);
    CHECK_THROWS_AS(read_tags_csv(write_text("text.csv", "time_ps,channel\nabc,1\n")), IoError);
    CHECK_THROWS_AS(read_tags_csv(write_text("comma.csv", "time_ps,channel\n125000\n")), IoError);

    {
        std::ofstream out(dir / "short.bin", std::ios::binary);
        const char bytes[10] = {};
        out.write(bytes, sizeof bytes); // not a multiple of the record size
    }
    CHECK_THROWS_AS(read_tags_binary(dir / "short.bin"), IoError);
    {
        std::ofstream out(dir / "chan.bin", std::ios::binary);
        char rec[9] = {};
        rec[8] = 5; // channel byte out of range
        out.write(rec, sizeof rec);
    }
    CHECK_THROWS_AS(read_tags_binary(dir / "chan.bin"), IoError);
}

TEST_CASE("pipeline: operating point and channel assembly") {
    const RunConfig cfg = parse_run_config(base_doc());

    // Lossless waveguide: identity propagation.
    const OperatingPoint op = operating_point(cfg, 0.26);
    CHECK(op.p0 == 0.26);
    CHECK(op.pbar == doctest::Approx(0.26).epsilon(1e-12));
    CHECK(op.eta_on_i == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(op.eta_on_s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(op.mu == doctest::Approx(0.72 * 0.26 * 0.26).epsilon(1e-12));

    SUBCASE("gate nonlinearity saturates with pump power") {
        IdlerChannelConfig idler = cfg.idler;
        idler.eta_nd = 0.9;
        CHECK(resolve_eta_nd(idler, 0.25) == doctest::Approx(0.9));
        idler.eta_nd_psat = 0.5;
        CHECK(resolve_eta_nd(idler, 0.25) == doctest::Approx(0.9 / 1.5).epsilon(1e-15));
        CHECK(resolve_eta_nd(idler, 0.0) == doctest::Approx(0.9));
    }

    SUBCASE("experiment assembly maps configuration onto the simulator") {
        json doc = base_doc();
        doc["montecarlo"] = {{"pulses", 1000u}, {"seed", 99u}, {"block_size", 128u},
                             {"power_w", 0.2}};
        const RunConfig mc_cfg = parse_run_config(doc);
        const ExperimentConfig ec = make_experiment(mc_cfg, {});
        CHECK(ec.pulses == 1000);
        CHECK(ec.seed == 99);
        CHECK(ec.block_size == 128);
        CHECK(ec.rep_period == doctest::Approx(1.25e-8).epsilon(1e-12));
        CHECK(ec.pbar == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(ec.idler.eta_off == doctest::Approx(0.3));
        CHECK(ec.idler.window == doctest::Approx(1.9e-9));
        CHECK(ec.signal.window == doctest::Approx(1.1e-9)); // first analysis window
        REQUIRE(ec.hbt.has_value());
        CHECK(ec.arm1.dark_rate == doctest::Approx(1150.0));
        CHECK(ec.arm2.dark_rate == doctest::Approx(1160.0));
        CHECK(ec.timing.idler_delay == doctest::Approx(3.2e-9));

        const ExperimentConfig ec2 = make_experiment(mc_cfg, std::uint64_t{5});
        CHECK(ec2.seed == 5); // explicit seed wins over the configured one

        CHECK_THROWS_AS(make_experiment(cfg, {}), ConfigError); // no montecarlo section
    }
}

TEST_CASE("pipeline: simulate writes deterministic artifacts") {
    json doc = base_doc();
    doc["montecarlo"] = {{"pulses", 1048576u}, {"seed", 20240816u}, {"power_w", 0.26}};
    const RunConfig cfg = parse_run_config(doc);

    const fs::path dir_a = scratch("sim_a");
    const fs::path dir_b = scratch("sim_b");
    const fs::path dir_c = scratch("sim_c");
    run_simulate(cfg, dir_a, std::uint64_t{777});
    run_simulate(cfg, dir_b, std::uint64_t{777});
    run_simulate(cfg, dir_c, std::uint64_t{778});

    REQUIRE(fs::exists(dir_a / "tags.csv"));
    REQUIRE(fs::exists(dir_a / "counts.json"));
    CHECK(slurp(dir_a / "tags.csv") == slurp(dir_b / "tags.csv"));
    CHECK(slurp(dir_a / "counts.json") == slurp(dir_b / "counts.json"));
    CHECK(slurp(dir_a / "tags.csv") != slurp(dir_c / "tags.csv"));

    const json counts = read_json_file(dir_a / "counts.json");
    CHECK(counts["meta"]["tool"] == "pairsim");
    CHECK(counts["meta"]["version"] == kVersion);
    CHECK(counts["meta"]["config_hash"] == cfg.hash);
    CHECK(counts["meta"]["seed"] == 777);
    CHECK(counts["meta"]["tag_file"] == "tags.csv");
    CHECK(counts["counts"]["pulses"] == 1048576);

    // Operating point and per-pulse model restated in the artifact.
    const double mu = 0.72 * 0.26 * 0.26;
    CHECK(counts["operating_point"]["pbar_w"].get<double>() ==
          doctest::Approx(0.26).epsilon(1e-12));
    CHECK(counts["operating_point"]["mu"].get<double>() == doctest::Approx(mu).epsilon(1e-12));
    CHECK(counts["analytic"]["d_i"].get<double>() == doctest::Approx(7.75e-6).epsilon(1e-12));
    CHECK(counts["analytic"]["d_s"].get<double>() ==
          doctest::Approx(2.3649972e-6).epsilon(1e-6));
    CHECK(counts["analytic"]["low_gain_warning"] == false);

    // Quoted rates are exact arithmetic over the stored counts.
    const double pulses = counts["counts"]["pulses"].get<double>();
    const double n_i = counts["counts"]["n_i"].get<double>();
    CHECK(counts["rates_hz"]["idler"].get<double>() ==
          doctest::Approx(n_i / pulses * 80.0e6).epsilon(1e-12));
    CHECK(n_i > 0);

    // The tag stream itself is sorted and carries the provenance comment.
    const TagStream tags = read_tags(dir_a / "tags.csv");
    CHECK(!tags.empty());
    CHECK(is_time_sorted(tags));
    CHECK(slurp(dir_a / "tags.csv").find(cfg.hash) != std::string::npos);
}

TEST_CASE("pipeline: analyze reports windows and the heralded g2") {
    json doc = base_doc();
    doc["montecarlo"] = {{"pulses", 1048576u}, {"seed", 20240816u}, {"power_w", 0.26}};
    const RunConfig cfg = parse_run_config(doc);
    const fs::path sim_dir = scratch("ana_sim");
    const fs::path out_dir = scratch("ana_out");
    run_simulate(cfg, sim_dir, std::uint64_t{777});
    run_analyze(cfg, sim_dir / "tags.csv", out_dir);

    REQUIRE(fs::exists(out_dir / "histogram.csv"));
    REQUIRE(fs::exists(out_dir / "summary.json"));
    REQUIRE(fs::exists(out_dir / "g2h.csv"));

    // The CSV histogram reproduces the in-memory histogram bin by bin.
    const TagStream tags = read_tags(sim_dir / "tags.csv");
    const CoincidenceHistogram hist =
        histogram(tags, TagChannel::idler, TagChannel::sig1, cfg.analysis.bin_width,
                  cfg.analysis.span, 1.0 / cfg.source.rep_rate);
    const auto rows = read_csv_rows(out_dir / "histogram.csv");
    REQUIRE(rows.size() == hist.size() + 1);
    CHECK(rows[0] == std::vector<std::string>{"delay_s", "counts"});
    for (std::size_t b = 0; b < hist.size(); b += 997) { // sample the grid
        CHECK(std::stod(rows[b + 1][0]) ==
              doctest::Approx(hist.delay_of(b)).epsilon(1e-10));
        CHECK(std::stoull(rows[b + 1][1]) == hist.counts[b]);
    }

    const json summary = read_json_file(out_dir / "summary.json");
    CHECK(summary["meta"]["config_hash"] == cfg.hash);
    REQUIRE(summary["windows"].size() == 2);
    const json& w0 = summary["windows"][0];
    CHECK(w0["window_s"].get<double>() == doctest::Approx(1.1e-9));
    CHECK(w0["window_effective_s"].get<double>() == doctest::Approx(1.15e-9));
    CHECK(summary["windows"][1]["window_effective_s"].get<double>() ==
          doctest::Approx(2.05e-9));
    CHECK(w0["n_raw"].get<double>() > w0["n_acc"].get<double>());
    CHECK(w0["car"].get<double>() > 1.0);
    CHECK(w0["car_sigma"].get<double>() > 0.0);
    // Zero-delay peak sits at the configured relative channel delay.
    const double expected_delay = (1.1e-9 - 3.2e-9);
    CHECK(std::abs(w0["zero_delay_s"].get<double>() - expected_delay) < 1.5e-10);

    REQUIRE(summary.contains("g2h"));
    const double g2h = summary["g2h"]["value"].get<double>();
    CHECK(g2h > 0.0);
    CHECK(summary["g2h"]["sigma"].get<double>() > 0.0);
    CHECK(summary["g2h"]["single_photon"].get<bool>() == (g2h < 0.5));
    const auto g2_rows = read_csv_rows(out_dir / "g2h.csv");
    REQUIRE(g2_rows.size() == summary["g2h"]["peaks"].get<std::size_t>() + 1);
    CHECK(g2_rows[0] == std::vector<std::string>{"peak_offset", "delay_s", "n_12i", "n_2i",
                                                 "g2", "g2_sigma"});

    SUBCASE("binary tag streams are accepted") {
        json bin_doc = doc;
        bin_doc["io"] = {{"tag_format", "bin"}};
        bin_doc["montecarlo"]["pulses"] = 524288u;
        const RunConfig bin_cfg = parse_run_config(bin_doc);
        const fs::path bin_sim = scratch("ana_sim_bin");
        const fs::path bin_out = scratch("ana_out_bin");
        run_simulate(bin_cfg, bin_sim, std::uint64_t{11});
        REQUIRE(fs::exists(bin_sim / "tags.bin"));
        CHECK(fs::file_size(bin_sim / "tags.bin") % 9 == 0);
        run_analyze(bin_cfg, bin_sim / "tags.bin", bin_out);
        CHECK(fs::exists(bin_out / "summary.json"));
    }

    SUBCASE("degenerate streams are refused") {
        const fs::path bad_dir = scratch("ana_bad");
        write_tags_csv(bad_dir / "empty.csv", {}, nullptr);
        CHECK_THROWS_AS(run_analyze(cfg, bad_dir / "empty.csv", bad_dir), NumericalError);
        write_tags_csv(bad_dir / "unsorted.csv",
                       {{100, TagChannel::idler}, {50, TagChannel::sig1}}, nullptr);
        CHECK_THROWS_AS(run_analyze(cfg, bad_dir / "unsorted.csv", bad_dir), NumericalError);
    }
}

TEST_CASE("pipeline: analytic sweep recovers the source parameters exactly") {
    json doc = base_doc();
    doc["sweep"] = {{"powers_w", {0.04, 0.06, 0.08, 0.10, 0.12, 0.15}},
                    {"model", "analytic"},
                    {"fit_max_pbar_w", 0.13}};
    const RunConfig cfg = parse_run_config(doc);
    const fs::path dir = scratch("sweep_analytic");
    run_sweep(cfg, dir, {});

    const json fit = read_json_file(dir / "fit.json");
    CHECK(fit["model"] == "analytic");
    CHECK(fit["points_total"] == 6);
    CHECK(fit["points_used"] == 5); // pbar == p0 here, so 0.15 W is excluded
    CHECK(fit["extraction"]["xi_per_w2"].get<double>() ==
          doctest::Approx(0.72).epsilon(1e-9));
    CHECK(fit["extraction"]["eta_i_off"].get<double>() ==
          doctest::Approx(0.3).epsilon(1e-9));
    CHECK(fit["extraction"]["eta_s_off"].get<double>() ==
          doctest::Approx(0.2).epsilon(1e-9));
    CHECK(fit["fits"]["y_i"]["a"].get<double>() ==
          doctest::Approx(0.72 * 0.3).epsilon(1e-9));
    CHECK(fit["fits"]["y_si"]["a"].get<double>() ==
          doctest::Approx(0.72 * 0.3 * 0.2).epsilon(1e-9));

    const auto rows = read_csv_rows(dir / "sweep.csv");
    REQUIRE(rows.size() == 7);
    const std::vector<std::string> header = rows[0];
    REQUIRE(header.size() == 11);
    CHECK(header[0] == "p0_w");
    CHECK(header[10] == "used_in_fit");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        REQUIRE(rows[r].size() == 11);
        const double p0 = std::stod(rows[r][0]);
        const double pbar = std::stod(rows[r][1]);
        CHECK(pbar == doctest::Approx(p0).epsilon(1e-12)); // lossless waveguide
        CHECK(rows[r][10] == (pbar <= 0.13 ? "1" : "0"));
        const double y_i = std::stod(rows[r][7]);
        CHECK(y_i == doctest::Approx(0.72 * 0.3 * pbar * pbar).epsilon(1e-9));
    }

    SUBCASE("too few points below the cutoff is an error") {
        json tight = doc;
        tight["sweep"]["fit_max_pbar_w"] = 0.05;
        CHECK_THROWS_AS(run_sweep(parse_run_config(tight), scratch("sweep_tight"), {}),
                        NumericalError);
    }
    SUBCASE("sweep section is required") {
        CHECK_THROWS_AS(run_sweep(parse_run_config(base_doc()), scratch("sweep_none"), {}),
                        ConfigError);
    }
    SUBCASE("montecarlo sweeps need the montecarlo section") {
        json mc = doc;
        mc["sweep"]["model"] = "montecarlo";
        CHECK_THROWS_AS(run_sweep(parse_run_config(mc), scratch("sweep_nomc"), {}),
                        ConfigError);
    }
}

TEST_CASE("pipeline: montecarlo sweep lands near the configured source") {
    json doc = base_doc();
    doc["sweep"] = {{"powers_w", {0.06, 0.08, 0.10, 0.12, 0.15}}, {"model", "montecarlo"}};
    doc["montecarlo"] = {{"pulses", 524288u}, {"seed", 4242u}, {"power_w", 0.1}};
    const RunConfig cfg = parse_run_config(doc);
    const fs::path dir = scratch("sweep_mc");
    run_sweep(cfg, dir, {});

    const json fit = read_json_file(dir / "fit.json");
    CHECK(fit["model"] == "montecarlo");
    CHECK(fit["points_used"] == 5);
    const double xi = fit["extraction"]["xi_per_w2"].get<double>();
    const double xi_sigma = fit["extraction"]["xi_sigma"].get<double>();
    CHECK(std::isfinite(xi));
    CHECK(xi_sigma > 0.0);
    // Counting noise at ~5e5 pulses per point keeps this within a few percent.
    CHECK(std::abs(xi - 0.72) < 5.0 * xi_sigma);
    CHECK(std::abs(xi - 0.72) < 0.2);
}

TEST_CASE("pipeline: curve families match the closed forms") {
    json doc = base_doc();
    doc["sweep"] = {{"powers_w", {0.04, 0.08, 0.12, 0.16, 0.20}}};
    doc["g2"] = {{"unheralded_true", 1.67}};
    // Noise-free detectors so every column has an exact closed form.
    for (const char* ch : {"idler", "signal", "arm1", "arm2"}) {
        doc["channels"][ch]["dark_rate_cps"] = 0.0;
    }
    const RunConfig cfg = parse_run_config(doc);
    const fs::path dir = scratch("curves");
    run_curves(cfg, dir);

    const auto rows = read_csv_rows(dir / "curves.csv");
    REQUIRE(rows.size() == 6);
    const std::vector<std::string> header = rows[0];
    REQUIRE(header.size() == 13); // two configured windows
    CHECK(header[5] == "car_win1");
    CHECK(header[6] == "car_win2");
    CHECK(header[12] == "g2_unh_thermal");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        REQUIRE(rows[r].size() == 13);
        const double pbar = std::stod(rows[r][1]);
        const double mu = std::stod(rows[r][2]);
        CHECK(mu == doctest::Approx(0.72 * pbar * pbar).epsilon(1e-9));
        // Noise-free CAR is exactly 1/mu for any window.
        CHECK(std::stod(rows[r][5]) * mu == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::stod(rows[r][6]) * mu == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::stod(rows[r][7]) ==
              doctest::Approx(mu * 0.3 * 0.2 * 80.0e6).epsilon(1e-9));
        const double g2h_p = std::stod(rows[r][8]);
        const double g2h_t = std::stod(rows[r][9]);
        CHECK(g2h_p == doctest::Approx(mu * (mu + 2.0) / ((mu + 1.0) * (mu + 1.0)))
                           .epsilon(1e-6));
        CHECK(g2h_t == doctest::Approx(mu * (6.0 * mu + 4.0) /
                                       ((2.0 * mu + 1.0) * (2.0 * mu + 1.0)))
                           .epsilon(1e-6));
        CHECK(g2h_t > g2h_p);
        // Zero noise leaves the intrinsic unheralded statistics untouched.
        CHECK(std::stod(rows[r][10]) == doctest::Approx(1.67).epsilon(1e-9));
        CHECK(std::stod(rows[r][11]) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::stod(rows[r][12]) == doctest::Approx(2.0).epsilon(1e-9));
    }

    CHECK_THROWS_AS(run_curves(parse_run_config(base_doc()), scratch("curves_none")),
                    ConfigError);
}

TEST_CASE("pipeline: exit codes map the exception families") {
    CHECK(classify_exit_code(ConfigError("x")) == 2);
    CHECK(classify_exit_code(NumericalError("x")) == 3);
    CHECK(classify_exit_code(std::invalid_argument("x")) == 3);
    CHECK(classify_exit_code(IoError("x")) == 4);
    CHECK(classify_exit_code(std::filesystem::filesystem_error(
              "x", std::error_code(2, std::generic_category()))) == 4);
    CHECK(classify_exit_code(std::runtime_error("x")) == 1);
}
