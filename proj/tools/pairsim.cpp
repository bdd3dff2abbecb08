// pairsim command-line interface: simulate / analyze / sweep / curves.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "pairsim/pipeline.hpp"
#include "pairsim/version.hpp"

namespace {

void apply_thread_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairsim: heralded photon-pair source simulator and analysis toolkit"};
    app.set_version_flag("--version", std::string(pairsim::kVersion));
    app.require_subcommand(1);

    int threads = 0;
    if (const char* env = std::getenv("PAIRSIM_THREADS")) {
        threads = std::atoi(env);
    }
    app.add_option("--threads", threads, "worker thread count (default: OpenMP runtime)");
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "chatty progress output on stderr");

    std::string config_path;
    std::string tag_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string tag_format;

    CLI::App* sim = app.add_subcommand("simulate", "run the Monte Carlo and write tags + counts");
    sim->add_option("config", config_path, "JSON run configuration")->required();
    sim->add_option("--out", out_dir, "output directory (default: io.out_dir)");
    sim->add_option("--seed", seed, "override montecarlo.seed");
    sim->add_option("--tag-format", tag_format, "tag file format: csv or bin")
        ->check(CLI::IsMember({"csv", "bin"}));

    CLI::App* ana = app.add_subcommand("analyze", "histogram/CAR/g2h analysis of a tag stream");
    ana->add_option("tags", tag_path, "time-tag file (.csv or .bin)")->required();
    ana->add_option("--config", config_path, "JSON run configuration")->required();
    ana->add_option("--out", out_dir, "output directory (default: io.out_dir)");

    CLI::App* swp = app.add_subcommand("sweep", "power sweep, reduction, fits and extraction");
    swp->add_option("config", config_path, "JSON run configuration")->required();
    swp->add_option("--out", out_dir, "output directory (default: io.out_dir)");
    swp->add_option("--seed", seed, "override montecarlo.seed for montecarlo sweeps");

    CLI::App* crv = app.add_subcommand("curves", "analytic CAR / rate / g2 curves vs power");
    crv->add_option("config", config_path, "JSON run configuration")->required();
    crv->add_option("--out", out_dir, "output directory (default: io.out_dir)");

    CLI11_PARSE(app, argc, argv);
    apply_thread_count(threads);

    try {
        pairsim::RunConfig cfg = pairsim::load_run_config(config_path);
        if (!tag_format.empty()) cfg.io.tag_format = tag_format;
        const std::filesystem::path out = out_dir.empty() ? cfg.io.out_dir : out_dir;

        if (sim->parsed()) {
            pairsim::run_simulate(cfg, out, seed, verbose);
        } else if (ana->parsed()) {
            pairsim::run_analyze(cfg, tag_path, out, verbose);
        } else if (swp->parsed()) {
            pairsim::run_sweep(cfg, out, seed, verbose);
        } else if (crv->parsed()) {
            pairsim::run_curves(cfg, out, verbose);
        }
    } catch (const std::exception& e) {
        std::cerr << "pairsim: " << e.what() << "\n";
        return pairsim::classify_exit_code(e);
    }
    return 0;
}
