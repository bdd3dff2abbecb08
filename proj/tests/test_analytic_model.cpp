#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pairsim/analytic_model.hpp>
#include <pairsim/errors.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace pairsim;

namespace {
SourceParams make_source(double xi, PairStatistics stats) {
    SourceParams s;
    s.xi = xi;
    s.rep_rate = 80e6;
    s.statistics = stats;
    return s;
}
} // namespace

TEST_CASE("gated idler dark probability") {
    CHECK(dark_prob_idler(620.0, 80e6) == 7.75e-6);
    CHECK(dark_prob_idler(0.0, 80e6) == 0.0);
    CHECK_THROWS(dark_prob_idler(-1.0, 80e6));
    CHECK_THROWS(dark_prob_idler(620.0, 0.0));
}

TEST_CASE("windowed signal dark probability") {
    // 2150 cps in 1.1 ns and 2.0 ns windows
    CHECK(dark_prob_signal(2150.0, 1.1e-9) == doctest::Approx(2.3649972e-6).epsilon(1e-6));
    CHECK(dark_prob_signal(2150.0, 2.0e-9) == doctest::Approx(4.2999908e-6).epsilon(1e-6));
    // exact identity against expm1
    CHECK(dark_prob_signal(3000.0, 5e-9) == -std::expm1(-3000.0 * 5e-9));
    // saturation for an absurdly long window
    CHECK(dark_prob_signal(1e9, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(dark_prob_signal(2150.0, 0.0));
}

TEST_CASE("per-pulse detection probabilities") {
    const auto src = make_source(0.72, PairStatistics::thermal);
    ChannelModel idler;
    idler.eta_on_avg = 0.9;
    idler.eta_off = 0.003;
    idler.dark_rate = 620.0;
    ChannelModel signal;
    signal.eta_on_avg = 0.55;
    signal.eta_off = 4e-4;
    signal.dark_rate = 2150.0;
    signal.window = 1.1e-9;

    const double pbar = 0.0833;                 // W
    const double mu = 0.72 * pbar * pbar;
    const auto p = detection_probabilities(src, pbar, idler, signal);
    CHECK(p.mu == doctest::Approx(mu).epsilon(1e-14));
    const double eta_i = 0.9 * 0.003;
    const double eta_s = 0.55 * 4e-4;
    CHECK(p.d_i == 7.75e-6);
    CHECK(p.d_s == doctest::Approx(-std::expm1(-2150.0 * 1.1e-9)).epsilon(1e-14));
    CHECK(p.p_si == doctest::Approx(mu * eta_i * eta_s).epsilon(1e-13));
    CHECK(p.p_i == doctest::Approx(mu * eta_i + 7.75e-6).epsilon(1e-13));
    CHECK(p.p_s == doctest::Approx(mu * eta_s + p.d_s).epsilon(1e-13));
    CHECK(p.p_acc == doctest::Approx(p.p_i * p.p_s).epsilon(1e-14));
    CHECK_FALSE(p.low_gain_warning);

    // the gate nonlinearity scales the idler branch only
    idler.eta_nd = 0.8;
    const auto q = detection_probabilities(src, pbar, idler, signal);
    CHECK(q.p_si == doctest::Approx(0.8 * p.p_si).epsilon(1e-13));
    CHECK(q.p_i == doctest::Approx(0.8 * p.p_i).epsilon(1e-13));
    CHECK(q.p_s == doctest::Approx(p.p_s).epsilon(1e-14));

    // linear-in-power noise stacks onto both noise probabilities
    idler.eta_nd = 1.0;
    idler.linear_noise_per_w = 1e-5;
    signal.linear_noise_per_w = 2e-5;
    const auto r = detection_probabilities(src, pbar, idler, signal);
    CHECK(r.d_i == doctest::Approx(7.75e-6 + 1e-5 * pbar).epsilon(1e-13));
    CHECK(r.d_s == doctest::Approx(p.d_s + 2e-5 * pbar).epsilon(1e-13));
}

TEST_CASE("low gain warning trips above mu = 0.1") {
    const auto src = make_source(1.0, PairStatistics::thermal);
    ChannelModel idler, signal;
    idler.dark_rate = 0.0;
    signal.dark_rate = 0.0;
    CHECK_FALSE(detection_probabilities(src, 0.3, idler, signal).low_gain_warning);
    CHECK(detection_probabilities(src, 0.35, idler, signal).low_gain_warning);
}

TEST_CASE("CAR is 1/mu for a noiseless detector pair") {
    ChannelModel idler, signal;
    idler.eta_on_avg = 0.94;
    idler.eta_off = 2.81e-3;
    signal.eta_on_avg = 0.55;
    signal.eta_off = 3.97e-4;
    for (double eta_nd : {1.0, 0.82}) {
        idler.eta_nd = eta_nd;
        for (auto stats : {PairStatistics::poisson, PairStatistics::thermal}) {
            const auto src = make_source(0.72, stats);
            for (double pbar : {0.02, 0.088, 0.3}) {
                const double mu = 0.72 * pbar * pbar;
                CHECK(car(src, pbar, idler, signal) * mu == doctest::Approx(1.0).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("darks pull CAR below 1/mu and net rate is p_si R") {
    const auto src = make_source(0.72, PairStatistics::thermal);
    ChannelModel idler, signal;
    idler.eta_on_avg = 0.94;
    idler.eta_off = 2.81e-3;
    idler.dark_rate = 620.0;
    signal.eta_on_avg = 0.55;
    signal.eta_off = 3.97e-4;
    signal.dark_rate = 2150.0;
    signal.window = 1.1e-9;
    const double pbar = 0.0881;
    const double mu = 0.72 * pbar * pbar;
    CHECK(car(src, pbar, idler, signal) < 1.0 / mu);
    const auto p = detection_probabilities(src, pbar, idler, signal);
    CHECK(net_coincidence_rate(src, pbar, idler, signal) ==
          doctest::Approx(p.p_si * 80e6).epsilon(1e-14));
}

TEST_CASE("car throws when accidentals vanish") {
    const auto src = make_source(0.0, PairStatistics::thermal);
    ChannelModel idler, signal;
    idler.dark_rate = 0.0;
    signal.dark_rate = 0.0;
    CHECK_THROWS_AS(car(src, 0.0, idler, signal), NumericalError);
}

TEST_CASE("threefold and twofold terms match the state-enumeration oracle") {
    struct Case {
        PairStatistics stats;
        double mu;
    };
    for (const auto& c : {Case{PairStatistics::poisson, 0.3}, Case{PairStatistics::thermal, 0.2}}) {
        const PhotonNumberDistribution dist(c.stats, c.mu);
        const auto law = c.stats == PairStatistics::poisson ? oracles::Law::poisson
                                                            : oracles::Law::thermal;
        const double e1 = 0.01, e2 = 0.012, ei = 0.02;
        const double d1 = 3e-4, d2 = 2.5e-4, di = 7.75e-6;
        const double eta_nd = 0.82;
        const auto t = threefold_coincidence_terms(dist, e1, e2, ei, d1, d2, di, eta_nd);
        const auto o = oracles::enumerate_threefold(law, c.mu, e1, e2, ei, d1, d2, di, eta_nd);
        CHECK(t.pairs_all_three == doctest::Approx(o.pairs_all_three).epsilon(1e-10));
        CHECK(t.pair_plus_one_arm_dark ==
              doctest::Approx(o.pair_plus_one_arm_dark).epsilon(1e-10));
        CHECK(t.two_pairs_idler_dark == doctest::Approx(o.two_pairs_idler_dark).epsilon(1e-10));
        CHECK(t.arm1_photon_darks == doctest::Approx(o.arm1_photon_darks).epsilon(1e-10));
        CHECK(t.arm2_photon_darks == doctest::Approx(o.arm2_photon_darks).epsilon(1e-10));
        CHECK(t.idler_photon_arm_darks ==
              doctest::Approx(o.idler_photon_arm_darks).epsilon(1e-10));
        CHECK(t.all_darks == doctest::Approx(o.all_darks).epsilon(1e-10));

        const auto two = twofold_coincidence_terms(dist, e1, ei, d1, di, eta_nd);
        CHECK(two.total() ==
              doctest::Approx(oracles::enumerate_twofold_total(law, c.mu, e1, ei, d1, di, eta_nd))
                  .epsilon(1e-10));
    }
}

TEST_CASE("noiseless heralded g2 closed forms") {
    ChannelModel arm1, arm2, idler;
    arm1.eta_on_avg = arm2.eta_on_avg = 0.55;
    arm1.eta_off = arm2.eta_off = 3.97e-4;
    idler.eta_on_avg = 0.94;
    idler.eta_off = 2.81e-3;
    HbtSplit hbt;
    for (double mu : {1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2}) {
        const double pbar = 0.25;
        const double xi = mu / (pbar * pbar);
        auto src = make_source(xi, PairStatistics::poisson);
        CHECK(g2h_predicted(src, pbar, arm1, arm2, idler, hbt).value ==
              doctest::Approx(mu * (mu + 2.0) / ((mu + 1.0) * (mu + 1.0))).epsilon(1e-6));
        src.statistics = PairStatistics::thermal;
        CHECK(g2h_predicted(src, pbar, arm1, arm2, idler, hbt).value ==
              doctest::Approx(mu * (6.0 * mu + 4.0) / ((2.0 * mu + 1.0) * (2.0 * mu + 1.0)))
                  .epsilon(1e-6));
    }
}

TEST_CASE("noiseless heralded g2 is independent of efficiencies and splitter balance") {
    const auto src = make_source(0.72, PairStatistics::thermal);
    const double pbar = 0.1;
    ChannelModel arm1, arm2, idler;
    arm1.eta_off = 0.3;
    arm2.eta_off = 0.3;
    idler.eta_off = 0.9;
    HbtSplit hbt;
    const double base = g2h_predicted(src, pbar, arm1, arm2, idler, hbt).value;
    arm1.eta_off = 0.03;
    arm2.eta_off = 0.07;
    idler.eta_off = 0.25;
    idler.eta_nd = 0.6;
    hbt.t2 = 0.73;
    hbt.r2 = 0.27;
    hbt.eta_bs = 0.8;
    CHECK(g2h_predicted(src, pbar, arm1, arm2, idler, hbt).value ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("thermal g2h exceeds poissonian g2h at equal mu") {
    ChannelModel arm1, arm2, idler;
    HbtSplit hbt;
    for (double mu : {1e-3, 0.01, 0.1}) {
        auto src = make_source(mu, PairStatistics::poisson); // pbar = 1 -> mu = xi
        const double pois = g2h_predicted(src, 1.0, arm1, arm2, idler, hbt).value;
        src.statistics = PairStatistics::thermal;
        const double th = g2h_predicted(src, 1.0, arm1, arm2, idler, hbt).value;
        CHECK(th > pois);
    }
}

TEST_CASE("dark-dominated heralded g2 tends to one") {
    auto src = make_source(1e-12, PairStatistics::thermal);
    ChannelModel arm1, arm2, idler;
    arm1.eta_off = 0.0;
    arm2.eta_off = 0.0;
    idler.eta_off = 0.0;
    arm1.dark_rate = 1000.0;
    arm2.dark_rate = 1100.0;
    idler.dark_rate = 600.0;
    arm1.window = arm2.window = 2e-9;
    const auto g = g2h_predicted(src, 0.1, arm1, arm2, idler, HbtSplit{});
    CHECK(g.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(g.single_photon);
}

TEST_CASE("single photon flag reflects the 0.5 threshold") {
    ChannelModel arm1, arm2, idler;
    auto src = make_source(0.01, PairStatistics::thermal);
    CHECK(g2h_predicted(src, 1.0, arm1, arm2, idler, HbtSplit{}).single_photon);
    src.xi = 4.0; // mu = 4: thermal closed form 4*28/81 = 1.38
    CHECK_FALSE(g2h_predicted(src, 1.0, arm1, arm2, idler, HbtSplit{}).single_photon);
}

TEST_CASE("g2h rejects an all-zero configuration") {
    const auto src = make_source(0.0, PairStatistics::thermal);
    ChannelModel arm1, arm2, idler;
    CHECK_THROWS_AS(g2h_predicted(src, 0.0, arm1, arm2, idler, HbtSplit{}), NumericalError);
}

TEST_CASE("hbt validation") {
    HbtSplit hbt;
    hbt.t2 = 0.7;
    hbt.r2 = 0.2;
    CHECK_THROWS(hbt.validate());
    hbt.r2 = 0.3;
    CHECK_NOTHROW(hbt.validate());
    hbt.eta_bs = 1.5;
    CHECK_THROWS(hbt.validate());
}

TEST_CASE("channel validation") {
    ChannelModel ch;
    ch.eta_off = 1.2;
    CHECK_THROWS(ch.validate());
    ch = ChannelModel{};
    ch.eta_nd = 0.0;
    CHECK_THROWS(ch.validate());
    ch = ChannelModel{};
    ch.dark_rate = 100.0;
    ch.window = 0.0;
    CHECK_THROWS(ch.validate());
    ch.window = 1e-9;
    CHECK_NOTHROW(ch.validate());
}

TEST_CASE("unheralded g2 noise dilution") {
    // pure signal keeps the true value, pure noise gives 1
    CHECK(g2_unheralded(1e-4, 0.0, 1.67) == 1.67);
    CHECK(g2_unheralded(0.0, 1e-5, 1.67) == 1.0);
    // equal parts: (g2 + 2 + 1)/4
    CHECK(g2_unheralded(2e-6, 2e-6, 1.67) == doctest::Approx((1.67 + 3.0) / 4.0).epsilon(1e-12));
    // monotone decrease towards 1 as noise grows (for g2_true > 1)
    double last = 2.0;
    for (double noise : {0.0, 1e-6, 5e-6, 2e-5, 1e-4}) {
        const double g = g2_unheralded(1e-5, noise, 2.0);
        CHECK(g <= last);
        CHECK(g >= 1.0);
        last = g;
    }
    CHECK_THROWS_AS(g2_unheralded(0.0, 0.0, 1.67), NumericalError);
}

TEST_CASE("filter overlap limits and frozen value") {
    // wide-open filter passes everything
    CHECK(filter_overlap(5.1, 5100.0) > 0.9999);
    // a very narrow filter keeps only the line centre
    CHECK(filter_overlap(5.1, 0.05) < 0.02);
    // only the width ratio matters
    CHECK(filter_overlap(5.1, 1.15) == doctest::Approx(filter_overlap(0.51, 0.115)).epsilon(1e-9));
    // frozen reference for the 5.1 GHz line behind the 1.15 GHz bandpass
    CHECK(filter_overlap(5.1, 1.15) == doctest::Approx(0.220919).epsilon(2e-5));
    CHECK_THROWS(filter_overlap(0.0, 1.0));
}

TEST_CASE("filter overlap against a dense trapezoid oracle") {
    auto oracle = [](double ws, double wf) {
        const double t_half = 1.3915573782515135;
        const double a = 2.0 * t_half / wf;
        const double k = 4.0 * std::log(2.0) / (ws * ws);
        const double span = 12.0 * std::max(ws, wf);
        const std::size_t n = 1u << 21;
        const double h = 2.0 * span / n;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = -span + h * i;
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            const double g = std::exp(-k * x * x);
            const double t = a * x;
            const double s = std::abs(t) < 1e-8 ? 1.0 : std::sin(t) / t;
            num += w * g * s * s;
            den += w * g;
        }
        return num / den;
    };
    for (double ratio : {0.2255, 1.0, 3.0}) {
        CHECK(filter_overlap(5.1, 5.1 * ratio) ==
              doctest::Approx(oracle(5.1, 5.1 * ratio)).epsilon(1e-7));
    }
}
