#include "pairsim/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pairsim/rng.hpp"

namespace pairsim {

void ExperimentConfig::validate() const {
    source.validate();
    idler.validate();
    signal.validate();
    if (hbt) {
        hbt->validate();
        arm1.validate();
        arm2.validate();
    }
    if (!(pbar >= 0.0) || !std::isfinite(pbar)) {
        throw std::invalid_argument("experiment: pbar must be >= 0");
    }
    if (pulses == 0) throw std::invalid_argument("experiment: pulses must be >= 1");
    if (block_size == 0) throw std::invalid_argument("experiment: block_size must be >= 1");
    if (!(rep_period > 0.0)) throw std::invalid_argument("experiment: rep_period must be > 0");
    if (!(timing.jitter_sigma >= 0.0)) {
        throw std::invalid_argument("experiment: jitter_sigma must be >= 0");
    }
}

namespace {

// Static per-pulse probabilities shared by both kernels.
struct McParams {
    PhotonNumberDistribution dist;
    double p_emit = 0.0; // P(n >= 1)
    double eta_i = 0.0;  // idler photon detection probability (before eta_nd)
    double eta_s = 0.0;  // signal photon detection probability up to the splitter
    double eta_nd = 1.0;
    bool hbt = false;
    double t2 = 1.0;     // arm-1 routing probability after the splitter
    double eta_bs = 1.0;
    double d_i = 0.0;    // per-pulse noise probabilities (counts mode darks)
    double d_1 = 0.0;
    double d_2 = 0.0;
    double noise_i = 0.0; // pulse-synchronous linear noise probabilities
    double noise_1 = 0.0;
    double noise_2 = 0.0;
};

McParams make_params(const ExperimentConfig& cfg) {
    const double mu = cfg.mu();
    McParams p{PhotonNumberDistribution(cfg.source.statistics, mu)};
    p.p_emit = 1.0 - p.dist.vacuum_probability();
    p.eta_i = cfg.idler.efficiency();
    p.eta_s = cfg.signal.efficiency();
    p.eta_nd = cfg.idler.eta_nd;
    p.hbt = cfg.hbt.has_value();
    if (p.hbt) {
        p.t2 = cfg.hbt->t2;
        p.eta_bs = cfg.hbt->eta_bs;
        p.d_1 = cfg.arm1.dark_rate > 0.0 ? dark_prob_signal(cfg.arm1.dark_rate, cfg.arm1.window)
                                         : 0.0;
        p.d_2 = cfg.arm2.dark_rate > 0.0 ? dark_prob_signal(cfg.arm2.dark_rate, cfg.arm2.window)
                                         : 0.0;
        p.noise_1 = cfg.arm1.linear_noise_per_w * cfg.pbar;
        p.noise_2 = cfg.arm2.linear_noise_per_w * cfg.pbar;
    } else {
        p.d_1 = cfg.signal.dark_rate > 0.0
                    ? dark_prob_signal(cfg.signal.dark_rate, cfg.signal.window)
                    : 0.0;
        p.noise_1 = cfg.signal.linear_noise_per_w * cfg.pbar;
    }
    p.d_i = dark_prob_idler(cfg.idler.dark_rate, cfg.source.rep_rate);
    p.noise_i = cfg.idler.linear_noise_per_w * cfg.pbar;
    return p;
}

struct PulseClicks {
    bool idler = false;
    bool s1 = false;
    bool s2 = false;

    bool signal() const { return s1 || s2; }
};

// Detection outcome of one pulse given its pair number and noise flags.
// Draw order is fixed: per photon (idler thin, signal thin, splitter
// survival, routing), then the eta_nd thinning of an idler click.
PulseClicks resolve_pulse(const McParams& p, std::uint64_t n_pairs, bool noise_i, bool noise_1,
                          bool noise_2, Rng& rng) {
    PulseClicks k;
    for (std::uint64_t j = 0; j < n_pairs; ++j) {
        if (rng.bernoulli(p.eta_i)) k.idler = true;
        if (rng.bernoulli(p.eta_s)) {
            if (!p.hbt) {
                k.s1 = true;
            } else if (rng.bernoulli(p.eta_bs)) {
                if (rng.bernoulli(p.t2)) {
                    k.s1 = true;
                } else {
                    k.s2 = true;
                }
            }
        }
    }
    if (noise_i) k.idler = true;
    if (noise_1) k.s1 = true;
    if (noise_2) k.s2 = true;
    if (k.idler && p.eta_nd < 1.0) k.idler = rng.bernoulli(p.eta_nd);
    return k;
}

void accumulate(CountSummary& c, const PulseClicks& k) {
    c.n_i += k.idler;
    c.n_1 += k.s1;
    c.n_2 += k.s2;
    c.n_12 += k.s1 && k.s2;
    c.n_si_raw += k.idler && k.signal();
    c.n_1i += k.idler && k.s1;
    c.n_2i += k.idler && k.s2;
    c.n_12i += k.idler && k.s1 && k.s2;
}

// Per-block result plus the boundary information needed to count
// shifted-pulse (accidental-estimate) pairs across block edges.
struct BlockCounts {
    CountSummary c;
    bool first_pulse_signal = false;
    bool last_pulse_idler = false;
};

// Next index >= `from` at which an independent Bernoulli(prob) process fires,
// clamped to `end` ("no event in this block").
std::uint64_t first_event(std::uint64_t from, std::uint64_t end, double prob, Rng& rng) {
    const std::uint64_t g = rng.geometric_skip(prob);
    return (g >= end - from) ? end : from + g;
}

std::uint64_t next_event(std::uint64_t current, std::uint64_t end, double prob, Rng& rng) {
    if (current + 1 >= end) return end;
    return first_event(current + 1, end, prob, rng);
}

// Event-skip walk over one block: only pulses with an emission or a noise
// event are visited; everything else contributes no clicks and no draws.
BlockCounts run_counts_block(const McParams& p, const ExperimentConfig& cfg, std::uint64_t block) {
    const std::uint64_t b0 = block * cfg.block_size;
    const std::uint64_t b1 = std::min(b0 + cfg.block_size, cfg.pulses);
    Rng rng(block_stream_seed(cfg.seed, block));

    // Independent event skeletons, cursors drawn in a fixed order.
    std::uint64_t next_pair = first_event(b0, b1, p.p_emit, rng);
    std::uint64_t next_di = first_event(b0, b1, p.d_i, rng);
    std::uint64_t next_d1 = first_event(b0, b1, p.d_1, rng);
    std::uint64_t next_d2 = p.hbt ? first_event(b0, b1, p.d_2, rng) : b1;
    std::uint64_t next_ni = first_event(b0, b1, p.noise_i, rng);
    std::uint64_t next_n1 = first_event(b0, b1, p.noise_1, rng);
    std::uint64_t next_n2 = p.hbt ? first_event(b0, b1, p.noise_2, rng) : b1;

    BlockCounts bc;
    std::uint64_t prev_pulse = b1; // sentinel: no previous visited pulse
    PulseClicks prev{};
    while (true) {
        const std::uint64_t q = std::min({next_pair, next_di, next_d1, next_d2, next_ni, next_n1,
                                          next_n2});
        if (q >= b1) break;
        const bool pair_here = q == next_pair;
        const bool di_here = q == next_di;
        const bool d1_here = q == next_d1;
        const bool d2_here = q == next_d2;
        const bool ni_here = q == next_ni;
        const bool n1_here = q == next_n1;
        const bool n2_here = q == next_n2;

        const std::uint64_t n = pair_here ? p.dist.sample_given_at_least_one(rng) : 0;
        // Counts mode treats darks as pulse-synchronous noise flags.
        const PulseClicks k = resolve_pulse(p, n, di_here || ni_here, d1_here || n1_here,
                                            d2_here || n2_here, rng);
        accumulate(bc.c, k);
        if (prev_pulse + 1 == q && prev.idler && k.signal()) ++bc.c.n_acc_estimate;
        if (q == b0) bc.first_pulse_signal = k.signal();
        if (q + 1 == b1) bc.last_pulse_idler = k.idler;
        prev_pulse = q;
        prev = k;

        if (pair_here) next_pair = next_event(q, b1, p.p_emit, rng);
        if (di_here) next_di = next_event(q, b1, p.d_i, rng);
        if (d1_here) next_d1 = next_event(q, b1, p.d_1, rng);
        if (d2_here) next_d2 = next_event(q, b1, p.d_2, rng);
        if (ni_here) next_ni = next_event(q, b1, p.noise_i, rng);
        if (n1_here) next_n1 = next_event(q, b1, p.noise_1, rng);
        if (n2_here) next_n2 = next_event(q, b1, p.noise_2, rng);
    }
    return bc;
}

} // namespace

CountSummary simulate_counts(const ExperimentConfig& cfg) {
    cfg.validate();
    const McParams p = make_params(cfg);
    const std::uint64_t n_blocks = (cfg.pulses + cfg.block_size - 1) / cfg.block_size;
    std::vector<BlockCounts> blocks(n_blocks);

#pragma omp parallel for schedule(dynamic, 16)
    for (long long bi = 0; bi < static_cast<long long>(n_blocks); ++bi) {
        blocks[static_cast<std::size_t>(bi)] =
            run_counts_block(p, cfg, static_cast<std::uint64_t>(bi));
    }

    CountSummary total;
    total.pulses = cfg.pulses;
    bool prev_last_idler = false;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const CountSummary& c = blocks[i].c;
        total.n_i += c.n_i;
        total.n_1 += c.n_1;
        total.n_2 += c.n_2;
        total.n_12 += c.n_12;
        total.n_si_raw += c.n_si_raw;
        total.n_1i += c.n_1i;
        total.n_2i += c.n_2i;
        total.n_12i += c.n_12i;
        total.n_acc_estimate += c.n_acc_estimate;
        if (i > 0 && prev_last_idler && blocks[i].first_pulse_signal) ++total.n_acc_estimate;
        prev_last_idler = blocks[i].last_pulse_idler;
    }
    return total;
}

CountSummary simulate_counts_reference(const ExperimentConfig& cfg) {
    cfg.validate();
    const McParams p = make_params(cfg);
    Rng rng(cfg.seed);
    CountSummary total;
    total.pulses = cfg.pulses;
    bool prev_idler = false;
    for (std::uint64_t q = 0; q < cfg.pulses; ++q) {
        const std::uint64_t n = p.dist.sample(rng);
        const bool noise_i = rng.bernoulli(p.d_i) || (p.noise_i > 0.0 && rng.bernoulli(p.noise_i));
        const bool noise_1 = rng.bernoulli(p.d_1) || (p.noise_1 > 0.0 && rng.bernoulli(p.noise_1));
        const bool noise_2 =
            p.hbt && (rng.bernoulli(p.d_2) || (p.noise_2 > 0.0 && rng.bernoulli(p.noise_2)));
        const PulseClicks k = resolve_pulse(p, n, noise_i, noise_1, noise_2, rng);
        accumulate(total, k);
        if (q > 0 && prev_idler && k.signal()) ++total.n_acc_estimate;
        prev_idler = k.idler;
    }
    return total;
}

namespace {

std::int64_t to_ps(double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds * 1e12));
}

void emit_tag(TagStream& out, double pulse_time, double delay, double jitter_sigma,
              TagChannel ch, Rng& rng) {
    double t = pulse_time + delay;
    if (jitter_sigma > 0.0) t += jitter_sigma * rng.normal();
    out.push_back({to_ps(t), ch});
}

// Photon and pulse-synchronous noise tags of one block (event-skip walk),
// followed by the free-running dark processes, then a time sort.
TagStream run_tags_block(const McParams& p, const ExperimentConfig& cfg, std::uint64_t block) {
    const std::uint64_t b0 = block * cfg.block_size;
    const std::uint64_t b1 = std::min(b0 + cfg.block_size, cfg.pulses);
    Rng rng(block_stream_seed(cfg.seed, block));
    const double T = cfg.rep_period;
    const TimingConfig& tm = cfg.timing;

    TagStream out;
    std::uint64_t next_pair = first_event(b0, b1, p.p_emit, rng);
    std::uint64_t next_ni = first_event(b0, b1, p.noise_i, rng);
    std::uint64_t next_n1 = first_event(b0, b1, p.noise_1, rng);
    std::uint64_t next_n2 = p.hbt ? first_event(b0, b1, p.noise_2, rng) : b1;
    while (true) {
        const std::uint64_t q = std::min({next_pair, next_ni, next_n1, next_n2});
        if (q >= b1) break;
        const bool pair_here = q == next_pair;
        const bool ni_here = q == next_ni;
        const bool n1_here = q == next_n1;
        const bool n2_here = q == next_n2;

        const std::uint64_t n = pair_here ? p.dist.sample_given_at_least_one(rng) : 0;
        const PulseClicks k = resolve_pulse(p, n, ni_here, n1_here, n2_here, rng);
        const double pulse_time = static_cast<double>(q) * T;
        if (k.idler) emit_tag(out, pulse_time, tm.idler_delay, tm.jitter_sigma, TagChannel::idler, rng);
        if (k.s1) emit_tag(out, pulse_time, tm.sig1_delay, tm.jitter_sigma, TagChannel::sig1, rng);
        if (k.s2) emit_tag(out, pulse_time, tm.sig2_delay, tm.jitter_sigma, TagChannel::sig2, rng);

        if (pair_here) next_pair = next_event(q, b1, p.p_emit, rng);
        if (ni_here) next_ni = next_event(q, b1, p.noise_i, rng);
        if (n1_here) next_n1 = next_event(q, b1, p.noise_1, rng);
        if (n2_here) next_n2 = next_event(q, b1, p.noise_2, rng);
    }

    // Free-running darks as Poisson processes over the block's time window.
    // The idler's gate nonlinearity thins its dark process by eta_nd.
    const double t_begin = static_cast<double>(b0) * T;
    const double t_end = static_cast<double>(b1) * T;
    const double rates[3] = {cfg.idler.dark_rate * p.eta_nd,
                             p.hbt ? cfg.arm1.dark_rate : cfg.signal.dark_rate,
                             p.hbt ? cfg.arm2.dark_rate : 0.0};
    const TagChannel channels[3] = {TagChannel::idler, TagChannel::sig1, TagChannel::sig2};
    for (int c = 0; c < 3; ++c) {
        if (rates[c] <= 0.0) continue;
        double t = t_begin;
        while (true) {
            t += rng.exponential(rates[c]);
            if (t >= t_end) break;
            out.push_back({to_ps(t), channels[c]});
        }
    }

    std::sort(out.begin(), out.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
    });
    return out;
}

} // namespace

TagStream simulate_timetags(const ExperimentConfig& cfg) {
    cfg.validate();
    const McParams p = make_params(cfg);
    const std::uint64_t n_blocks = (cfg.pulses + cfg.block_size - 1) / cfg.block_size;
    std::vector<TagStream> blocks(n_blocks);

#pragma omp parallel for schedule(dynamic, 16)
    for (long long bi = 0; bi < static_cast<long long>(n_blocks); ++bi) {
        blocks[static_cast<std::size_t>(bi)] =
            run_tags_block(p, cfg, static_cast<std::uint64_t>(bi));
    }

    std::size_t total_size = 0;
    for (const TagStream& b : blocks) total_size += b.size();
    TagStream out;
    out.reserve(total_size);
    for (TagStream& b : blocks) {
        out.insert(out.end(), b.begin(), b.end());
        TagStream().swap(b);
    }
    // Jitter can move a tag across a block boundary; finish with a global sort.
    std::sort(out.begin(), out.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
    });
    return out;
}

TagStream simulate_timetags_reference(const ExperimentConfig& cfg) {
    cfg.validate();
    const McParams p = make_params(cfg);
    Rng rng(cfg.seed);
    const double T = cfg.rep_period;
    const TimingConfig& tm = cfg.timing;
    TagStream out;
    for (std::uint64_t q = 0; q < cfg.pulses; ++q) {
        const std::uint64_t n = p.dist.sample(rng);
        const bool ni = p.noise_i > 0.0 && rng.bernoulli(p.noise_i);
        const bool n1 = p.noise_1 > 0.0 && rng.bernoulli(p.noise_1);
        const bool n2 = p.hbt && p.noise_2 > 0.0 && rng.bernoulli(p.noise_2);
        const PulseClicks k = resolve_pulse(p, n, ni, n1, n2, rng);
        const double pulse_time = static_cast<double>(q) * T;
        if (k.idler) emit_tag(out, pulse_time, tm.idler_delay, tm.jitter_sigma, TagChannel::idler, rng);
        if (k.s1) emit_tag(out, pulse_time, tm.sig1_delay, tm.jitter_sigma, TagChannel::sig1, rng);
        if (k.s2) emit_tag(out, pulse_time, tm.sig2_delay, tm.jitter_sigma, TagChannel::sig2, rng);
    }
    const double t_end = static_cast<double>(cfg.pulses) * T;
    const double rates[3] = {cfg.idler.dark_rate * p.eta_nd,
                             p.hbt ? cfg.arm1.dark_rate : cfg.signal.dark_rate,
                             p.hbt ? cfg.arm2.dark_rate : 0.0};
    const TagChannel channels[3] = {TagChannel::idler, TagChannel::sig1, TagChannel::sig2};
    for (int c = 0; c < 3; ++c) {
        if (rates[c] <= 0.0) continue;
        double t = 0.0;
        while (true) {
            t += rng.exponential(rates[c]);
            if (t >= t_end) break;
            out.push_back({to_ps(t), channels[c]});
        }
    }
    std::sort(out.begin(), out.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
    });
    return out;
}

} // namespace pairsim
