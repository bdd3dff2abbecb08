#include "pairsim/quadrature.hpp"

#include <cstddef>
#include <stdexcept>

namespace pairsim {

namespace {

// Simpson weights (relative to h) for n samples; sums the weighted values and
// the weights themselves so callers can form either an integral or an average.
void simpson_accumulate(const std::vector<double>& y, double& weighted_sum, double& weight_sum) {
    const std::size_t n = y.size();
    if (n < 2) throw std::invalid_argument("quadrature: need at least 2 samples");
    weighted_sum = 0.0;
    weight_sum = 0.0;
    std::size_t intervals = n - 1;
    std::size_t simpson_end = intervals; // index after the last plain-Simpson sample
    bool tail38 = false;
    if (intervals % 2 != 0) {
        if (intervals < 3) {
            // single interval: trapezoid is all we can do
            weighted_sum = 0.5 * (y[0] + y[1]);
            weight_sum = 1.0;
            return;
        }
        simpson_end = intervals - 3; // leave 3 intervals for a 3/8 panel
        tail38 = true;
    }
    // composite Simpson over [0, simpson_end]
    if (simpson_end >= 2) {
        double acc = y[0] + y[simpson_end];
        double w = 2.0;
        for (std::size_t i = 1; i < simpson_end; ++i) {
            const double c = (i % 2 == 1) ? 4.0 : 2.0;
            acc += c * y[i];
            w += c;
        }
        weighted_sum += acc / 3.0;
        weight_sum += w / 3.0;
    }
    if (tail38) {
        const std::size_t b = simpson_end;
        weighted_sum += 3.0 / 8.0 * (y[b] + 3.0 * y[b + 1] + 3.0 * y[b + 2] + y[b + 3]);
        weight_sum += 3.0;
    }
}

} // namespace

double integrate_uniform(const std::vector<double>& y, double h) {
    double ws = 0.0, w = 0.0;
    simpson_accumulate(y, ws, w);
    return ws * h;
}

double average_uniform(const std::vector<double>& y) {
    double ws = 0.0, w = 0.0;
    simpson_accumulate(y, ws, w);
    return ws / w;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double h) {
    if (y.empty()) throw std::invalid_argument("quadrature: empty sample vector");
    std::vector<double> out(y.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) {
        acc += 0.5 * h * (y[i - 1] + y[i]);
        out[i] = acc;
    }
    return out;
}

} // namespace pairsim
