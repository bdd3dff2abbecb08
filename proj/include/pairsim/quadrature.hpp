#pragma once

#include <vector>

namespace pairsim {

// Composite Simpson integral of samples y on a uniform grid with spacing h.
// An odd interval count is finished with a single Simpson 3/8 panel.
// Requires y.size() >= 2.
double integrate_uniform(const std::vector<double>& y, double h);

// Weighted average of y over the grid using the same Simpson weights,
// i.e. integrate_uniform(y, h) / ((n-1) h), formed as a weight ratio so a
// vector of ones averages to exactly 1.
double average_uniform(const std::vector<double>& y);

// Cumulative trapezoid integral: out[i] = integral of y from x0 to x0 + i h,
// out[0] = 0.  Same length as y.
std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double h);

} // namespace pairsim
