// Summary statistics for report rows.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace underiv {

// Linear-interpolation percentile (the common "type 7" definition) on a
// sorted sample.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile: empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct StatSummary {
    int count = 0;
    double mean = 0.0;
    double p10 = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double p90 = 0.0;
};

inline StatSummary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty sample");
    std::sort(values.begin(), values.end());
    StatSummary s;
    s.count = static_cast<int>(values.size());
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / s.count;
    s.p10 = percentile_sorted(values, 0.10);
    s.q1 = percentile_sorted(values, 0.25);
    s.median = percentile_sorted(values, 0.50);
    s.q3 = percentile_sorted(values, 0.75);
    s.p90 = percentile_sorted(values, 0.90);
    return s;
}

} // namespace underiv
