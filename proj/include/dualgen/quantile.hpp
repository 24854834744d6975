#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dualgen {

// Quantile by linear interpolation between order statistics at position
// (n-1)*p/100. Used everywhere a percentile or quartile is needed so the
// whole pipeline shares one definition.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile outside [0,100]");
    const double pos = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
    const size_t lo = static_cast<size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

} // namespace dualgen
