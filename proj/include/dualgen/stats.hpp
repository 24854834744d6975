#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualgen/quantile.hpp"

namespace dualgen {

struct SampleSet {
    std::vector<double> values;
    std::string label;

    void validate() const {
        if (values.empty()) throw std::invalid_argument("SampleSet: empty");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("SampleSet: non-finite value");
    }
};

enum class Significance { Star, DoubleStar, None };

// One distribution-vs-distribution comparison row.
struct ComparisonResult {
    double emd = 0.0;
    double ks_d = 0.0;
    double p_value = 1.0;
    Significance significance = Significance::None;
    // p in [0.001, 0.005] falls outside both published star classes; the
    // rule is applied literally and the gap flagged instead of guessed.
    bool in_unmapped_gap = false;
};

struct DescriptiveStats {
    size_t count = 0;
    double mean = 0.0;
    bool has_mean_difference = false;
    double mean_difference = 0.0; // vs a reference mean, when provided
    double std_dev = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double iqr = 0.0;
};

// Wasserstein-1 between two empirical distributions, computed as the
// integral of |F_a - F_b| over the merged sorted support. The running
// mass difference is the exact integer c_a*m - c_b*n, and the single
// division happens at the end, so for equal sizes the result coincides
// with the mean sorted-pointwise distance.
inline double emd_1d(const SampleSet& a, const SampleSet& b) {
    a.validate();
    b.validate();
    std::vector<double> sa = a.values, sb = b.values;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const int64_t n = static_cast<int64_t>(sa.size());
    const int64_t m = static_cast<int64_t>(sb.size());

    double total = 0.0;
    int64_t ca = 0, cb = 0;
    size_t ia = 0, ib = 0;
    double prev = 0.0;
    bool have_prev = false;
    while (ia < sa.size() || ib < sb.size()) {
        const double x = (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) ? sa[ia]
                                                                                   : sb[ib];
        if (have_prev) {
            const int64_t cross = ca * m - cb * n;
            total += std::abs(static_cast<double>(cross)) * (x - prev);
        }
        while (ia < sa.size() && sa[ia] == x) {
            ++ia;
            ++ca;
        }
        while (ib < sb.size() && sb[ib] == x) {
            ++ib;
            ++cb;
        }
        prev = x;
        have_prev = true;
    }
    return total / (static_cast<double>(n) * static_cast<double>(m));
}

// Asymptotic Kolmogorov survival function
//   Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
// truncated once terms drop below 1e-10, clamped into (0, 1].
inline double kolmogorov_q(double lambda) {
    if (lambda <= 1e-9) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100000; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-10) break;
        sign = -sign;
    }
    const double q = 2.0 * sum;
    return std::min(1.0, std::max(q, std::numeric_limits<double>::min()));
}

// Two-sample KS: D is the sup over the merged sample points of |F_a - F_b|
// (each point checked after and just before its jumps); the p-value uses
// the asymptotic series with the finite-sample lambda correction
//   lambda = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D,  n_e = n*m/(n+m).
inline std::pair<double, double> ks_two_sample(const SampleSet& a, const SampleSet& b) {
    a.validate();
    b.validate();
    std::vector<double> sa = a.values, sb = b.values;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double n = static_cast<double>(sa.size());
    const double m = static_cast<double>(sb.size());

    double d = 0.0;
    size_t ia = 0, ib = 0;
    while (ia < sa.size() || ib < sb.size()) {
        const double x = (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) ? sa[ia]
                                                                                   : sb[ib];
        // just below x
        d = std::max(d, std::abs(static_cast<double>(ia) / n - static_cast<double>(ib) / m));
        while (ia < sa.size() && sa[ia] == x) ++ia;
        while (ib < sb.size() && sb[ib] == x) ++ib;
        // at x
        d = std::max(d, std::abs(static_cast<double>(ia) / n - static_cast<double>(ib) / m));
    }

    if (d == 0.0) return {0.0, 1.0};
    const double ne = n * m / (n + m);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    return {d, kolmogorov_q(lambda)};
}

// Published star scheme, applied literally:
//   *  : p < 0.001
//   ** : 0.005 < p < 0.05
// Everything else (including the unmapped [0.001, 0.005] gap) is None.
inline Significance classify_significance(double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("classify_significance: p outside (0,1]");
    if (p < 0.001) return Significance::Star;
    if (p > 0.005 && p < 0.05) return Significance::DoubleStar;
    return Significance::None;
}

inline bool in_significance_gap(double p) { return p >= 0.001 && p <= 0.005; }

inline ComparisonResult compare_distributions(const SampleSet& a, const SampleSet& b) {
    ComparisonResult r;
    r.emd = emd_1d(a, b);
    const auto [d, p] = ks_two_sample(a, b);
    r.ks_d = d;
    r.p_value = p;
    r.significance = classify_significance(p);
    r.in_unmapped_gap = in_significance_gap(p);
    return r;
}

// Quantiles use the shared linear-interpolation rule; std is the sample
// standard deviation (n-1 denominator, 0 for a single observation).
inline DescriptiveStats describe(const SampleSet& a, const double* reference_mean = nullptr) {
    a.validate();
    std::vector<double> sorted = a.values;
    std::sort(sorted.begin(), sorted.end());
    DescriptiveStats s;
    s.count = sorted.size();
    double sum = 0.0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(s.count);
    s.min = sorted.front();
    s.max = sorted.back();
    if (s.count > 1 && s.min != s.max) {
        double ss = 0.0;
        for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
    s.q1 = quantile_sorted(sorted, 25.0);
    s.median = quantile_sorted(sorted, 50.0);
    s.q3 = quantile_sorted(sorted, 75.0);
    s.iqr = s.q3 - s.q1;
    if (reference_mean) {
        s.has_mean_difference = true;
        s.mean_difference = s.mean - *reference_mean;
    }
    return s;
}

} // namespace dualgen
