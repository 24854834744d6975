#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "dualgen/image.hpp"
#include "dualgen/quantile.hpp"

namespace dualgen {

enum class Laterality { Left, Right };

// Intensity-matching target: cdf[k] is the cumulative probability mass of
// bins 0..k, where bin k covers [k/bins, (k+1)/bins) and the last bin is
// closed at 1. Monotone non-decreasing with cdf[bins-1] == 1 exactly.
struct ReferenceCdf {
    int bins = 256;
    std::vector<double> cdf;

    void validate() const {
        if (bins < 2 || cdf.size() != static_cast<size_t>(bins))
            throw std::invalid_argument("ReferenceCdf: cdf length != bins");
        double prev = 0.0;
        for (double v : cdf) {
            if (!(v >= 0.0 && v <= 1.0) || v < prev)
                throw std::invalid_argument("ReferenceCdf: not a monotone CDF in [0,1]");
            prev = v;
        }
        if (cdf.back() != 1.0)
            throw std::invalid_argument("ReferenceCdf: final entry must be exactly 1");
    }

    nlohmann::ordered_json to_json() const {
        return nlohmann::ordered_json{{"bins", bins}, {"cdf", cdf}};
    }

    static ReferenceCdf from_json(const nlohmann::json& j) {
        ReferenceCdf ref;
        ref.bins = j.at("bins").get<int>();
        ref.cdf = j.at("cdf").get<std::vector<double>>();
        ref.validate();
        return ref;
    }
};

inline int intensity_bin(double v, int bins) {
    // Bin k covers [k/bins, (k+1)/bins); the last bin also takes v == 1.
    int k = static_cast<int>(std::floor(v * bins));
    return std::min(k, bins - 1);
}

// Divide by the image maximum so max(output) == 1. An all-zero image is
// returned unchanged so pipelines over generated noise never abort.
inline GrayImage normalize_max(const GrayImage& img) {
    const double mx = *std::max_element(img.data.begin(), img.data.end());
    if (mx <= 0.0) return img;
    GrayImage out = img;
    for (double& v : out.data) v = std::min(1.0, v / mx);
    return out;
}

// Left-sided views are flipped horizontally (column j -> width-1-j) so all
// breasts face the same way; right-sided views pass through.
inline GrayImage mirror_if_left(const GrayImage& img, Laterality side) {
    if (side == Laterality::Right) return img;
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = img.at(img.width - 1 - x, y);
    return out;
}

inline ReferenceCdf build_reference_cdf(const std::vector<GrayImage>& imgs, int bins = 256) {
    if (imgs.empty()) throw std::invalid_argument("build_reference_cdf: empty image list");
    if (bins < 2) throw std::invalid_argument("build_reference_cdf: bins must be >= 2");
    std::vector<uint64_t> hist(bins, 0);
    uint64_t total = 0;
    for (const auto& img : imgs) {
        for (double v : img.data) ++hist[intensity_bin(v, bins)];
        total += img.size();
    }
    ReferenceCdf ref;
    ref.bins = bins;
    ref.cdf.resize(bins);
    uint64_t acc = 0;
    for (int k = 0; k < bins; ++k) {
        acc += hist[k];
        ref.cdf[k] = static_cast<double>(acc) / static_cast<double>(total);
    }
    ref.cdf.back() = 1.0;
    return ref;
}

namespace detail {

// Inverse of a binned CDF by linear interpolation between bin centers,
// with a virtual anchor at (0, 0). lower_bound guarantees a strictly
// increasing segment, so no flat-segment division can occur.
inline double inverse_cdf(const std::vector<double>& cdf, int bins, double s) {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), s);
    const int j = static_cast<int>(it - cdf.begin());
    const double center_j = (j + 0.5) / bins;
    if (j >= bins) return 1.0;
    if (j == 0) {
        if (cdf[0] <= 0.0) return center_j;
        return center_j * (s / cdf[0]);
    }
    const double center_prev = (j - 0.5) / bins;
    const double span = cdf[j] - cdf[j - 1];
    return center_prev + (s - cdf[j - 1]) / span * (center_j - center_prev);
}

} // namespace detail

// Classic CDF-inverse histogram matching on the reference's bin grid:
// v -> inverse(ref.cdf)(source.cdf(v)). Monotone non-decreasing in v.
inline GrayImage histogram_match(const GrayImage& img, const ReferenceCdf& ref) {
    ref.validate();
    const auto source = build_reference_cdf({img}, ref.bins);
    // One lookup per bin; every pixel in a bin maps identically.
    std::vector<double> mapped(ref.bins);
    for (int k = 0; k < ref.bins; ++k)
        mapped[k] = clamp01(detail::inverse_cdf(ref.cdf, ref.bins, source.cdf[k]));
    GrayImage out(img.width, img.height);
    for (size_t i = 0; i < img.size(); ++i)
        out.data[i] = mapped[intensity_bin(img.data[i], ref.bins)];
    return out;
}

// Scale by the p-th percentile of all pixel values and clamp into [0,1].
// A zero quantile (all-dark input) yields an all-zero output.
inline GrayImage percentile_normalize(const GrayImage& img, double p = 99.0) {
    if (!(p > 0.0 && p <= 100.0))
        throw std::invalid_argument("percentile_normalize: p outside (0,100]");
    const double q = quantile(img.data, p);
    GrayImage out(img.width, img.height);
    if (q <= 0.0) return out;
    for (size_t i = 0; i < img.size(); ++i) out.data[i] = clamp01(img.data[i] / q);
    return out;
}

// RGB variant pools the three channels for the quantile, preserving the
// inter-channel ratios that carry the view relationship.
inline RgbImage percentile_normalize(const RgbImage& img, double p = 99.0) {
    if (!(p > 0.0 && p <= 100.0))
        throw std::invalid_argument("percentile_normalize: p outside (0,100]");
    std::vector<double> pooled;
    pooled.reserve(img.r.size() * 3);
    pooled.insert(pooled.end(), img.r.data.begin(), img.r.data.end());
    pooled.insert(pooled.end(), img.g.data.begin(), img.g.data.end());
    pooled.insert(pooled.end(), img.b.data.begin(), img.b.data.end());
    const double q = quantile(std::move(pooled), p);
    RgbImage out(img.width(), img.height());
    if (q <= 0.0) return out;
    for (size_t i = 0; i < img.r.size(); ++i) {
        out.r.data[i] = clamp01(img.r.data[i] / q);
        out.g.data[i] = clamp01(img.g.data[i] / q);
        out.b.data[i] = clamp01(img.b.data[i] / q);
    }
    return out;
}

} // namespace dualgen
