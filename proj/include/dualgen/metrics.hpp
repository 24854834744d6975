#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualgen/encoding.hpp"
#include "dualgen/errors.hpp"
#include "dualgen/image.hpp"
#include "dualgen/preprocess.hpp"

namespace dualgen {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

    size_t size() const { return bits.size(); }
    bool same_shape(const BinaryMask& o) const {
        return width == o.width && height == o.height;
    }
    uint64_t count() const {
        uint64_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }
};

// IoU/DSC of one CC-vs-MLO mask comparison.
struct MetricSample {
    double iou = 0.0;
    double dsc = 0.0;
    std::string source_id;
    bool empty_union = false; // both masks empty; scores reported as 0
};

constexpr int kOtsuBins = 256;

// Otsu's threshold on a 256-bin histogram over [0,1]: picks the bin split
// maximizing the between-class variance w0*w1*(mu0-mu1)^2 and returns the
// upper edge of the background's last bin. Ties take the smaller
// threshold. Counts and first moments are exact integers, so the argmax
// is reproducible against any independent recomputation.
inline double otsu_threshold(const GrayImage& img) {
    int64_t hist[kOtsuBins] = {0};
    for (double v : img.data) ++hist[intensity_bin(v, kOtsuBins)];

    int occupied = 0;
    for (int64_t h : hist)
        if (h > 0) ++occupied;
    if (occupied <= 1)
        throw DegenerateHistogramError("otsu_threshold: histogram occupies a single bin");

    int64_t total = static_cast<int64_t>(img.size());
    int64_t total_moment = 0;
    for (int k = 0; k < kOtsuBins; ++k) total_moment += hist[k] * k;

    double best_var = -1.0;
    int best_k = 0;
    int64_t n0 = 0, s0 = 0;
    for (int k = 0; k < kOtsuBins - 1; ++k) {
        n0 += hist[k];
        s0 += hist[k] * k;
        const int64_t n1 = total - n0;
        if (n0 == 0 || n1 == 0) continue;
        const double w0 = static_cast<double>(n0) / static_cast<double>(total);
        const double w1 = static_cast<double>(n1) / static_cast<double>(total);
        const double mu0 = static_cast<double>(s0) / static_cast<double>(n0);
        const double mu1 =
            static_cast<double>(total_moment - s0) / static_cast<double>(n1);
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    return static_cast<double>(best_k + 1) / kOtsuBins;
}

namespace detail {

// Keeps only the largest 4-connected true component; among equal sizes the
// component met first in row-major scan order wins.
inline void keep_largest_component(BinaryMask& mask) {
    const int W = mask.width, H = mask.height;
    std::vector<int32_t> label(mask.size(), -1);
    std::vector<int64_t> sizes;
    std::vector<size_t> stack;
    for (size_t start = 0; start < mask.size(); ++start) {
        if (!mask.bits[start] || label[start] >= 0) continue;
        const int32_t id = static_cast<int32_t>(sizes.size());
        int64_t count = 0;
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            const size_t i = stack.back();
            stack.pop_back();
            ++count;
            const int x = static_cast<int>(i % W);
            const int y = static_cast<int>(i / W);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int d = 0; d < 4; ++d) {
                if (nx[d] < 0 || nx[d] >= W || ny[d] < 0 || ny[d] >= H) continue;
                const size_t j = static_cast<size_t>(ny[d]) * W + nx[d];
                if (mask.bits[j] && label[j] < 0) {
                    label[j] = id;
                    stack.push_back(j);
                }
            }
        }
        sizes.push_back(count);
    }
    if (sizes.size() <= 1) return;
    int32_t best = 0;
    for (int32_t id = 1; id < static_cast<int32_t>(sizes.size()); ++id)
        if (sizes[id] > sizes[best]) best = id;
    for (size_t i = 0; i < mask.size(); ++i)
        mask.bits[i] = (mask.bits[i] && label[i] == best) ? 1 : 0;
}

} // namespace detail

// Foreground is strictly above the Otsu threshold, so the background mode
// sitting on the bin edge stays excluded.
inline BinaryMask extract_mask(const GrayImage& img, bool keep_largest = false) {
    const double t = otsu_threshold(img);
    BinaryMask mask(img.width, img.height);
    for (size_t i = 0; i < img.size(); ++i) mask.bits[i] = img.data[i] > t ? 1 : 0;
    if (keep_largest) detail::keep_largest_component(mask);
    return mask;
}

struct MaskOverlap {
    uint64_t intersection = 0;
    uint64_t union_ = 0;
    uint64_t count_a = 0;
    uint64_t count_b = 0;
};

inline MaskOverlap mask_overlap(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mask_overlap: dimension mismatch");
    MaskOverlap o;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.bits[i], pb = b.bits[i];
        o.count_a += pa;
        o.count_b += pb;
        o.intersection += (pa && pb);
        o.union_ += (pa || pb);
    }
    return o;
}

// |a n b| / |a u b|; two empty masks score 0 (degenerate pairs are kept in
// the distribution rather than dropped).
inline double iou(const BinaryMask& a, const BinaryMask& b) {
    const auto o = mask_overlap(a, b);
    if (o.union_ == 0) return 0.0;
    return static_cast<double>(o.intersection) / static_cast<double>(o.union_);
}

// 2|a n b| / (|a| + |b|); both-empty scores 0 as for iou.
inline double dice(const BinaryMask& a, const BinaryMask& b) {
    const auto o = mask_overlap(a, b);
    if (o.count_a + o.count_b == 0) return 0.0;
    return 2.0 * static_cast<double>(o.intersection) /
           static_cast<double>(o.count_a + o.count_b);
}

inline MetricSample pair_consistency(const DualViewPair& pair, bool keep_largest = false,
                                     const std::string& source_id = {}) {
    const BinaryMask a = extract_mask(pair.cc, keep_largest);
    const BinaryMask b = extract_mask(pair.mlo, keep_largest);
    const auto o = mask_overlap(a, b);
    MetricSample s;
    s.source_id = source_id;
    s.empty_union = (o.union_ == 0);
    if (!s.empty_union) {
        s.iou = static_cast<double>(o.intersection) / static_cast<double>(o.union_);
        s.dsc = 2.0 * static_cast<double>(o.intersection) /
                static_cast<double>(o.count_a + o.count_b);
    }
    return s;
}

} // namespace dualgen
