#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "dualgen/image.hpp"

namespace dualgen {

// The CC and MLO views of one breast, equal dimensions.
struct DualViewPair {
    GrayImage cc;
    GrayImage mlo;

    void validate() const {
        cc.validate();
        mlo.validate();
        if (!cc.same_shape(mlo))
            throw std::invalid_argument("DualViewPair: views differ in shape");
    }
};

// Blue-channel strategy for the three-channel representation.
enum class ThirdChannelMode { Sum, AbsDiff, Zero };

inline std::string to_string(ThirdChannelMode m) {
    switch (m) {
        case ThirdChannelMode::Sum: return "sum";
        case ThirdChannelMode::AbsDiff: return "absdiff";
        case ThirdChannelMode::Zero: return "zero";
    }
    return "?";
}

inline ThirdChannelMode third_channel_mode_from_string(const std::string& s) {
    if (s == "sum") return ThirdChannelMode::Sum;
    if (s == "absdiff") return ThirdChannelMode::AbsDiff;
    if (s == "zero") return ThirdChannelMode::Zero;
    throw std::invalid_argument("unknown third-channel mode: " + s);
}

inline double third_channel_value(double cc, double mlo, ThirdChannelMode mode) {
    switch (mode) {
        case ThirdChannelMode::Sum: return clamp01(cc + mlo);
        case ThirdChannelMode::AbsDiff: return std::fabs(cc - mlo);
        case ThirdChannelMode::Zero: return 0.0;
    }
    return 0.0;
}

// r = CC, g = MLO, b = the mode's combination of the two. Sums beyond 1
// are clamped so the image invariant holds.
inline RgbImage encode(const DualViewPair& pair, ThirdChannelMode mode) {
    if (!pair.cc.same_shape(pair.mlo))
        throw std::invalid_argument("encode: view dimensions differ");
    RgbImage out(pair.cc.width, pair.cc.height);
    out.r = pair.cc;
    out.g = pair.mlo;
    for (size_t i = 0; i < out.b.size(); ++i)
        out.b.data[i] = third_channel_value(pair.cc.data[i], pair.mlo.data[i], mode);
    return out;
}

// CC from red, MLO from green; the blue plane is discarded.
inline DualViewPair decode(const RgbImage& img) {
    return DualViewPair{img.r, img.g};
}

// Mean absolute deviation between the blue plane and the mode's formula
// applied to (r, g). Diagnostic only; generated images are free to violate
// the relation.
inline double consistency_residual(const RgbImage& img, ThirdChannelMode mode) {
    double sum = 0.0;
    for (size_t i = 0; i < img.b.size(); ++i)
        sum += std::fabs(img.b.data[i] -
                         third_channel_value(img.r.data[i], img.g.data[i], mode));
    return sum / static_cast<double>(img.b.size());
}

} // namespace dualgen
