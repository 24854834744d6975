#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dualgen {

// Single-view raster. Intensities live in [0,1], row-major storage.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("GrayImage: dimensions must be positive");
    }

    size_t size() const { return data.size(); }

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    bool same_shape(const GrayImage& o) const {
        return width == o.width && height == o.height;
    }

    // Checks the [0,1] range and the size invariant; throws on violation.
    void validate() const {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("GrayImage: dimensions must be positive");
        if (data.size() != static_cast<size_t>(width) * height)
            throw std::invalid_argument("GrayImage: data length != width*height");
        for (double v : data)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("GrayImage: intensity outside [0,1]");
    }
};

// Three equally shaped planes.
struct RgbImage {
    GrayImage r, g, b;

    RgbImage() = default;
    RgbImage(int w, int h) : r(w, h), g(w, h), b(w, h) {}
    RgbImage(GrayImage red, GrayImage green, GrayImage blue)
        : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
        if (!r.same_shape(g) || !r.same_shape(b))
            throw std::invalid_argument("RgbImage: channel dimensions differ");
    }

    int width() const { return r.width; }
    int height() const { return r.height; }

    void validate() const {
        r.validate();
        g.validate();
        b.validate();
        if (!r.same_shape(g) || !r.same_shape(b))
            throw std::invalid_argument("RgbImage: channel dimensions differ");
    }
};

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

} // namespace dualgen
