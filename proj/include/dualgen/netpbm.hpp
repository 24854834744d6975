#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dualgen/errors.hpp"
#include "dualgen/image.hpp"

namespace dualgen {

// Binary NetPBM (P5 grayscale / P6 color) with maxval 255 or 65535.
// 16-bit samples are big-endian. Header comments ('#' to end of line)
// are accepted on read and never emitted on write, so canonical files
// round-trip byte-identically.

namespace detail {

inline int pnm_next_token_int(std::istream& in, const char* what) {
    // Skip whitespace and comments.
    for (;;) {
        int c = in.peek();
        if (c == EOF)
            throw PnmError(PnmErrorKind::MalformedHeader,
                           std::string("unexpected end of header before ") + what);
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    long long value = 0;
    bool any = false;
    for (;;) {
        int c = in.peek();
        if (c == EOF || !std::isdigit(c)) break;
        in.get();
        value = value * 10 + (c - '0');
        any = true;
        if (value > (1LL << 40))
            throw PnmError(PnmErrorKind::MalformedHeader,
                           std::string("absurd value for ") + what);
    }
    if (!any)
        throw PnmError(PnmErrorKind::MalformedHeader,
                       std::string("expected integer for ") + what);
    return static_cast<int>(value);
}

struct PnmHeader {
    int width;
    int height;
    int maxval;
};

inline PnmHeader read_pnm_header(std::istream& in, char expected_digit,
                                 const std::string& path) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in)
        throw PnmError(PnmErrorKind::MalformedHeader, path + ": file too short for magic");
    if (magic[0] != 'P' || magic[1] != expected_digit)
        throw PnmError(PnmErrorKind::UnsupportedMagic,
                       path + ": unsupported magic \"" + std::string(magic, 2) + "\"");
    PnmHeader h;
    h.width = pnm_next_token_int(in, "width");
    h.height = pnm_next_token_int(in, "height");
    h.maxval = pnm_next_token_int(in, "maxval");
    if (h.width <= 0 || h.height <= 0)
        throw PnmError(PnmErrorKind::MalformedHeader, path + ": non-positive dimensions");
    if (h.maxval != 255 && h.maxval != 65535)
        throw PnmError(PnmErrorKind::MalformedHeader,
                       path + ": maxval must be 255 or 65535");
    // Exactly one whitespace byte separates the header from the payload.
    int c = in.get();
    if (c == EOF || !std::isspace(c))
        throw PnmError(PnmErrorKind::MalformedHeader, path + ": missing payload separator");
    return h;
}

inline std::vector<double> read_pnm_samples(std::istream& in, size_t count, int maxval,
                                            const std::string& path) {
    const size_t bytes_per = (maxval == 255) ? 1 : 2;
    std::vector<unsigned char> raw(count * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw PnmError(PnmErrorKind::TruncatedPayload, path + ": truncated pixel payload");
    std::vector<double> out(count);
    const double scale = 1.0 / maxval;
    if (bytes_per == 1) {
        for (size_t i = 0; i < count; ++i) out[i] = raw[i] * scale;
    } else {
        for (size_t i = 0; i < count; ++i) {
            const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
            out[i] = v * scale;
        }
    }
    return out;
}

inline void write_pnm_samples(std::ostream& out, const std::vector<double>& values,
                              int maxval) {
    // Quantization is round-half-up of v*maxval.
    if (maxval == 255) {
        std::vector<unsigned char> raw(values.size());
        for (size_t i = 0; i < values.size(); ++i)
            raw[i] = static_cast<unsigned char>(std::floor(values[i] * 255.0 + 0.5));
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
    } else {
        std::vector<unsigned char> raw(values.size() * 2);
        for (size_t i = 0; i < values.size(); ++i) {
            const unsigned v = static_cast<unsigned>(std::floor(values[i] * 65535.0 + 0.5));
            raw[2 * i] = static_cast<unsigned char>(v >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
    }
}

inline int depth_to_maxval(int depth) {
    if (depth == 8) return 255;
    if (depth == 16) return 65535;
    throw std::invalid_argument("depth must be 8 or 16");
}

} // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PnmError(PnmErrorKind::IoFailure, path + ": cannot open for reading");
    const auto h = detail::read_pnm_header(in, '5', path);
    GrayImage img(h.width, h.height);
    img.data = detail::read_pnm_samples(in, img.size(), h.maxval, path);
    return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path, int depth = 16) {
    img.validate();
    const int maxval = detail::depth_to_maxval(depth);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw PnmError(PnmErrorKind::IoFailure, path + ": cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    detail::write_pnm_samples(out, img.data, maxval);
    if (!out)
        throw PnmError(PnmErrorKind::IoFailure, path + ": write failed");
}

inline RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PnmError(PnmErrorKind::IoFailure, path + ": cannot open for reading");
    const auto h = detail::read_pnm_header(in, '6', path);
    const size_t n = static_cast<size_t>(h.width) * h.height;
    const auto interleaved = detail::read_pnm_samples(in, n * 3, h.maxval, path);
    RgbImage img(h.width, h.height);
    for (size_t i = 0; i < n; ++i) {
        img.r.data[i] = interleaved[3 * i];
        img.g.data[i] = interleaved[3 * i + 1];
        img.b.data[i] = interleaved[3 * i + 2];
    }
    return img;
}

inline void write_ppm(const RgbImage& img, const std::string& path, int depth = 16) {
    img.validate();
    const int maxval = detail::depth_to_maxval(depth);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw PnmError(PnmErrorKind::IoFailure, path + ": cannot open for writing");
    out << "P6\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
    const size_t n = static_cast<size_t>(img.width()) * img.height();
    std::vector<double> interleaved(n * 3);
    for (size_t i = 0; i < n; ++i) {
        interleaved[3 * i] = img.r.data[i];
        interleaved[3 * i + 1] = img.g.data[i];
        interleaved[3 * i + 2] = img.b.data[i];
    }
    detail::write_pnm_samples(out, interleaved, maxval);
    if (!out)
        throw PnmError(PnmErrorKind::IoFailure, path + ": write failed");
}

} // namespace dualgen
