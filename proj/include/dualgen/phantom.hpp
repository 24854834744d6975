#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualgen/encoding.hpp"
#include "dualgen/image.hpp"
#include "dualgen/netpbm.hpp"
#include "dualgen/rng.hpp"

namespace dualgen {

// Parameters of one synthetic breast. The same breast_scale drives both
// views, so a matched CC/MLO pair has genuinely consistent tissue size.
struct PhantomSpec {
    double breast_scale = 0.7;      // (0,1], latent size shared by both views
    double density = 0.8;           // [0,1], tissue brightness
    double mlo_pectoral_angle = 25; // degrees from vertical, [10,45]
    double noise_sigma = 0.02;      // >= 0, additive clamped Gaussian
    double artifact_rate = 0.0;     // [0,1], chance of a bright bar stamp
    int image_size = 64;

    void validate() const {
        if (!(breast_scale > 0.0 && breast_scale <= 1.0))
            throw std::invalid_argument("PhantomSpec: breast_scale outside (0,1]");
        if (!(density >= 0.0 && density <= 1.0))
            throw std::invalid_argument("PhantomSpec: density outside [0,1]");
        if (!(mlo_pectoral_angle >= 10.0 && mlo_pectoral_angle <= 45.0))
            throw std::invalid_argument("PhantomSpec: pectoral angle outside [10,45]");
        if (!(noise_sigma >= 0.0))
            throw std::invalid_argument("PhantomSpec: noise_sigma must be >= 0");
        if (!(artifact_rate >= 0.0 && artifact_rate <= 1.0))
            throw std::invalid_argument("PhantomSpec: artifact_rate outside [0,1]");
        if (image_size < 16)
            throw std::invalid_argument("PhantomSpec: image_size must be >= 16");
    }

    nlohmann::ordered_json to_json() const {
        return nlohmann::ordered_json{
            {"breast_scale", breast_scale},       {"density", density},
            {"mlo_pectoral_angle", mlo_pectoral_angle}, {"noise_sigma", noise_sigma},
            {"artifact_rate", artifact_rate},     {"image_size", image_size},
        };
    }

    static PhantomSpec from_json(const nlohmann::json& j) {
        PhantomSpec s;
        s.breast_scale = j.at("breast_scale").get<double>();
        s.density = j.at("density").get<double>();
        s.mlo_pectoral_angle = j.at("mlo_pectoral_angle").get<double>();
        s.noise_sigma = j.at("noise_sigma").get<double>();
        s.artifact_rate = j.at("artifact_rate").get<double>();
        s.image_size = j.at("image_size").get<int>();
        return s;
    }
};

namespace phantom_detail {

// Geometry constants, in units of breast_scale * image_size. The MLO
// ellipse and pectoral triangle areas are sized so their union stays
// within +-15% of the CC half-ellipse area across the legal spec ranges.
constexpr double kCcSemiX = 0.80;
constexpr double kCcSemiY = 0.42;
constexpr double kMloSemiMajor = 0.55;
constexpr double kMloEllipseAreaFrac = 0.88; // of CC area
constexpr double kTriangleAreaFrac = 0.12;   // of CC area
constexpr double kMloTilt = 45.0 * 3.14159265358979323846 / 180.0;
constexpr double kEdgeBrightness = 0.45; // falloff floor at the tissue rim

// Squared normalized radius of the CC half-ellipse at a pixel center;
// <= 1 means tissue.
inline double cc_radius2(double px, double py, double scale, int S) {
    const double a = kCcSemiX * scale * S;
    const double b = kCcSemiY * scale * S;
    const double dx = px / a;
    const double dy = (py - 0.5 * S) / b;
    return dx * dx + dy * dy;
}

struct MloGeometry {
    double cx, cy;         // ellipse center
    double A, B;           // semi-axes
    double tri_w, tri_h;   // pectoral triangle legs along top/left edges
};

inline MloGeometry mlo_geometry(double scale, double pectoral_angle_deg, int S) {
    MloGeometry g;
    const double cc_area = 0.5 * 3.14159265358979323846 * (kCcSemiX * scale * S) *
                           (kCcSemiY * scale * S);
    g.A = kMloSemiMajor * scale * S;
    g.B = kMloEllipseAreaFrac * cc_area / (3.14159265358979323846 * g.A);
    g.cx = 0.32 * scale * S + 0.08 * S;
    g.cy = 0.55 * S;
    const double tan_theta = std::tan(pectoral_angle_deg * 3.14159265358979323846 / 180.0);
    g.tri_h = std::sqrt(2.0 * kTriangleAreaFrac * cc_area / tan_theta);
    g.tri_w = g.tri_h * tan_theta;
    return g;
}

inline double mlo_radius2(double px, double py, const MloGeometry& g) {
    const double dx = px - g.cx;
    const double dy = py - g.cy;
    const double c = std::cos(kMloTilt), s = std::sin(kMloTilt);
    const double u = (dx * c + dy * s) / g.A;
    const double v = (-dx * s + dy * c) / g.B;
    return u * u + v * v;
}

// Normalized depth into the pectoral triangle; < 1 means inside.
inline double triangle_coord(double px, double py, const MloGeometry& g) {
    if (g.tri_w <= 0.0 || g.tri_h <= 0.0) return 2.0;
    if (px < 0.0 || py < 0.0) return 2.0;
    return px / g.tri_w + py / g.tri_h;
}

} // namespace phantom_detail

// Noise-free tissue indicator of the CC view; the ground truth the Otsu
// mask is checked against.
inline std::vector<uint8_t> cc_tissue_indicator(const PhantomSpec& spec) {
    const int S = spec.image_size;
    std::vector<uint8_t> mask(static_cast<size_t>(S) * S, 0);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            mask[static_cast<size_t>(y) * S + x] =
                phantom_detail::cc_radius2(x + 0.5, y + 0.5, spec.breast_scale, S) <= 1.0;
    return mask;
}

inline std::vector<uint8_t> mlo_tissue_indicator(const PhantomSpec& spec) {
    const int S = spec.image_size;
    const auto g =
        phantom_detail::mlo_geometry(spec.breast_scale, spec.mlo_pectoral_angle, S);
    std::vector<uint8_t> mask(static_cast<size_t>(S) * S, 0);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const bool inside = phantom_detail::mlo_radius2(px, py, g) <= 1.0 ||
                                phantom_detail::triangle_coord(px, py, g) <= 1.0;
            mask[static_cast<size_t>(y) * S + x] = inside;
        }
    return mask;
}

// Deterministic per (spec, seed). Draw order is fixed: per-pixel CC noise,
// per-pixel MLO noise, artifact decision, artifact placement.
inline DualViewPair generate_pair(const PhantomSpec& spec, uint64_t seed) {
    spec.validate();
    const int S = spec.image_size;
    Rng rng(Rng::derive_seed(seed, 3, 0));

    GrayImage cc(S, S), mlo(S, S);
    const auto g =
        phantom_detail::mlo_geometry(spec.breast_scale, spec.mlo_pectoral_angle, S);
    const double floor = phantom_detail::kEdgeBrightness;

    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double r2 =
                phantom_detail::cc_radius2(x + 0.5, y + 0.5, spec.breast_scale, S);
            double v = 0.0;
            if (r2 <= 1.0) v = spec.density * (floor + (1.0 - floor) * (1.0 - r2));
            cc.at(x, y) = v;
        }
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double r2 = phantom_detail::mlo_radius2(px, py, g);
            const double tc = phantom_detail::triangle_coord(px, py, g);
            double v = 0.0;
            if (r2 <= 1.0) v = spec.density * (floor + (1.0 - floor) * (1.0 - r2));
            if (tc <= 1.0) {
                // Pectoral muscle reads brighter than tissue.
                const double pect = spec.density * (0.75 + 0.25 * (1.0 - tc));
                v = std::max(v, pect);
            }
            mlo.at(x, y) = v;
        }

    if (spec.noise_sigma > 0.0) {
        for (double& v : cc.data) v = clamp01(v + spec.noise_sigma * rng.normal());
        for (double& v : mlo.data) v = clamp01(v + spec.noise_sigma * rng.normal());
    }

    if (rng.uniform() < spec.artifact_rate) {
        GrayImage& target = (rng.uniform() < 0.5) ? cc : mlo;
        const bool horizontal = rng.uniform() < 0.5;
        const int thickness = 2;
        const int len = S / 4 + static_cast<int>(rng.uniform_int(0, S / 4));
        const int pos = static_cast<int>(rng.uniform_int(0, S - thickness - 1));
        const int start = static_cast<int>(rng.uniform_int(0, S - len - 1));
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < thickness; ++j) {
                if (horizontal)
                    target.at(start + i, pos + j) = 1.0;
                else
                    target.at(pos + j, start + i) = 1.0;
            }
    }
    return DualViewPair{std::move(cc), std::move(mlo)};
}

// Uniform ranges the per-pair specs are drawn from.
struct PhantomRanges {
    double scale_min = 0.35, scale_max = 0.95;
    double density_min = 0.55, density_max = 0.95;
    double angle_min = 15.0, angle_max = 40.0;
    double noise_min = 0.01, noise_max = 0.03;
    double artifact_rate = 0.0;
    int image_size = 64;

    nlohmann::ordered_json to_json() const {
        return nlohmann::ordered_json{
            {"scale_min", scale_min},     {"scale_max", scale_max},
            {"density_min", density_min}, {"density_max", density_max},
            {"angle_min", angle_min},     {"angle_max", angle_max},
            {"noise_min", noise_min},     {"noise_max", noise_max},
            {"artifact_rate", artifact_rate}, {"image_size", image_size},
        };
    }

    static PhantomRanges from_json(const nlohmann::json& j) {
        PhantomRanges r;
        r.scale_min = j.at("scale_min").get<double>();
        r.scale_max = j.at("scale_max").get<double>();
        r.density_min = j.at("density_min").get<double>();
        r.density_max = j.at("density_max").get<double>();
        r.angle_min = j.at("angle_min").get<double>();
        r.angle_max = j.at("angle_max").get<double>();
        r.noise_min = j.at("noise_min").get<double>();
        r.noise_max = j.at("noise_max").get<double>();
        r.artifact_rate = j.at("artifact_rate").get<double>();
        r.image_size = j.at("image_size").get<int>();
        return r;
    }
};

struct PairEntry {
    int id = 0;
    uint64_t seed = 0;
    std::string cc_path;
    std::string mlo_path;
    PhantomSpec spec;
};

struct DatasetManifest {
    int n = 0;
    uint64_t seed = 0;
    int image_size = 0;
    PhantomRanges ranges;
    std::vector<PairEntry> pairs;
};

inline PhantomSpec draw_spec(const PhantomRanges& r, Rng& rng) {
    PhantomSpec s;
    s.breast_scale = r.scale_min + (r.scale_max - r.scale_min) * rng.uniform();
    s.density = r.density_min + (r.density_max - r.density_min) * rng.uniform();
    s.mlo_pectoral_angle = r.angle_min + (r.angle_max - r.angle_min) * rng.uniform();
    s.noise_sigma = r.noise_min + (r.noise_max - r.noise_min) * rng.uniform();
    s.artifact_rate = r.artifact_rate;
    s.image_size = r.image_size;
    return s;
}

// Writes n pairs as 16-bit PGM files plus a manifest.json describing each
// pair. Re-running with the same arguments produces identical bytes.
inline DatasetManifest generate_dataset(int n, const PhantomRanges& ranges, uint64_t seed,
                                        const std::string& out_dir) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("generate_dataset: cannot create directory " + out_dir);

    DatasetManifest manifest;
    manifest.n = n;
    manifest.seed = seed;
    manifest.image_size = ranges.image_size;
    manifest.ranges = ranges;

    Rng spec_rng(Rng::derive_seed(seed, 4, 0));
    for (int i = 0; i < n; ++i) {
        PairEntry e;
        e.id = i;
        e.spec = draw_spec(ranges, spec_rng);
        e.seed = Rng::derive_seed(seed, 5, static_cast<uint64_t>(i));
        char name[64];
        std::snprintf(name, sizeof(name), "pair_%05d", i);
        e.cc_path = std::string(name) + "_cc.pgm";
        e.mlo_path = std::string(name) + "_mlo.pgm";
        const DualViewPair pair = generate_pair(e.spec, e.seed);
        write_pgm(pair.cc, (fs::path(out_dir) / e.cc_path).string(), 16);
        write_pgm(pair.mlo, (fs::path(out_dir) / e.mlo_path).string(), 16);
        manifest.pairs.push_back(std::move(e));
    }

    nlohmann::ordered_json j{
        {"kind", "phantom-pairs"},
        {"n", manifest.n},
        {"seed", manifest.seed},
        {"image_size", manifest.image_size},
        {"ranges", ranges.to_json()},
    };
    auto& arr = j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& e : manifest.pairs)
        arr.push_back(nlohmann::ordered_json{{"id", e.id},
                                             {"seed", e.seed},
                                             {"laterality", "R"},
                                             {"cc", e.cc_path},
                                             {"mlo", e.mlo_path},
                                             {"spec", e.spec.to_json()}});
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("generate_dataset: manifest write failed");
    return manifest;
}

} // namespace dualgen
