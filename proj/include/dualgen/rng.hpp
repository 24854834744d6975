#pragma once

#include <cmath>
#include <cstdint>

namespace dualgen {

// splitmix64 step, used for seeding and for deriving independent streams.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna), seeded through splitmix64.
//
// Uniform doubles are (x >> 11) * 2^-53 in [0,1).
// Gaussians use the polar-free Box-Muller transform:
//   u1 in (0,1], u2 in [0,1)
//   r = sqrt(-2 ln u1), z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)
// with z1 cached for the next call. The algorithm is fixed so that
// independently written implementations agree in distribution.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] by rejection-free scaling (range is tiny
    // relative to 2^64, so modulo bias is < 2^-50 and irrelevant here).
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        // u1 shifted into (0,1] so log() never sees zero.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Derives a decorrelated child seed; used for per-epoch / per-image streams.
    static uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t index) {
        uint64_t sm = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        splitmix64(sm);
        sm ^= index * 0xd1342543de82ef95ULL;
        return splitmix64(sm);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4] = {};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace dualgen
