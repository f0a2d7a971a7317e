#pragma once

#include <cmath>
#include <cstdint>

namespace mosaic {

// SplitMix64 (Steele, Lea, Flood 2014). All reproducible randomness in this
// project flows through this generator so that masks, noise and weight init
// can be replayed from a single 64-bit seed, in any implementation language.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound) via Lemire's multiply-shift. Deterministic,
    // no rejection loop; the bias is below 2^-40 for bounds under 2^24.
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Derives an independent stream seed from a base seed and stream ids.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    SplitMix64 g(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
    return g.next();
}

// Standard normal deviates via Box-Muller on SplitMix64 uniforms.
struct GaussianSampler {
    SplitMix64 rng;
    bool has_spare = false;
    double spare = 0.0;

    explicit GaussianSampler(std::uint64_t seed) : rng(seed) {}

    double next() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = rng.next_unit();
        double u2 = rng.next_unit();
        // u1 = 0 would blow up the log
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare = r * std::sin(theta);
        has_spare = true;
        return r * std::cos(theta);
    }
};

}  // namespace mosaic
