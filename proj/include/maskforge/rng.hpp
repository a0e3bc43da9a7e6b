#pragma once

#include <cmath>
#include <cstdint>

namespace maskforge {

// Deterministic pseudo-random stream based on splitmix64 (Steele et al.).
// The algorithm is fixed so that a given seed produces the same sequence on
// every platform; nothing in the engine uses the standard library RNGs.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.  Consumes exactly two uniforms per call
    // and keeps no cached deviate, so state() fully determines the stream.
    double next_normal() {
        double u1 = 1.0 - next_unit();  // (0, 1], keeps log() finite
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        return r * std::cos(theta);
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

    // Derives an independent deterministic seed, e.g. per (seed, index) pair.
    static uint64_t mix(uint64_t a, uint64_t b) {
        Rng r(a ^ (b * 0xD1B54A32D192ED03ULL + 0x9E3779B97F4A7C15ULL));
        return r.next_u64();
    }

private:
    uint64_t state_;
};

}  // namespace maskforge
