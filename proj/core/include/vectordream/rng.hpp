#pragma once

#include <cmath>
#include <cstdint>

namespace vectordream {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// PCG32 with a Box-Muller cache. Hand-rolled so that seeded runs are
// bit-reproducible across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814full) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n).
    int uniform_int(int n) {
        return static_cast<int>((static_cast<std::uint64_t>(next_u32()) * static_cast<std::uint64_t>(n)) >> 32);
    }

    // Standard normal via Box-Muller; one spare cached per pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * kPi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Derive a deterministic child generator (per-particle streams etc.).
    Rng split(std::uint64_t tag) const {
        std::uint64_t mixed = state_ ^ (tag * 0x9e3779b97f4a7c15ull);
        mixed ^= mixed >> 30;
        mixed *= 0xbf58476d1ce4e5b9ull;
        mixed ^= mixed >> 27;
        return Rng(mixed, inc_ ^ (tag + 1));
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vectordream
