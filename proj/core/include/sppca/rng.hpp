#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sppca {

// SplitMix64 step; used only to expand seeds into generator state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// xoshiro256++ with SplitMix64 seeding.
//
// Stream k of a given seed takes the k-th block of four SplitMix64 outputs,
// so (seed, stream) pairs give disjoint, reproducible state blocks. Chains
// use stream = chain index. Normal variates come from Box-Muller with the
// spare deviate cached, so the draw sequence is fully deterministic.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t sm = seed;
        for (std::uint64_t i = 0; i < 4 * stream; ++i) splitmix64_next(sm);
        for (int i = 0; i < 4; ++i) s_[i] = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on {lo, ..., hi} inclusive.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        return lo + next_u64() % (hi - lo + 1);
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sppca
