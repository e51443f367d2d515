#pragma once

#include <cstdint>

namespace artipg {

// SplitMix64. Chosen over the standard engines because its output is fully
// specified by these few lines, keeping every seeded draw byte-reproducible
// across platforms and standard-library versions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Hash-combine two 64-bit values into a fresh stream seed.
inline std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull + (tag << 6) + (tag >> 2));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

// Stage tags for deriving independent sub-streams of one object's seed.
namespace rng_stage {
inline constexpr std::uint64_t kManipulate = 1;
inline constexpr std::uint64_t kSample = 2;
inline constexpr std::uint64_t kArticulate = 3;
inline constexpr std::uint64_t kTargetCloud = 4;
inline constexpr std::uint64_t kCompletion = 5;
} // namespace rng_stage

// Per-object seeds come from a hash of (master seed, object index), never from
// sequential draws, so any object can be regenerated in isolation.
inline std::uint64_t deriveObjectSeed(std::uint64_t master_seed, std::uint64_t object_index) {
    return mixSeed(master_seed, 0xA0B1C2D3E4F50617ull ^ object_index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], both inclusive.
    std::int64_t uniformInt(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return lo + static_cast<std::int64_t>(next()); // full 64-bit range
        return lo + static_cast<std::int64_t>(boundedNext(span));
    }

    bool bernoulli(double p) { return uniform() < p; }

    Rng split(std::uint64_t tag) const { return Rng(mixSeed(state_, tag)); }

private:
    // Multiply-shift bounded draw (Lemire), no modulo bias, deterministic.
    std::uint64_t boundedNext(std::uint64_t bound) {
        const std::uint64_t x = next();
        const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0ull - bound) % bound;
            std::uint64_t v = x;
            unsigned __int128 mm = m;
            while (lo < threshold) {
                v = next();
                mm = static_cast<unsigned __int128>(v) * bound;
                lo = static_cast<std::uint64_t>(mm);
            }
            return static_cast<std::uint64_t>(mm >> 64);
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t state_;
};

} // namespace artipg
