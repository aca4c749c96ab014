#pragma once

#include <cstdint>

namespace gradorder {

/// SplitMix64 (Steele/Lea/Flood). Chosen over std:: engines so that streams
/// reproduce bit-for-bit across platforms and standard-library versions.
struct SplitMix64 {
    std::uint64_t state;

    constexpr explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    constexpr std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, bound). Modulo draw; bias is negligible for the
    /// permutation sizes used here and keeps the stream layout trivial.
    std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }
};

/// Derives an independent stream seed from (seed, stream). Used so that each
/// (epoch) or (epoch, batch) shuffle draws from its own stream and concurrent
/// epochs cannot interleave generator state.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed);
    const std::uint64_t a = g.next();
    SplitMix64 h(a ^ (stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
    return h.next();
}

}  // namespace gradorder
