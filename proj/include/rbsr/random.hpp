#pragma once

#include <cstdint>

#include "rbsr/core.hpp"

namespace rbsr {

/// SplitMix64 (Steele, Lea, Flood 2014). The constants are part of the
/// scenario format: changing them changes every generated scenario.
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kMul1 = 0xBF58476D1CE4E5B9ULL;
    static constexpr std::uint64_t kMul2 = 0x94D049BB133111EBULL;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += kGamma);
        z = (z ^ (z >> 30)) * kMul1;
        z = (z ^ (z >> 27)) * kMul2;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound) by rejection; bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        for (;;) {
            std::uint64_t v = next();
            if (v < limit) return v % bound;
        }
    }

    /// 32 bytes from four outputs, each written big-endian.
    ItemId next_id() {
        ItemId id{};
        for (int w = 0; w < 4; ++w) {
            std::uint64_t v = next();
            for (int b = 0; b < 8; ++b) id[w * 8 + b] = static_cast<std::uint8_t>(v >> (56 - 8 * b));
        }
        return id;
    }

    // UniformRandomBitGenerator, so it plugs into <algorithm> shuffles.
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return next(); }

private:
    std::uint64_t state_;
};

} // namespace rbsr
