#pragma once

#include <cmath>
#include <cstdint>

namespace idlelab {

// PCG32 (XSH-RR variant) with an explicit stream selector. Pure integer
// state transitions, so identical (seed, stream) pairs produce identical
// draws on every platform. Each simulator stream (per-core arrivals,
// per-core service times, aggregate arrivals, dispatch choices) owns one
// instance; adding streams never perturbs existing ones.
class SplitStream {
public:
    SplitStream(std::uint64_t seed, std::uint64_t stream)
        : state_(0), inc_((stream << 1u) | 1u) {
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        std::uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Exponential with the given rate (mean 1/rate).
    double next_exponential(double rate) {
        return -std::log1p(-next_unit()) / rate;
    }

    // Uniform integer in [0, n) without modulo bias (Lemire's method).
    std::uint32_t next_below(std::uint32_t n) {
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * n;
        auto low = static_cast<std::uint32_t>(m);
        if (low < n) {
            std::uint32_t threshold = (0u - n) % n;
            while (low < threshold) {
                m = static_cast<std::uint64_t>(next_u32()) * n;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

} // namespace idlelab
