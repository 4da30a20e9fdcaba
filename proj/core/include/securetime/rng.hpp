#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "securetime/bytes.hpp"

namespace securetime {

// Deterministic splitmix64 stream. Every random draw in a simulation comes
// from one of these, so a (scenario, seed) pair pins the whole run. We do
// not use <random> distributions because their output is
// implementation-defined across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n), n > 0. Lemire reduction with rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Uniform in [lo, hi], inclusive.
    std::int64_t range_i64(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        return lo + static_cast<std::int64_t>(bounded(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    std::array<std::uint8_t, 32> next_seed32() {
        std::array<std::uint8_t, 32> out{};
        for (int i = 0; i < 4; ++i) {
            std::uint64_t v = next_u64();
            for (int j = 0; j < 8; ++j)
                out[static_cast<std::size_t>(i * 8 + j)] = static_cast<std::uint8_t>(v >> (56 - 8 * j));
        }
        return out;
    }

    void fill(Bytes& out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 8 == 0) buffered_ = next_u64();
            out.push_back(static_cast<std::uint8_t>(buffered_ >> (56 - 8 * (i % 8))));
        }
    }

    // Derives an independent stream; label diversifies streams sharing a seed.
    static Rng derive(std::uint64_t seed, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (char c : label) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x00000100000001b3ull;
        }
        return Rng(seed ^ h);
    }

  private:
    std::uint64_t state_;
    std::uint64_t buffered_ = 0;
};

}  // namespace securetime
