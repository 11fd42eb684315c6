// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace cbert {

// SplitMix64 finalizer. Fixed by algorithm so that streams are identical
// across platforms and runs.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based generator: value i of a stream is a pure function of
// (key, i). Streams for unrelated purposes are derived by folding labels
// and indices into the key, which keeps every consumer independent and
// reproducible regardless of call order elsewhere.
class CounterRng {
public:
    explicit CounterRng(uint64_t key) : key_(key) {}

    static uint64_t derive_key(std::initializer_list<uint64_t> parts) {
        uint64_t k = 0x243F6A8885A308D3ull;
        for (uint64_t p : parts) k = splitmix64(k ^ splitmix64(p));
        return k;
    }

    static CounterRng derive(std::initializer_list<uint64_t> parts) {
        return CounterRng(derive_key(parts));
    }

    uint64_t key() const { return key_; }

    uint64_t next_u64() { return splitmix64(key_ ^ (0xD1B54A32D192ED03ull * ++counter_)); }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased via rejection.
    uint64_t next_below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller; always consumes exactly two draws.
    double next_gaussian() {
        double u1 = next_unit();
        const double u2 = next_unit();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

// FNV-1a over a string, for deriving per-tensor init streams from names.
inline uint64_t fnv1a(const char* s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace cbert
