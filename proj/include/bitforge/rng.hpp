#pragma once

#include <cstdint>
#include <random>

namespace bitforge {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Explicit random stream handle. Every stochastic operation takes one of
/// these; forking by index yields independent substreams whose output does
/// not depend on scheduling, so experiments are byte-reproducible for a
/// fixed seed under any worker count.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : key_(splitmix64(seed)), engine_(splitmix64(splitmix64(seed))) {}

    /// Derive an independent substream; (a, b) index it (e.g. phase, trial).
    RandomStream fork(std::uint64_t a, std::uint64_t b = 0) const {
        return RandomStream(from_key{}, splitmix64(key_ ^ splitmix64(a ^ splitmix64(b + 0x6a09e667f3bcc909ULL))));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Fair coin from one high bit.
    bool coin() { return (next_u64() >> 63) != 0; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for test workloads; modulo bias
        // is irrelevant at the sizes used here but we reject anyway.
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

private:
    struct from_key {};
    RandomStream(from_key, std::uint64_t key) : key_(key), engine_(splitmix64(key)) {}

    std::uint64_t key_;
    std::mt19937_64 engine_;
};

} // namespace bitforge
