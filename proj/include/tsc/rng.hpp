#pragma once

#include <cstdint>
#include <random>

namespace tsc {

// SplitMix64 finalizer. Base mixing primitive for seeding and counter streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stateless counter-based stream: draw k of stream (seed, stream) is a pure
// function, so any single draw can be reproduced in isolation.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : base_(mix64(mix64(seed) ^ (0x632BE59BD9B4E019ULL * (stream + 1)))) {}

    // uniform draw k in [0, 1)
    double uniform(std::uint64_t k) const {
        return static_cast<double>(mix64(base_ ^ mix64(k)) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t base_;
};

// Sequential generator. All transforms are explicit over the standardized
// mt19937_64 output so that sequences are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % range);
    }

    // index in [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(next_u64() % n);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace tsc
