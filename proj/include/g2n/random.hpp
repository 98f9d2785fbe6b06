#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace g2n {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a run seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for stream `stream`, slot `index` of a run seeded with `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(base ^ mix64(stream + 0x51ed270b27a3f1c9ULL)) + index);
}

/// Named seed streams. Each consumer of randomness draws from its own stream so
/// that, for instance, genetic operators never perturb trajectory sampling.
enum class Stream : std::uint64_t {
    network_init = 1,
    genetics = 2,
    env = 3,
    action = 4,
    minibatch = 5,
    evaluation = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                                    std::uint64_t index = 0) noexcept {
    return derive_seed(base, static_cast<std::uint64_t>(stream), index);
}

/// Random source with distribution code written out by hand so results are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) {
        // Lemire's nearly-divisionless method would be faster; rejection keeps it obvious.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return static_cast<std::size_t>(x % n);
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace g2n
