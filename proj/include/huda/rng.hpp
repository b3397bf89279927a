#pragma once

#include <cstdint>
#include <random>

namespace huda {

/// Deterministic random source. Wraps mt19937_64 with explicit value mapping
/// so streams are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform in [-scale, scale].
    double uniform_sym(double scale) { return (2.0 * uniform01() - 1.0) * scale; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform01() * static_cast<double>(n)); }

    /// Child generator with a decorrelated seed, for per-block streams.
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = eng_() ^ (salt * 0x9e3779b97f4a7c15ull);
        return Rng(s);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace huda
