#pragma once

#include <cstdint>
#include <random>

namespace mrsurv {

/// Seeded random stream. The engine's output sequence is fixed by the
/// standard; the transforms below are written out so draws are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Weibull(shape, scale) by inverse transform: scale * (-log U)^(1/shape).
    double weibull(double shape, double scale);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; maps (base, stream) to a decorrelated seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mrsurv
