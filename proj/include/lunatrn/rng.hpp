#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lunatrn {

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 (whose raw output sequence is pinned by the
/// standard) and implements its own variate transforms, so a given seed
/// produces the same draws on every platform. Standard-library
/// distributions are deliberately avoided: their algorithms are
/// implementation-defined and would break bit-reproducible runs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream seed from a master seed, e.g. one per
    /// Monte-Carlo trial. splitmix64 of (master, index).
    static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
        std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Bernoulli draw.
    bool chance(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (no spare caching, one draw = two
    /// uniforms, so the consumption pattern is easy to reason about).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    /// Poisson draw via Knuth's product method; fine for the small rates
    /// used here (false-detection counts per frame).
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at these scales.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % n);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace lunatrn
