#pragma once

#include <cstdint>
#include <random>

#include "gmtlab/geometry.hpp"

namespace gmtlab {

/// Deterministic RNG for scenario reproducibility. std::mt19937_64 has a
/// pinned algorithm; the double conversions below avoid the
/// implementation-defined std::uniform_real_distribution, so identical seeds
/// give identical streams on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0,1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t integer(std::uint64_t bound) { return eng_() % bound; }

    /// Standard normal via Box-Muller on the deterministic uniforms.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Vec point_in_box(const Vec& lo, const Vec& hi, int n) {
        Vec p{};
        for (int i = 0; i < n; ++i) p[i] = uniform(lo[i], hi[i]);
        return p;
    }

    std::uint64_t fork() { return eng_(); }

  private:
    std::mt19937_64 eng_;
};

} // namespace gmtlab
