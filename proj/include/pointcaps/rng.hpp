#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "pointcaps/errors.hpp"

namespace pointcaps {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random source. All distributions are implemented explicitly
// (rather than through std::*_distribution, whose output is
// implementation-defined) so that a given seed produces the same stream on
// every platform and standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)), seed_material_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw ArgumentError("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % n);
    }

    // Standard normal via Box-Muller; the second deviate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Uniform in the closed unit ball (rejection sampling from the cube).
    std::array<double, 3> unit_ball() {
        while (true) {
            const double x = uniform(-1.0, 1.0);
            const double y = uniform(-1.0, 1.0);
            const double z = uniform(-1.0, 1.0);
            if (x * x + y * y + z * z <= 1.0) return {x, y, z};
        }
    }

    // Independent stream derived from this rng's seed material and a stream id.
    Rng fork(std::uint64_t stream) const {
        return Rng(seed_material_ ^ splitmix64(stream + 0x51ed2701'8ac0e2f5ULL));
    }

  private:
    std::mt19937_64 gen_;
    std::uint64_t seed_material_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Deterministic Fisher-Yates shuffle.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace pointcaps
