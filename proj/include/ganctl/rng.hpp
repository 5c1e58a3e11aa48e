// SPDX-License-Identifier: MIT
//
// Deterministic random number generation. All stochastic code in the
// library draws through Rng so that a (seed, stream) pair reproduces the
// same sequence bit-for-bit on every run and platform. std:: distribution
// objects are avoided on purpose: their output is implementation-defined.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ganctl {

// splitmix64, used only to derive well-separated stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Independent stream derived from (seed, stream_id).
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s = seed ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL);
        std::uint64_t b = splitmix64(s);
        return Rng(a ^ (b + stream_id));
    }

    // Uniform on (0, 1), 53-bit resolution, never exactly 0 or 1.
    double uniform() {
        const std::uint64_t bits = gen_() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; fixed consumption of two uniforms
    // per pair keeps the draw sequence independent of caller pattern.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Gamma(shape, 1) by Marsaglia-Tsang squeeze; shape > 0.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Chi-square with dof degrees of freedom (dof > 0, not necessarily integer).
    double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ganctl
