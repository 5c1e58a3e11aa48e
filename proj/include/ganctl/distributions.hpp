// SPDX-License-Identifier: MIT
//
// Target / latent sample laws.
#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "ganctl/common.hpp"
#include "ganctl/rng.hpp"

namespace ganctl {

enum class DistKind { gaussian, student_t, standard_normal };

// One of: Gaussian(mean, std), StudentT(shift, dof), StandardNormal.
struct DistSpec {
    DistKind kind = DistKind::standard_normal;
    double mean = 0.0;   // mean for gaussian, location shift for student_t
    double scale = 1.0;  // std for gaussian, dof for student_t

    static DistSpec gaussian(double mean, double std) {
        DistSpec s{DistKind::gaussian, mean, std};
        s.validate();
        return s;
    }
    static DistSpec student_t(double shift, double dof) {
        DistSpec s{DistKind::student_t, shift, dof};
        s.validate();
        return s;
    }
    static DistSpec standard_normal() { return DistSpec{DistKind::standard_normal, 0.0, 1.0}; }

    void validate() const {
        if (kind == DistKind::gaussian && !(scale > 0.0))
            throw ConfigError("DistSpec: gaussian std must be > 0");
        if (kind == DistKind::student_t && !(scale > 0.0))
            throw ConfigError("DistSpec: student_t dof must be > 0");
    }
};

// n i.i.d. draws; identical (spec, n, seed) gives identical output.
inline Eigen::VectorXd sample_dist(const DistSpec& spec, int n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw ConfigError("sample_dist: n must be >= 1");
    Rng rng(seed);
    Eigen::VectorXd out(n);
    switch (spec.kind) {
        case DistKind::standard_normal:
            for (int i = 0; i < n; ++i) out[i] = rng.normal();
            break;
        case DistKind::gaussian:
            for (int i = 0; i < n; ++i) out[i] = spec.mean + spec.scale * rng.normal();
            break;
        case DistKind::student_t:
            // Ratio of a standard normal to a scaled chi draw.
            for (int i = 0; i < n; ++i) {
                const double z = rng.normal();
                const double v = rng.chi_square(spec.scale);
                out[i] = spec.mean + z / std::sqrt(v / spec.scale);
            }
            break;
    }
    return out;
}

}  // namespace ganctl
