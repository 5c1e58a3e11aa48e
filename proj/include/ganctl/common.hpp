// SPDX-License-Identifier: MIT
//
// Shared error types, exit codes and small numeric helpers.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ganctl {

// Distinct process exit codes, one per failure class.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    explosion = 3,
    cfl_error = 4,
};

// Invalid parameters, malformed config files, bad CLI arguments.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite state encountered while iterating or simulating.
class ExplosionError : public std::runtime_error {
public:
    explicit ExplosionError(const std::string& what) : std::runtime_error(what) {}
};

// Explicit-scheme stability bound cannot be met within the step cap.
class CflError : public std::runtime_error {
public:
    explicit CflError(const std::string& what) : std::runtime_error(what) {}
};

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

// Stable sigmoid and log-sigmoid; never overflow for finite input.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

}  // namespace ganctl
