// SPDX-License-Identifier: MIT
//
// Euler-Maruyama simulation of the controlled training dynamics.
//
// Learning-rate control:
//   dw  =  u^w g_w dt + u^w sqrt(eta_w)  sigma_w  dW1
//   dth = -u^t g_t dt + u^t sqrt(eta_t)  sigma_t  dW2
// Batch-size control (time-rescaled form):
//   dw  =  (g_w / m) dt + (sqrt(eta_w) / m) sigma_w dW1
//   dth = -(g_t / m) dt + (sqrt(eta_t) / m) sigma_t dW2
// W1 and W2 are independent streams derived from one seed. Identical
// (config, q0, seed) reproduce a path bit for bit.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <thread>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/csv.hpp"
#include "ganctl/field.hpp"
#include "ganctl/rng.hpp"

namespace ganctl {

// Control policies evaluated along the path.
using LrPolicy = std::function<std::array<double, 2>(double t, const ParamPoint& q)>;
using BatchPolicy = std::function<double(double t, const ParamPoint& q)>;

inline LrPolicy constant_lr_policy(double u_w, double u_theta) {
    return [u_w, u_theta](double, const ParamPoint&) { return std::array<double, 2>{u_w, u_theta}; };
}

inline BatchPolicy constant_batch_policy(double m) {
    return [m](double, const ParamPoint&) { return m; };
}

struct SdeConfig {
    std::shared_ptr<const DriftDiffusionField> field;
    double horizon = 1.0;
    double dt = 1e-2;
    std::uint64_t seed = 0;
    double base_eta_w = 1.0;
    double base_eta_theta = 1.0;
    bool record_noise = false;

    void validate() const {
        if (!field) throw ConfigError("SdeConfig: field is required");
        if (!(horizon > 0.0) || !(dt > 0.0) || dt > horizon * (1.0 + 1e-12))
            throw ConfigError("SdeConfig: need 0 < dt <= horizon");
        if (!(base_eta_w > 0.0) || !(base_eta_theta > 0.0))
            throw ConfigError("SdeConfig: base rates must be > 0");
    }
};

struct SdePath {
    std::vector<double> times;
    std::vector<ParamPoint> states;
    std::vector<std::array<double, 2>> controls;  // (u_w, u_theta), or (m, m)
    bool exploded = false;
    std::vector<Eigen::VectorXd> noise_w, noise_theta;  // stored when record_noise

    const ParamPoint& endpoint() const { return states.back(); }
    double horizon() const { return times.back(); }
};

// Pre-drawn Brownian increments on a finer grid; a simulation running at
// dt = k * fine_dt consumes k rows per step. Enables common-random-number
// comparisons across step sizes.
struct FrozenNoise {
    double fine_dt = 0.0;
    std::vector<Eigen::VectorXd> dw_w, dw_theta;
};

namespace detail {

// Step layout: floor(horizon/dt) full steps, then one partial step with
// the remaining time if it is not negligible.
inline std::vector<double> step_sizes(double horizon, double dt) {
    const auto n_full = static_cast<long>(std::floor(horizon / dt + 1e-9));
    std::vector<double> steps(static_cast<std::size_t>(n_full), dt);
    const double rem = horizon - static_cast<double>(n_full) * dt;
    if (rem > 1e-12 * horizon) steps.push_back(rem);
    return steps;
}

struct NoiseSource {
    Rng rng_w, rng_theta;
    const FrozenNoise* frozen = nullptr;
    std::size_t cursor = 0;

    NoiseSource(std::uint64_t seed, const FrozenNoise* fz)
        : rng_w(Rng::stream(seed, 1)), rng_theta(Rng::stream(seed, 2)), frozen(fz) {}

    // Increment over one step of length h, per block.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> draw(double h, int dw, int dt_dim) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(dw);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dt_dim);
        if (frozen) {
            const auto k = static_cast<std::size_t>(std::llround(h / frozen->fine_dt));
            if (cursor + k > frozen->dw_w.size())
                throw ConfigError("FrozenNoise: not enough increments for the requested horizon");
            for (std::size_t j = 0; j < k; ++j) {
                a += frozen->dw_w[cursor + j];
                b += frozen->dw_theta[cursor + j];
            }
            cursor += k;
        } else {
            const double s = std::sqrt(h);
            for (int i = 0; i < dw; ++i) a[i] = s * rng_w.normal();
            for (int i = 0; i < dt_dim; ++i) b[i] = s * rng_theta.normal();
        }
        return {a, b};
    }
};

}  // namespace detail

// Draw a frozen increment table covering the horizon at resolution fine_dt.
inline FrozenNoise draw_noise(const SdeConfig& cfg, double fine_dt) {
    FrozenNoise fz;
    fz.fine_dt = fine_dt;
    detail::NoiseSource src(cfg.seed, nullptr);
    const auto steps = detail::step_sizes(cfg.horizon, fine_dt);
    const int dw = cfg.field->dim_w(), dt_dim = cfg.field->dim_theta();
    for (double h : steps) {
        auto [a, b] = src.draw(h, dw, dt_dim);
        fz.dw_w.push_back(std::move(a));
        fz.dw_theta.push_back(std::move(b));
    }
    return fz;
}

inline SdePath simulate_lr_sde(const SdeConfig& cfg, const ParamPoint& q0, const LrPolicy& policy,
                               const FrozenNoise* frozen = nullptr) {
    cfg.validate();
    const double sqrt_eta_w = std::sqrt(cfg.base_eta_w);
    const double sqrt_eta_t = std::sqrt(cfg.base_eta_theta);
    const auto steps = detail::step_sizes(cfg.horizon, cfg.dt);
    detail::NoiseSource noise(cfg.seed, frozen);

    SdePath path;
    path.times.reserve(steps.size() + 1);
    path.states.reserve(steps.size() + 1);
    path.times.push_back(0.0);
    path.states.push_back(q0);

    ParamPoint q = q0;
    double t = 0.0;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const double h = steps[k];
        const auto u = policy(t, q);
        if (!(u[0] > 0.0) || !(u[1] > 0.0) || !std::isfinite(u[0]) || !std::isfinite(u[1]))
            throw ConfigError("simulate_lr_sde: control must be positive and finite");
        const FieldEval f = cfg.field->at(q);
        auto [dw1, dw2] = noise.draw(h, f.g_w.size(), f.g_theta.size());
        if (cfg.record_noise) {
            path.noise_w.push_back(dw1);
            path.noise_theta.push_back(dw2);
        }
        q.w += u[0] * f.g_w * h + (u[0] * sqrt_eta_w) * (f.sigma_w * dw1);
        q.theta += -u[1] * f.g_theta * h + (u[1] * sqrt_eta_t) * (f.sigma_theta * dw2);
        t = (k + 1 == steps.size()) ? cfg.horizon : t + h;
        if (!q.is_finite()) {
            path.exploded = true;
            return path;
        }
        path.times.push_back(t);
        path.states.push_back(q);
        path.controls.push_back(u);
    }
    return path;
}

inline SdePath simulate_batch_sde(const SdeConfig& cfg, const ParamPoint& q0,
                                  const BatchPolicy& policy, const FrozenNoise* frozen = nullptr) {
    cfg.validate();
    const double sqrt_eta_w = std::sqrt(cfg.base_eta_w);
    const double sqrt_eta_t = std::sqrt(cfg.base_eta_theta);
    const auto steps = detail::step_sizes(cfg.horizon, cfg.dt);
    detail::NoiseSource noise(cfg.seed, frozen);

    SdePath path;
    path.times.push_back(0.0);
    path.states.push_back(q0);

    ParamPoint q = q0;
    double t = 0.0;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const double h = steps[k];
        const double m = policy(t, q);
        if (!(m >= 1.0 - 1e-12) || !std::isfinite(m))
            throw ConfigError("simulate_batch_sde: batch scale must lie in [1, m_max]");
        const FieldEval f = cfg.field->at(q);
        auto [dw1, dw2] = noise.draw(h, f.g_w.size(), f.g_theta.size());
        if (cfg.record_noise) {
            path.noise_w.push_back(dw1);
            path.noise_theta.push_back(dw2);
        }
        q.w += (f.g_w / m) * h + (sqrt_eta_w / m) * (f.sigma_w * dw1);
        q.theta += -(f.g_theta / m) * h + (sqrt_eta_t / m) * (f.sigma_theta * dw2);
        t = (k + 1 == steps.size()) ? cfg.horizon : t + h;
        if (!q.is_finite()) {
            path.exploded = true;
            return path;
        }
        path.times.push_back(t);
        path.states.push_back(q);
        path.controls.push_back({m, m});
    }
    return path;
}

// Brownian-scaling time change: from a path of the pre-rescaling dynamics
//   dq = g dt + sqrt(eta/m) sigma dW   on [0, T]
// build q~(t) = q(t / m) on [0, m T]; by the scaling property of Brownian
// motion the stretched path solves the batch-size dynamics
//   dq~ = (g/m) dt + (sqrt(eta)/m) sigma dW~.
// Each input sample at time t lands at output time m t. With
// target_horizon >= 0 the output is truncated there; consulting the input
// beyond its horizon (target_horizon / m > T) is a domain error.
inline SdePath rescale_path(const SdePath& path, double m, double target_horizon = -1.0) {
    if (!(m >= 1.0)) throw ConfigError("rescale_path: m must be >= 1");
    const double available = path.horizon() * m;
    if (target_horizon > available * (1.0 + 1e-12))
        throw ConfigError("rescale_path: requested horizon exceeds the rescaled input horizon");
    const double cut = target_horizon >= 0.0 ? target_horizon : available;
    SdePath out;
    out.exploded = path.exploded;
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        const double t = path.times[i] * m;
        if (t > cut * (1.0 + 1e-12)) break;
        out.times.push_back(t);
        out.states.push_back(path.states[i]);
        if (i < path.controls.size()) out.controls.push_back(path.controls[i]);
    }
    return out;
}

// ============================================================================
// Ensembles. Per-path seeds derive from (seed, path index), so chunked
// parallel execution and serial execution produce identical results.
// ============================================================================

inline std::uint64_t path_seed(std::uint64_t base_seed, std::size_t index) {
    std::uint64_t s = base_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    return splitmix64(s);
}

inline std::vector<SdePath> run_ensemble(const SdeConfig& cfg,
                                         const std::function<SdePath(const SdeConfig&)>& one_path,
                                         std::size_t n_paths, unsigned n_threads = 0) {
    std::vector<SdePath> out(n_paths);
    if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, 8);
    const auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            SdeConfig c = cfg;
            c.seed = path_seed(cfg.seed, i);
            out[i] = one_path(c);
        }
    };
    if (n_threads <= 1 || n_paths < 2 * n_threads) {
        worker(0, n_paths);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_paths + n_threads - 1) / n_threads;
        for (unsigned k = 0; k < n_threads; ++k) {
            const std::size_t lo = k * chunk;
            const std::size_t hi = std::min(n_paths, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

// CSV export: t, w_1..w_dw, theta_1..theta_dt, then the control applied on
// the step starting at t (u_w, u_theta, or m_theta in batch mode; the
// terminal row repeats the last applied control).
inline void write_path_csv(const SdePath& path, std::ostream& os, bool batch_mode = false) {
    if (path.states.empty()) return;
    const auto dw = path.states.front().w.size();
    const auto dt_dim = path.states.front().theta.size();
    os << 't';
    for (Eigen::Index i = 1; i <= dw; ++i) os << ",w_" << i;
    for (Eigen::Index i = 1; i <= dt_dim; ++i) os << ",theta_" << i;
    os << (batch_mode ? ",m_theta" : ",u_w,u_theta") << '\n';
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        os << format_double(path.times[k]);
        const auto& q = path.states[k];
        for (Eigen::Index i = 0; i < dw; ++i) os << ',' << format_double(q.w[i]);
        for (Eigen::Index i = 0; i < dt_dim; ++i) os << ',' << format_double(q.theta[i]);
        const auto& u = path.controls.empty()
                            ? std::array<double, 2>{1.0, 1.0}
                            : path.controls[std::min(k, path.controls.size() - 1)];
        if (batch_mode) os << ',' << format_double(u[0]);
        else os << ',' << format_double(u[0]) << ',' << format_double(u[1]);
        os << '\n';
    }
}

// Mean and standard error of a scalar functional of the path endpoints.
struct MomentEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MomentEstimate endpoint_moment(const std::vector<SdePath>& paths,
                                      const std::function<double(const SdePath&)>& f) {
    MomentEstimate e;
    double sum = 0.0, sum2 = 0.0;
    for (const auto& p : paths) {
        if (p.exploded) continue;
        const double v = f(p);
        sum += v;
        sum2 += v * v;
        ++e.n;
    }
    if (e.n == 0) return e;
    e.mean = sum / static_cast<double>(e.n);
    const double var = std::max(0.0, sum2 / static_cast<double>(e.n) - e.mean * e.mean);
    e.se = std::sqrt(var / static_cast<double>(e.n));
    return e;
}

}  // namespace ganctl
