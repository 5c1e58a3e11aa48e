// SPDX-License-Identifier: MIT
//
// Numerical treatment of the learning-rate game and the batch-size
// control problem on 1+1 dimensional grids.
//
// Learning-rate value function (terminal objective g, controls in
// [u_min, u_max]^2):
//   v_t + max_{u^w} { u^w g_w v_w + 1/2 (u^w)^2 Sb_w v_ww }
//       + min_{u^t} { -u^t g_t v_t + 1/2 (u^t)^2 Sb_t v_tt } = 0,  v(T,.) = g,
// with Sb_x = eta_x sigma_x sigma_x'. The Hamiltonian is additively
// separable across the two controls, so each per-player optimum is the
// closed-form clipped quadratic maximizer/minimizer below.
//
// Batch-size value function (control m in [1, m_max]):
//   v_t + min_m { (g_w v_w - g_t v_t)/m + (Sb_w v_ww + Sb_t v_tt)/(2 m^2) } = 0.
//
// Scheme: explicit backward Euler, central second differences, first
// differences central where the diffusion dominates enough to keep the
// scheme monotone and upwinded on the drift sign elsewhere, zero second
// difference at the spatial boundary, time step bounded by the CFL
// condition (auto-shrunk up to a step cap).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/csv.hpp"
#include "ganctl/field.hpp"
#include "ganctl/sde.hpp"

namespace ganctl {

// ============================================================================
// Closed-form clipped controls
// ============================================================================

// argmax over [u_min, u_max] of  A u + 1/2 B u^2.
// Concave (B < 0): clamped vertex -A/B. Otherwise: the endpoint farther
// from the vertex, ties to u_max; degenerate linear/constant cases follow
// the same endpoint comparison in the limit.
inline double maximize_quadratic_control(double a, double b, double u_min, double u_max) {
    if (b < 0.0) return clamp(-a / b, u_min, u_max);
    if (b > 0.0) {
        const double vertex = -a / b;
        return (std::abs(u_max - vertex) >= std::abs(u_min - vertex)) ? u_max : u_min;
    }
    if (a > 0.0) return u_max;
    if (a < 0.0) return u_min;
    return u_max;
}

// argmin over [u_min, u_max] of  -C u + 1/2 D u^2 (mirror of the above).
inline double minimize_quadratic_control(double c, double d, double u_min, double u_max) {
    if (d > 0.0) return clamp(c / d, u_min, u_max);
    if (d < 0.0) {
        const double vertex = c / d;
        return (std::abs(u_max - vertex) >= std::abs(u_min - vertex)) ? u_max : u_min;
    }
    if (c > 0.0) return u_max;
    if (c < 0.0) return u_min;
    return u_max;
}

// argmin over m in [1, m_max] of  A/m + B/(2 m^2), solved in y = 1/m where
// the objective is the quadratic A y + 1/2 B y^2 on [1/m_max, 1]. The
// wrong-convexity branch is the endpoint comparison in 1/m, ties to m_max.
inline double minimize_batch_control(double a, double b, double m_max) {
    if (!(m_max >= 1.0)) throw ConfigError("batch control: m_max must be >= 1");
    const double y_lo = 1.0 / m_max, y_hi = 1.0;
    double y;
    if (b > 0.0) {
        y = clamp(-a / b, y_lo, y_hi);
    } else if (b < 0.0) {
        const double vertex = -a / b;
        y = (std::abs(y_lo - vertex) >= std::abs(y_hi - vertex)) ? y_lo : y_hi;
    } else if (a > 0.0) {
        y = y_lo;
    } else if (a < 0.0) {
        y = y_hi;
    } else {
        y = y_lo;
    }
    // 1/(1/m_max) can land one ulp outside the interval.
    return clamp(1.0 / y, 1.0, m_max);
}

struct ControlBounds {
    double u_min = 0.5;
    double u_max = 2.0;

    void validate() const {
        if (!(u_min > 0.0) || !(u_min <= u_max))
            throw ConfigError("ControlBounds: need 0 < u_min <= u_max");
    }
};

// Optimal adjustment pair for the learning-rate game from gradient,
// value-derivative and diffusion data. A:B below is Tr[A' B].
inline std::pair<double, double> optimal_lr_policy(
    const Eigen::VectorXd& grad_w, const Eigen::VectorXd& grad_theta, const Eigen::VectorXd& vw,
    const Eigen::VectorXd& vtheta, const Eigen::MatrixXd& vww, const Eigen::MatrixXd& vthetatheta,
    const Eigen::MatrixXd& sigma_bar_w, const Eigen::MatrixXd& sigma_bar_theta,
    const ControlBounds& bounds) {
    bounds.validate();
    const double a_w = grad_w.dot(vw);
    const double b_w = sigma_bar_w.cwiseProduct(vww).sum();
    const double c_t = grad_theta.dot(vtheta);
    const double d_t = sigma_bar_theta.cwiseProduct(vthetatheta).sum();
    return {maximize_quadratic_control(a_w, b_w, bounds.u_min, bounds.u_max),
            minimize_quadratic_control(c_t, d_t, bounds.u_min, bounds.u_max)};
}

// Optimal batch scale from the same data.
inline double optimal_batch_policy(const Eigen::VectorXd& grad_w,
                                   const Eigen::VectorXd& grad_theta, const Eigen::VectorXd& vw,
                                   const Eigen::VectorXd& vtheta, const Eigen::MatrixXd& vww,
                                   const Eigen::MatrixXd& vthetatheta,
                                   const Eigen::MatrixXd& sigma_bar_w,
                                   const Eigen::MatrixXd& sigma_bar_theta, double m_max) {
    const double drift = grad_w.dot(vw) - grad_theta.dot(vtheta);
    const double curv =
        sigma_bar_w.cwiseProduct(vww).sum() + sigma_bar_theta.cwiseProduct(vthetatheta).sum();
    return minimize_batch_control(drift, curv, m_max);
}

// ============================================================================
// Space-time grid containers
// ============================================================================

struct GridSpec {
    double w_lo = -1.0, w_hi = 1.0;
    int n_w = 51;
    double theta_lo = -1.0, theta_hi = 1.0;
    int n_theta = 51;
    double horizon = 1.0;
    int n_t = 100;
    long max_time_steps = 20000;  // auto-shrink cap for the CFL condition

    void validate() const {
        if (n_w < 3 || n_theta < 3 || n_t < 1) throw ConfigError("GridSpec: grid too small");
        if (!(w_hi > w_lo) || !(theta_hi > theta_lo) || !(horizon > 0.0))
            throw ConfigError("GridSpec: empty axis");
    }
    double dw() const { return (w_hi - w_lo) / (n_w - 1); }
    double dtheta() const { return (theta_hi - theta_lo) / (n_theta - 1); }
};

// Value function on the grid; slice k lives at time k * dt, slice n_t is
// the terminal objective exactly.
class ValueGrid {
public:
    ValueGrid() = default;
    ValueGrid(const GridSpec& spec, int n_t_effective)
        : w_lo_(spec.w_lo), dw_(spec.dw()), n_w_(spec.n_w), theta_lo_(spec.theta_lo),
          dth_(spec.dtheta()), n_th_(spec.n_theta), horizon_(spec.horizon), n_t_(n_t_effective),
          v_(static_cast<std::size_t>(n_t_effective + 1) * spec.n_w * spec.n_theta, 0.0) {}

    int n_w() const { return n_w_; }
    int n_theta() const { return n_th_; }
    int n_t() const { return n_t_; }
    double horizon() const { return horizon_; }
    double dt() const { return horizon_ / n_t_; }
    double w_at(int i) const { return w_lo_ + i * dw_; }
    double theta_at(int j) const { return theta_lo_ + j * dth_; }

    double& at(int k, int i, int j) {
        return v_[(static_cast<std::size_t>(k) * n_w_ + i) * n_th_ + j];
    }
    double at(int k, int i, int j) const {
        return v_[(static_cast<std::size_t>(k) * n_w_ + i) * n_th_ + j];
    }

    // Linear in time, bilinear in space, clamped to the box.
    double interpolate(double t, double w, double theta) const {
        const double tau = clamp(t, 0.0, horizon_) / dt();
        const int k = std::min(static_cast<int>(tau), n_t_ - 1);
        const double lam = tau - k;
        return (1.0 - lam) * bilinear(k, w, theta) + lam * bilinear(k + 1, w, theta);
    }

    double bilinear(int k, double w, double theta) const {
        const double x = clamp((w - w_lo_) / dw_, 0.0, static_cast<double>(n_w_ - 1));
        const double y = clamp((theta - theta_lo_) / dth_, 0.0, static_cast<double>(n_th_ - 1));
        const int i = std::min(static_cast<int>(x), n_w_ - 2);
        const int j = std::min(static_cast<int>(y), n_th_ - 2);
        const double ax = x - i, ay = y - j;
        return (1.0 - ax) * ((1.0 - ay) * at(k, i, j) + ay * at(k, i, j + 1)) +
               ax * ((1.0 - ay) * at(k, i + 1, j) + ay * at(k, i + 1, j + 1));
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    double w_lo_ = 0.0, dw_ = 1.0;
    int n_w_ = 0;
    double theta_lo_ = 0.0, dth_ = 1.0;
    int n_th_ = 0;
    double horizon_ = 1.0;
    int n_t_ = 0;
    std::vector<double> v_;
};

// Extracted feedback controls, one pair per node per time interval
// [t_k, t_{k+1}); piecewise constant in time, bilinear in space.
class ControlField {
public:
    ControlField() = default;
    ControlField(const GridSpec& spec, int n_t_effective, bool batch_mode, double lo, double hi)
        : w_lo_(spec.w_lo), dw_(spec.dw()), n_w_(spec.n_w), theta_lo_(spec.theta_lo),
          dth_(spec.dtheta()), n_th_(spec.n_theta), horizon_(spec.horizon), n_t_(n_t_effective),
          batch_mode_(batch_mode), lo_(lo), hi_(hi),
          u_w_(static_cast<std::size_t>(n_t_effective) * spec.n_w * spec.n_theta, lo),
          u_theta_(batch_mode ? 0 : u_w_.size(), lo) {}

    bool batch_mode() const { return batch_mode_; }
    double lower_bound() const { return lo_; }
    double upper_bound() const { return hi_; }
    int n_t() const { return n_t_; }
    double dt() const { return horizon_ / n_t_; }

    double& u_w_at(int k, int i, int j) { return u_w_[index(k, i, j)]; }
    double& u_theta_at(int k, int i, int j) { return u_theta_[index(k, i, j)]; }
    double u_w_at(int k, int i, int j) const { return u_w_[index(k, i, j)]; }
    double u_theta_at(int k, int i, int j) const { return u_theta_[index(k, i, j)]; }

    // (u_w, u_theta) pair, or (m, m) in batch mode.
    std::array<double, 2> lookup(double t, double w, double theta) const {
        const int k = std::min(static_cast<int>(clamp(t, 0.0, horizon_) / dt()),
                               n_t_ - 1);
        const double a = bilinear(u_w_, k, w, theta);
        if (batch_mode_) return {a, a};
        return {a, bilinear(u_theta_, k, w, theta)};
    }

    LrPolicy as_lr_policy() const {
        return [this](double t, const ParamPoint& q) { return lookup(t, q.w[0], q.theta[0]); };
    }
    BatchPolicy as_batch_policy() const {
        return [this](double t, const ParamPoint& q) { return lookup(t, q.w[0], q.theta[0])[0]; };
    }

private:
    std::size_t index(int k, int i, int j) const {
        return (static_cast<std::size_t>(k) * n_w_ + i) * n_th_ + j;
    }

    double bilinear(const std::vector<double>& u, int k, double w, double theta) const {
        const double x = clamp((w - w_lo_) / dw_, 0.0, static_cast<double>(n_w_ - 1));
        const double y = clamp((theta - theta_lo_) / dth_, 0.0, static_cast<double>(n_th_ - 1));
        const int i = std::min(static_cast<int>(x), n_w_ - 2);
        const int j = std::min(static_cast<int>(y), n_th_ - 2);
        const double ax = x - i, ay = y - j;
        const auto val = [&](int ii, int jj) { return u[index(k, ii, jj)]; };
        return (1.0 - ax) * ((1.0 - ay) * val(i, j) + ay * val(i, j + 1)) +
               ax * ((1.0 - ay) * val(i + 1, j) + ay * val(i + 1, j + 1));
    }

    double w_lo_ = 0.0, dw_ = 1.0;
    int n_w_ = 0;
    double theta_lo_ = 0.0, dth_ = 1.0;
    int n_th_ = 0;
    double horizon_ = 1.0;
    int n_t_ = 0;
    bool batch_mode_ = false;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> u_w_, u_theta_;
};

struct HjbSolution {
    ValueGrid value;
    ControlField policy;
    int n_t_effective = 0;  // after any CFL shrink
};

// ============================================================================
// Backward finite-difference sweeps
// ============================================================================

namespace detail {

struct NodeData {
    std::vector<double> g_w, g_th;      // drift coefficients per node
    std::vector<double> sb_w, sb_th;    // eta_x sigma_x sigma_x' per node
    std::vector<double> terminal;       // g on the grid
    std::vector<char> central_w, central_th;  // monotone central differencing allowed
};

inline NodeData precompute_nodes(const DriftDiffusionField& field, const GridSpec& spec,
                                 double eta_w, double eta_theta, double worst_control_w,
                                 double worst_control_th) {
    if (field.dim_w() != 1 || field.dim_theta() != 1)
        throw ConfigError("grid solver supports 1-D w and 1-D theta fields only");
    const int nw = spec.n_w, nth = spec.n_theta;
    NodeData nd;
    const auto total = static_cast<std::size_t>(nw) * nth;
    nd.g_w.resize(total);
    nd.g_th.resize(total);
    nd.sb_w.resize(total);
    nd.sb_th.resize(total);
    nd.terminal.resize(total);
    nd.central_w.resize(total);
    nd.central_th.resize(total);
    for (int i = 0; i < nw; ++i) {
        for (int j = 0; j < nth; ++j) {
            ParamPoint q;
            q.w = Eigen::VectorXd::Constant(1, spec.w_lo + i * spec.dw());
            q.theta = Eigen::VectorXd::Constant(1, spec.theta_lo + j * spec.dtheta());
            const FieldEval f = field.at(q);
            const std::size_t idx = static_cast<std::size_t>(i) * nth + j;
            nd.g_w[idx] = f.g_w[0];
            nd.g_th[idx] = f.g_theta[0];
            nd.sb_w[idx] = eta_w * f.sigma_w(0, 0) * f.sigma_w(0, 0);
            nd.sb_th[idx] = eta_theta * f.sigma_theta(0, 0) * f.sigma_theta(0, 0);
            nd.terminal[idx] = field.objective(q);
            if (!std::isfinite(nd.terminal[idx]))
                throw ConfigError("grid solver: non-finite terminal data");
            // Central first differences stay monotone when the diffusion
            // dominates the drift at the least favorable admissible control.
            nd.central_w[idx] = worst_control_w * nd.sb_w[idx] >= std::abs(nd.g_w[idx]) * spec.dw();
            nd.central_th[idx] =
                worst_control_th * nd.sb_th[idx] >= std::abs(nd.g_th[idx]) * spec.dtheta();
        }
    }
    return nd;
}

// Largest stable time step for the explicit scheme (worst case over the
// admissible controls), and the implied effective step count.
inline int effective_steps(const NodeData& nd, const GridSpec& spec, double drift_scale,
                           double diff_scale) {
    double worst = 0.0;
    for (std::size_t idx = 0; idx < nd.g_w.size(); ++idx) {
        const double r = drift_scale * (std::abs(nd.g_w[idx]) / spec.dw() +
                                        std::abs(nd.g_th[idx]) / spec.dtheta()) +
                         diff_scale * (nd.sb_w[idx] / (spec.dw() * spec.dw()) +
                                       nd.sb_th[idx] / (spec.dtheta() * spec.dtheta()));
        worst = std::max(worst, r);
    }
    int n_t = spec.n_t;
    if (worst > 0.0) {
        const double dt_max = 1.0 / worst;
        const int needed = static_cast<int>(std::ceil(spec.horizon / dt_max - 1e-12));
        n_t = std::max(n_t, needed);
    }
    if (n_t > spec.max_time_steps)
        throw CflError("grid solver: CFL condition needs " + std::to_string(n_t) +
                       " time steps, above the configured cap");
    const double mem = static_cast<double>(n_t + 1) * spec.n_w * spec.n_theta;
    if (mem > 1.2e8)
        throw ConfigError("grid solver: grid too large to store every time slice");
    return n_t;
}

struct Stencil {
    double dv_w = 0.0, dv_th = 0.0;    // first derivatives (upwinded or central)
    double vww = 0.0, vthth = 0.0;     // second derivatives (zero on the boundary)
};

inline Stencil stencil_at(const ValueGrid& grid, int k, int i, int j, const GridSpec& spec,
                          double drift_w_sign, double drift_th_sign, bool central_w,
                          bool central_th) {
    Stencil s;
    const double dw = spec.dw(), dth = spec.dtheta();
    const int nw = spec.n_w, nth = spec.n_theta;
    if (i == 0) {
        s.dv_w = (grid.at(k, 1, j) - grid.at(k, 0, j)) / dw;
    } else if (i == nw - 1) {
        s.dv_w = (grid.at(k, nw - 1, j) - grid.at(k, nw - 2, j)) / dw;
    } else {
        s.vww = (grid.at(k, i + 1, j) - 2.0 * grid.at(k, i, j) + grid.at(k, i - 1, j)) / (dw * dw);
        if (central_w)
            s.dv_w = (grid.at(k, i + 1, j) - grid.at(k, i - 1, j)) / (2.0 * dw);
        else if (drift_w_sign > 0.0)
            s.dv_w = (grid.at(k, i + 1, j) - grid.at(k, i, j)) / dw;
        else
            s.dv_w = (grid.at(k, i, j) - grid.at(k, i - 1, j)) / dw;
    }
    if (j == 0) {
        s.dv_th = (grid.at(k, i, 1) - grid.at(k, i, 0)) / dth;
    } else if (j == nth - 1) {
        s.dv_th = (grid.at(k, i, nth - 1) - grid.at(k, i, nth - 2)) / dth;
    } else {
        s.vthth =
            (grid.at(k, i, j + 1) - 2.0 * grid.at(k, i, j) + grid.at(k, i, j - 1)) / (dth * dth);
        if (central_th)
            s.dv_th = (grid.at(k, i, j + 1) - grid.at(k, i, j - 1)) / (2.0 * dth);
        else if (drift_th_sign > 0.0)
            s.dv_th = (grid.at(k, i, j + 1) - grid.at(k, i, j)) / dth;
        else
            s.dv_th = (grid.at(k, i, j) - grid.at(k, i, j - 1)) / dth;
    }
    return s;
}

}  // namespace detail

// Backward sweep for the learning-rate game; the per-node maxmin is the
// closed-form per-player optimum (the Hamiltonian is separable, so the
// max/min order is immaterial).
inline HjbSolution solve_isaac_bellman(const DriftDiffusionField& field, const GridSpec& spec,
                                       const ControlBounds& bounds, double eta_w,
                                       double eta_theta) {
    spec.validate();
    bounds.validate();
    const detail::NodeData nd =
        detail::precompute_nodes(field, spec, eta_w, eta_theta, bounds.u_min, bounds.u_min);
    const int n_t = detail::effective_steps(nd, spec, bounds.u_max, bounds.u_max * bounds.u_max);
    const double dt = spec.horizon / n_t;
    const int nw = spec.n_w, nth = spec.n_theta;

    HjbSolution sol;
    sol.n_t_effective = n_t;
    sol.value = ValueGrid(spec, n_t);
    sol.policy = ControlField(spec, n_t, false, bounds.u_min, bounds.u_max);
    for (int i = 0; i < nw; ++i)
        for (int j = 0; j < nth; ++j)
            sol.value.at(n_t, i, j) = nd.terminal[static_cast<std::size_t>(i) * nth + j];

    for (int k = n_t - 1; k >= 0; --k) {
        for (int i = 0; i < nw; ++i) {
            for (int j = 0; j < nth; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * nth + j;
                const double gw = nd.g_w[idx], gt = nd.g_th[idx];
                const detail::Stencil s = detail::stencil_at(
                    sol.value, k + 1, i, j, spec, gw > 0.0 ? 1.0 : -1.0, -gt > 0.0 ? 1.0 : -1.0,
                    nd.central_w[idx], nd.central_th[idx]);
                const double a_w = gw * s.dv_w;
                const double b_w = nd.sb_w[idx] * s.vww;
                const double c_t = gt * s.dv_th;
                const double d_t = nd.sb_th[idx] * s.vthth;
                const double u_w = maximize_quadratic_control(a_w, b_w, bounds.u_min, bounds.u_max);
                const double u_t = minimize_quadratic_control(c_t, d_t, bounds.u_min, bounds.u_max);
                const double ham = u_w * a_w + 0.5 * u_w * u_w * b_w - u_t * c_t +
                                   0.5 * u_t * u_t * d_t;
                sol.value.at(k, i, j) = sol.value.at(k + 1, i, j) + dt * ham;
                sol.policy.u_w_at(k, i, j) = u_w;
                sol.policy.u_theta_at(k, i, j) = u_t;
            }
        }
    }
    if (!sol.value.all_finite()) throw ExplosionError("solve_isaac_bellman: value grid diverged");
    return sol;
}

// Backward sweep for the batch-size problem.
inline HjbSolution solve_batch_bellman(const DriftDiffusionField& field, const GridSpec& spec,
                                       double m_max, double eta) {
    spec.validate();
    if (!(m_max >= 1.0)) throw ConfigError("solve_batch_bellman: m_max must be >= 1");
    // Worst diffusion at m = 1, worst central-difference margin at m_max.
    const detail::NodeData nd =
        detail::precompute_nodes(field, spec, eta, eta, 1.0 / m_max, 1.0 / m_max);
    const int n_t = detail::effective_steps(nd, spec, 1.0, 1.0);
    const double dt = spec.horizon / n_t;
    const int nw = spec.n_w, nth = spec.n_theta;

    HjbSolution sol;
    sol.n_t_effective = n_t;
    sol.value = ValueGrid(spec, n_t);
    sol.policy = ControlField(spec, n_t, true, 1.0, m_max);
    for (int i = 0; i < nw; ++i)
        for (int j = 0; j < nth; ++j)
            sol.value.at(n_t, i, j) = nd.terminal[static_cast<std::size_t>(i) * nth + j];

    for (int k = n_t - 1; k >= 0; --k) {
        for (int i = 0; i < nw; ++i) {
            for (int j = 0; j < nth; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * nth + j;
                const double gw = nd.g_w[idx], gt = nd.g_th[idx];
                const detail::Stencil s = detail::stencil_at(
                    sol.value, k + 1, i, j, spec, gw > 0.0 ? 1.0 : -1.0, -gt > 0.0 ? 1.0 : -1.0,
                    nd.central_w[idx], nd.central_th[idx]);
                const double drift = gw * s.dv_w - gt * s.dv_th;
                const double curv = nd.sb_w[idx] * s.vww + nd.sb_th[idx] * s.vthth;
                const double m = minimize_batch_control(drift, curv, m_max);
                const double ham = drift / m + curv / (2.0 * m * m);
                sol.value.at(k, i, j) = sol.value.at(k + 1, i, j) + dt * ham;
                sol.policy.u_w_at(k, i, j) = m;
            }
        }
    }
    if (!sol.value.all_finite()) throw ExplosionError("solve_batch_bellman: value grid diverged");
    return sol;
}

// ============================================================================
// CSV export: one time slice as a matrix with axis headers. First row is
// the theta axis; each body row starts with its w coordinate.
// ============================================================================

inline void write_value_grid_csv(const ValueGrid& grid, int time_index, std::ostream& os) {
    if (time_index < 0 || time_index > grid.n_t())
        throw ConfigError("write_value_grid_csv: time index out of range");
    os << "w\\theta";
    for (int j = 0; j < grid.n_theta(); ++j) os << ',' << format_double(grid.theta_at(j));
    os << '\n';
    for (int i = 0; i < grid.n_w(); ++i) {
        os << format_double(grid.w_at(i));
        for (int j = 0; j < grid.n_theta(); ++j)
            os << ',' << format_double(grid.at(time_index, i, j));
        os << '\n';
    }
}

inline void write_control_field_csv(const ControlField& field, const ValueGrid& grid,
                                    int time_index, std::ostream& os) {
    if (time_index < 0 || time_index >= field.n_t())
        throw ConfigError("write_control_field_csv: time index out of range");
    const int blocks = field.batch_mode() ? 1 : 2;
    for (int b = 0; b < blocks; ++b) {
        os << (field.batch_mode() ? "m_theta" : (b == 0 ? "u_w" : "u_theta")) << "\\theta";
        for (int j = 0; j < grid.n_theta(); ++j) os << ',' << format_double(grid.theta_at(j));
        os << '\n';
        for (int i = 0; i < grid.n_w(); ++i) {
            os << format_double(grid.w_at(i));
            for (int j = 0; j < grid.n_theta(); ++j)
                os << ',' << format_double(b == 0 ? field.u_w_at(time_index, i, j)
                                                  : field.u_theta_at(time_index, i, j));
            os << '\n';
        }
    }
}

// ============================================================================
// Consistency and divergence diagnostics
// ============================================================================

// |v(0, q0) - E[v(tau, q(tau))]| under the extracted policy, the expectation
// estimated by Monte-Carlo rollout to the deterministic intermediate time.
// Returns the residual and the standard error of the estimate.
struct BellmanResidual {
    double residual = 0.0;
    double se = 0.0;
};

inline BellmanResidual bellman_residual(const HjbSolution& sol, const SdeConfig& cfg,
                                        const ParamPoint& q0, double intermediate_time,
                                        std::size_t n_paths) {
    if (!(intermediate_time >= 0.0) || intermediate_time > sol.value.horizon())
        throw ConfigError("bellman_residual: intermediate time outside [t0, T]");
    const double v0 = sol.value.interpolate(0.0, q0.w[0], q0.theta[0]);
    if (intermediate_time == 0.0) return {0.0, 0.0};

    SdeConfig roll = cfg;
    roll.horizon = intermediate_time;
    const auto paths = run_ensemble(
        roll,
        [&](const SdeConfig& c) {
            return sol.policy.batch_mode()
                       ? simulate_batch_sde(c, q0, sol.policy.as_batch_policy())
                       : simulate_lr_sde(c, q0, sol.policy.as_lr_policy());
        },
        n_paths);
    const auto est = endpoint_moment(paths, [&](const SdePath& p) {
        return sol.value.interpolate(intermediate_time, p.endpoint().w[0], p.endpoint().theta[0]);
    });
    return {std::abs(v0 - est.mean), est.se};
}

// Divergence thresholds of the beyond-which-explosion learning rates:
//   u~_w = -2 |g_w|^2 / (Sb_w : g_ww),   u~_t = 2 |g_t|^2 / (Sb_t : g_tt),
// plus whether the uniform ellipticity premise holds at q for gamma:
//   gamma <= -(Sb_w : g_ww)  and  gamma <= (Sb_t : g_tt).
struct DivergenceReport {
    double u_w_threshold = std::numeric_limits<double>::infinity();
    double u_theta_threshold = std::numeric_limits<double>::infinity();
    bool gamma_ok = false;
};

inline DivergenceReport divergence_threshold(const ObjectiveSurface& surface, const ParamPoint& q,
                                             const Batch& batch, double eta_w, double eta_theta,
                                             double gamma = 1e-3) {
    if (!(gamma > 0.0)) throw ConfigError("divergence_threshold: gamma must be > 0");
    const ObjectiveEval ev = surface.eval(q, batch);
    const double cw = eta_w * ev.cov_w.cwiseProduct(ev.hess_ww).sum();
    const double ct = eta_theta * ev.cov_theta.cwiseProduct(ev.hess_thetatheta).sum();
    DivergenceReport rep;
    if (cw != 0.0) rep.u_w_threshold = -2.0 * ev.grad_w.squaredNorm() / cw;
    if (ct != 0.0) rep.u_theta_threshold = 2.0 * ev.grad_theta.squaredNorm() / ct;
    rep.gamma_ok = (-cw >= gamma) && (ct >= gamma);
    return rep;
}

// Time-scale control is equivalent to learning-rate control: the loop-count
// adjustments (c_w, c_theta) with separation parameter eps1 map onto the
// effective rates (1 / (c_w eps1), 1 / c_theta).
inline std::pair<double, double> timescale_equivalent_rates(double c_w, double c_theta,
                                                            double eps1) {
    if (!(c_w > 0.0) || !(c_theta > 0.0) || !(eps1 > 0.0))
        throw ConfigError("timescale_equivalent_rates: parameters must be > 0");
    return {1.0 / (c_w * eps1), 1.0 / c_theta};
}

}  // namespace ganctl
