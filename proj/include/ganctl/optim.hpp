// SPDX-License-Identifier: MIT
//
// Discrete-time optimizers. The w block ascends the objective, the theta
// block descends it. LADAM multiplies the bias-corrected ADAM step of each
// parameter group by a clipped curvature adjustment
//     u = clamp(|g|^2 / Tr[(gbar gbar') H], u_min, u_max),  gbar = sqrt(eta) g,
// falling back to u_max when the trace has the wrong sign.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/model.hpp"

namespace ganctl {

// Base learning rates plus the bounds of the multiplicative adjustment.
struct LrControl {
    double base_w = 1e-3;
    double base_theta = 1e-3;
    double u_min = 1.0;
    double u_max = 1.0;
    double eta_min = 1e-9;

    void validate() const {
        if (!(u_min > 0.0) || !(u_min <= u_max))
            throw ConfigError("LrControl: need 0 < u_min <= u_max");
        if (!(base_w >= eta_min && base_w <= 1.0) || !(base_theta >= eta_min && base_theta <= 1.0))
            throw ConfigError("LrControl: base rates must lie in [eta_min, 1]");
    }
};

// ADAM moment buffers for the two parameter groups.
struct OptimizerState {
    long step = 0;
    Eigen::VectorXd m_w, v_w, m_theta, v_theta;
    double adj_w = 1.0, adj_theta = 1.0;  // last applied group adjustments

    static OptimizerState zero(int dim_w, int dim_theta) {
        OptimizerState s;
        s.m_w = Eigen::VectorXd::Zero(dim_w);
        s.v_w = Eigen::VectorXd::Zero(dim_w);
        s.m_theta = Eigen::VectorXd::Zero(dim_theta);
        s.v_theta = Eigen::VectorXd::Zero(dim_theta);
        return s;
    }
};

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
            throw ConfigError("AdamParams: need 0 <= beta < 1 and eps > 0");
    }
};

struct TraceRecord {
    long epoch = 0;
    double gen_loss = 0.0;
    double disc_acc = 0.0;
    ParamPoint q;
    double u_w = 1.0, u_theta = 1.0;
};

struct TrainingTrace {
    std::vector<TraceRecord> records;
    bool exploded = false;
};

inline void require_finite_eval(const ObjectiveEval& eval) {
    if (!eval.is_finite()) throw ExplosionError("optimizer step: non-finite objective evaluation");
}

// Simultaneous gradient step: both blocks use the pre-step evaluation.
inline ParamPoint sga_step(const ParamPoint& q, const ObjectiveEval& eval, double eta) {
    if (!(eta > 0.0)) throw ConfigError("sga_step: eta must be > 0");
    require_finite_eval(eval);
    ParamPoint out;
    out.w = q.w + eta * eval.grad_w;
    out.theta = q.theta - eta * eval.grad_theta;
    return out;
}

namespace detail {

// Bias-corrected ADAM direction m_hat / (sqrt(v_hat) + eps), updating the
// moment buffers in place. Shared verbatim by adam_step and ladam_step so
// that a unit adjustment reproduces ADAM bit for bit.
inline Eigen::VectorXd adam_direction(const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                                      Eigen::VectorXd& v, long step, const AdamParams& p) {
    m = p.beta1 * m + (1.0 - p.beta1) * grad;
    v = p.beta2 * v + (1.0 - p.beta2) * grad.cwiseProduct(grad);
    const double m_corr = 1.0 - std::pow(p.beta1, static_cast<double>(step));
    const double v_corr = 1.0 - std::pow(p.beta2, static_cast<double>(step));
    Eigen::VectorXd dir(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i)
        dir[i] = (m[i] / m_corr) / (std::sqrt(v[i] / v_corr) + p.eps);
    return dir;
}

}  // namespace detail

// Standard ADAM; ascent on w, descent on theta.
inline ParamPoint adam_step(const ParamPoint& q, const ObjectiveEval& eval, OptimizerState& state,
                            double eta, const AdamParams& params = {}) {
    params.validate();
    if (!(eta > 0.0)) throw ConfigError("adam_step: eta must be > 0");
    require_finite_eval(eval);
    ++state.step;
    const Eigen::VectorXd dir_w = detail::adam_direction(eval.grad_w, state.m_w, state.v_w, state.step, params);
    const Eigen::VectorXd dir_t =
        detail::adam_direction(eval.grad_theta, state.m_theta, state.v_theta, state.step, params);
    state.adj_w = 1.0;
    state.adj_theta = 1.0;
    ParamPoint out;
    out.w = q.w + eta * dir_w;
    out.theta = q.theta - eta * dir_t;
    return out;
}

// Per-group clipped Newton-like adjustment. group_hess is the Hessian
// block oriented so that positive curvature is the "right" convexity for
// the group's own optimization direction (descending groups pass H,
// ascending groups pass -H).
inline double ladam_adjustment(const Eigen::VectorXd& group_grad, const Eigen::MatrixXd& group_hess,
                               double base_eta, double u_min, double u_max) {
    const double denom = base_eta * group_grad.dot(group_hess * group_grad);
    if (denom > 0.0) return clamp(group_grad.squaredNorm() / denom, u_min, u_max);
    return u_max;
}

// LADAM: the ADAM direction of each group scaled by its adjustment.
inline ParamPoint ladam_step(const ParamPoint& q, const ObjectiveEval& eval, OptimizerState& state,
                             const LrControl& ctrl, const AdamParams& params = {}) {
    ctrl.validate();
    params.validate();
    require_finite_eval(eval);
    ++state.step;
    const Eigen::VectorXd dir_w = detail::adam_direction(eval.grad_w, state.m_w, state.v_w, state.step, params);
    const Eigen::VectorXd dir_t =
        detail::adam_direction(eval.grad_theta, state.m_theta, state.v_theta, state.step, params);
    // w ascends g, i.e. descends -g: flip the Hessian block's sign.
    const double u_w =
        ladam_adjustment(eval.grad_w, -eval.hess_ww, ctrl.base_w, ctrl.u_min, ctrl.u_max);
    const double u_t = ladam_adjustment(eval.grad_theta, eval.hess_thetatheta, ctrl.base_theta,
                                        ctrl.u_min, ctrl.u_max);
    state.adj_w = u_w;
    state.adj_theta = u_t;
    ParamPoint out;
    out.w = q.w + u_w * (ctrl.base_w * dir_w);
    out.theta = q.theta - u_t * (ctrl.base_theta * dir_t);
    return out;
}

// Asynchronous alternation: n_w_max gradient-ascent updates of w per
// single theta update, n_theta_max outer iterations, every update on a
// fresh batch from the supplied batcher. One trace record per outer
// iteration; gen_loss holds the objective value, disc_acc the metrics
// callback's second component when provided.
inline TrainingTrace async_train(
    const ParamPoint& q0, const ObjectiveSurface& surface, int n_theta_max, int n_w_max,
    double eta_w, double eta_theta, const std::function<Batch()>& batcher,
    const std::function<std::pair<double, double>(const ParamPoint&)>& metrics = {}) {
    if (n_theta_max < 1 || n_w_max < 1) throw ConfigError("async_train: loop counts must be >= 1");
    if (!(eta_w > 0.0) || !(eta_theta > 0.0)) throw ConfigError("async_train: rates must be > 0");

    TrainingTrace trace;
    ParamPoint q = q0;
    const auto record = [&](long epoch) {
        TraceRecord r;
        r.epoch = epoch;
        if (metrics) {
            const auto [loss, acc] = metrics(q);
            r.gen_loss = loss;
            r.disc_acc = acc;
        } else {
            r.gen_loss = surface.value(q, batcher());
            r.disc_acc = 0.0;
        }
        r.q = q;
        trace.records.push_back(std::move(r));
    };
    record(0);
    for (int i = 1; i <= n_theta_max; ++i) {
        for (int j = 0; j < n_w_max; ++j) {
            const ObjectiveEval ev = surface.eval(q, batcher());
            if (!ev.grad_w.allFinite()) {
                trace.exploded = true;
                return trace;
            }
            q.w += eta_w * ev.grad_w;
        }
        const ObjectiveEval ev = surface.eval(q, batcher());
        if (!ev.grad_theta.allFinite()) {
            trace.exploded = true;
            return trace;
        }
        q.theta -= eta_theta * ev.grad_theta;
        if (!q.is_finite()) {
            trace.exploded = true;
            return trace;
        }
        record(i);
    }
    return trace;
}

// Fraction of correctly classified samples under the toy discriminator.
inline double disc_accuracy(const ParamPoint& q, const VanillaGanSurface& surface,
                            const Batch& eval_batch) {
    return surface.accuracy(q, eval_batch);
}

}  // namespace ganctl
