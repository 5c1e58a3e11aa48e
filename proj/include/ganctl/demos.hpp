// SPDX-License-Identifier: MIT
//
// Self-contained reproductions of the pedagogical examples: quadratic
// gradient explosion, the xy-game spiral, the generator-term convexity
// probe, and the Newton-step equivalence of the clipped adjustment.
//
// Reports reuse the training-trace CSV schema so one plotting path serves
// everything: gen_loss carries the demo's observed series and disc_acc the
// analytic prediction (or secondary series); verdicts are computed, never
// hand-set.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/model.hpp"
#include "ganctl/csv.hpp"
#include "ganctl/optim.hpp"

namespace ganctl {

struct DemoReport {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    bool pass = false;
    std::string detail;
};

inline std::vector<std::string> demo_columns() {
    return {"epoch", "gen_loss", "disc_acc", "w_1",     "w_2",
            "w_3",   "theta_1",  "theta_2",  "u_w",     "u_theta"};
}

// Gradient descent on f(x) = a/2 x^2 + b x. The squared error
// e_n = |x_n - x*|^2 contracts (or explodes) by the exact per-step factor
// r = 1 - eta a (2 - eta a); the verdict checks every pre-overflow ratio
// against r to 1e-10 relative.
inline DemoReport explosion_demo(double a, double b, double x0, double eta, int n) {
    if (!(a > 0.0)) throw ConfigError("explosion_demo: a must be > 0");
    if (n < 1) throw ConfigError("explosion_demo: n must be >= 1");
    DemoReport rep;
    rep.name = "explosion";
    rep.columns = demo_columns();

    const double x_star = -b / a;
    const double r = 1.0 - eta * a * (2.0 - eta * a);
    double x = x0;
    double e_prev = (x0 - x_star) * (x0 - x_star);
    double predicted = e_prev;
    bool ok = true;
    double worst = 0.0;
    rep.rows.push_back({0.0, e_prev, predicted, 0.0, 0.0, 0.0, x, 0.0, 1.0, 1.0});
    for (int k = 1; k <= n; ++k) {
        x = x - eta * (a * x + b);
        const double e = (x - x_star) * (x - x_star);
        predicted *= r;
        if (!std::isfinite(e)) break;
        rep.rows.push_back({static_cast<double>(k), e, predicted, 0.0, 0.0, 0.0, x, 0.0, 1.0, 1.0});
        if (e_prev > 0.0) {
            const double ratio = e / e_prev;
            const double err = std::abs(ratio - r) / std::max(1.0, std::abs(r));
            worst = std::max(worst, err);
            if (err > 1e-10) ok = false;
        }
        e_prev = e;
    }
    rep.pass = ok;
    rep.detail = "ratio " + format_double(r) + ", worst relative deviation " + format_double(worst);
    return rep;
}

// Simultaneous play on g(x, y) = x y: the iterate norm grows by exactly
// (1 + eta^2) per step, so the spiral never reaches the equilibrium.
inline DemoReport spiral_demo(double x0, double y0, double eta, int n) {
    if (n < 1) throw ConfigError("spiral_demo: n must be >= 1");
    DemoReport rep;
    rep.name = "spiral";
    rep.columns = demo_columns();

    double x = x0, y = y0;
    const double norm0 = x0 * x0 + y0 * y0;
    double predicted = norm0;
    const double growth = 1.0 + eta * eta;
    bool ok = true;
    double worst = 0.0;
    rep.rows.push_back({0.0, norm0, predicted, x, 0.0, 0.0, y, 0.0, 1.0, 1.0});
    for (int k = 1; k <= n; ++k) {
        const double xn = x + eta * y;
        const double yn = y - eta * x;
        x = xn;
        y = yn;
        predicted *= growth;
        const double norm = x * x + y * y;
        rep.rows.push_back({static_cast<double>(k), norm, predicted, x, 0.0, 0.0, y, 0.0, 1.0, 1.0});
        const double err = std::abs(norm - predicted) / std::max(predicted, 1e-300);
        worst = std::max(worst, err);
        if (err > 1e-10) ok = false;
    }
    rep.pass = ok;
    rep.detail = "worst relative deviation " + format_double(worst);
    return rep;
}

// Tabulates the generator term theta1 -> log(1 - D_w(theta1)) and its
// closed-form second derivative over a range; the verdict cross-checks the
// formula against a second finite difference (1e-5 absolute), the detail
// string reports the sign pattern.
inline DemoReport convexity_probe(const Eigen::VectorXd& w, double theta1_lo, double theta1_hi,
                                  int steps) {
    if (steps < 2) throw ConfigError("convexity_probe: need at least 2 steps");
    if (!(theta1_hi > theta1_lo)) throw ConfigError("convexity_probe: empty range");
    DemoReport rep;
    rep.name = "convexity";
    rep.columns = demo_columns();

    const auto g3 = [&](double t1) {
        return log_sigmoid(-(w[0] + w[1] * t1 + 0.5 * w[2] * t1 * t1));
    };
    const double h = 1e-4;
    int n_pos = 0, n_neg = 0;
    bool ok = true;
    double worst = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t1 = theta1_lo + (theta1_hi - theta1_lo) * k / (steps - 1);
        const double d2 = g3_second_derivative(t1, w);
        const double d2_fd = (g3(t1 + h) - 2.0 * g3(t1) + g3(t1 - h)) / (h * h);
        const double err = std::abs(d2 - d2_fd);
        worst = std::max(worst, err);
        if (err > 1e-5) ok = false;
        if (d2 > 1e-12) ++n_pos;
        if (d2 < -1e-12) ++n_neg;
        rep.rows.push_back(
            {static_cast<double>(k), g3(t1), d2, w[0], w[1], w[2], t1, 0.0, 1.0, 1.0});
    }
    rep.pass = ok;
    rep.detail = "second-derivative sign pattern: " + std::to_string(n_pos) + " positive, " +
                 std::to_string(n_neg) + " negative; worst formula-vs-fd gap " +
                 format_double(worst);
    return rep;
}

// With unit base rates and the objective substituted for the value
// function, the clipped adjustments reduce to clamped Newton steps:
// clamp(-1/g_ww) for the ascending group, clamp(1/g_tt) for the
// descending one, u_max where the convexity sign is violated.
inline DemoReport newton_equivalence(const ObjectiveSurface& surface, const ParamPoint& q,
                                     const Batch& batch, double u_min, double u_max) {
    if (surface.dim_w() != 1 || surface.dim_theta() != 1)
        throw ConfigError("newton_equivalence: expects a scalar slice (dims 1, 1)");
    DemoReport rep;
    rep.name = "newton";
    rep.columns = demo_columns();

    const ObjectiveEval ev = surface.eval(q, batch);
    const double g_ww = ev.hess_ww(0, 0);
    const double g_tt = ev.hess_thetatheta(0, 0);
    const double measured_w = ladam_adjustment(ev.grad_w, -ev.hess_ww, 1.0, u_min, u_max);
    const double measured_t = ladam_adjustment(ev.grad_theta, ev.hess_thetatheta, 1.0, u_min, u_max);
    const bool zero_grad_w = ev.grad_w.squaredNorm() == 0.0;
    const bool zero_grad_t = ev.grad_theta.squaredNorm() == 0.0;
    const double predicted_w =
        (g_ww < 0.0 && !zero_grad_w) ? clamp(-1.0 / g_ww, u_min, u_max) : u_max;
    const double predicted_t =
        (g_tt > 0.0 && !zero_grad_t) ? clamp(1.0 / g_tt, u_min, u_max) : u_max;

    rep.rows.push_back({0.0, measured_w, predicted_w, q.w[0], 0.0, 0.0, q.theta[0], 0.0,
                        measured_w, measured_t});
    rep.rows.push_back({1.0, measured_t, predicted_t, q.w[0], 0.0, 0.0, q.theta[0], 0.0,
                        measured_w, measured_t});
    const double err =
        std::max(std::abs(measured_w - predicted_w), std::abs(measured_t - predicted_t));
    rep.pass = err <= 1e-12 * std::max(1.0, u_max);
    rep.detail = "adjustment vs Newton prediction gap " + format_double(err);
    return rep;
}

}  // namespace ganctl
