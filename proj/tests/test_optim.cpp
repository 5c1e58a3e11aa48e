// SPDX-License-Identifier: MIT
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "ganctl/distributions.hpp"
#include "ganctl/model.hpp"
#include "ganctl/optim.hpp"
#include "oracles.hpp"

using namespace ganctl;

namespace {

ParamPoint scalar_point(double w, double th) {
    ParamPoint q;
    q.w = Eigen::VectorXd::Constant(1, w);
    q.theta = Eigen::VectorXd::Constant(1, th);
    return q;
}

Batch dummy_batch() {
    Batch b;
    b.xs = Eigen::VectorXd::Ones(1);
    b.zs = Eigen::VectorXd::Ones(1);
    return b;
}

ObjectiveEval zero_eval(int dw, int dt) {
    ObjectiveEval ev;
    ev.grad_w = Eigen::VectorXd::Zero(dw);
    ev.grad_theta = Eigen::VectorXd::Zero(dt);
    ev.hess_ww = Eigen::MatrixXd::Zero(dw, dw);
    ev.hess_thetatheta = Eigen::MatrixXd::Zero(dt, dt);
    ev.cov_w = Eigen::MatrixXd::Zero(dw, dw);
    ev.cov_theta = Eigen::MatrixXd::Zero(dt, dt);
    return ev;
}

}  // namespace

TEST_CASE("sga_step: fixed point at zero gradient, explosion rejection") {
    const auto q = scalar_point(0.7, -0.2);
    const auto out = sga_step(q, zero_eval(1, 1), 0.5);
    CHECK(out.w[0] == q.w[0]);
    CHECK(out.theta[0] == q.theta[0]);

    auto bad = zero_eval(1, 1);
    bad.grad_w[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sga_step(q, bad, 0.5), ExplosionError);
    CHECK_THROWS_AS(sga_step(q, zero_eval(1, 1), 0.0), ConfigError);
}

TEST_CASE("sga_step: xy-game recursion and norm growth") {
    const auto xy = QuadraticSurface::xy_game();
    ParamPoint q = scalar_point(1.0, 0.0);
    const double eta = 0.1;
    const auto q1 = sga_step(q, xy.eval_at(q), eta);
    CHECK(q1.w[0] == 1.0);          // x' = x + eta * y = 1
    CHECK(q1.theta[0] == -0.1);     // y' = y - eta * x

    const double norm2 = q.w.squaredNorm() + q.theta.squaredNorm();
    for (int n = 0; n < 50; ++n) {
        const double before = q.w.squaredNorm() + q.theta.squaredNorm();
        q = sga_step(q, xy.eval_at(q), eta);
        const double after = q.w.squaredNorm() + q.theta.squaredNorm();
        CHECK(after == doctest::Approx((1.0 + eta * eta) * before).epsilon(1e-14));
    }
    CHECK(q.w.squaredNorm() + q.theta.squaredNorm() > norm2);  // spirals outward
}

TEST_CASE("sga_step: simultaneity (both blocks use the pre-step eval)") {
    const auto xy = QuadraticSurface::xy_game();
    const auto q = scalar_point(0.3, -1.4);
    const auto ev = xy.eval_at(q);
    const auto out = sga_step(q, ev, 0.2);
    CHECK(out.w[0] == q.w[0] + 0.2 * ev.grad_w[0]);
    CHECK(out.theta[0] == q.theta[0] - 0.2 * ev.grad_theta[0]);
}

TEST_CASE("sga_step: quadratic explosion ratio is exact") {
    // Descent on f(x) = x^2/2 via the theta block; eta = 3 > 2/a explodes
    // with per-step squared-error ratio 1 - eta a (2 - eta a) = 4.
    const auto quad = QuadraticSurface::scalar(0.0, 1.0);
    ParamPoint q = scalar_point(0.0, 1.0);
    const auto q1 = sga_step(q, quad.eval_at(q), 3.0);
    CHECK(q1.theta[0] == -2.0);
    double e_prev = 1.0;
    for (int n = 0; n < 30; ++n) {
        q = sga_step(q, quad.eval_at(q), 3.0);
        const double e = q.theta[0] * q.theta[0];
        CHECK(e / e_prev == doctest::Approx(4.0).epsilon(1e-12));
        e_prev = e;
    }
}

TEST_CASE("adam_step: first-step magnitude, zero-gradient fixed point") {
    auto state = OptimizerState::zero(1, 1);
    auto ev = zero_eval(1, 1);
    ev.grad_w[0] = 2.0;
    ev.grad_theta[0] = -0.5;
    const double eta = 1e-2;
    const auto q1 = adam_step(scalar_point(0, 0), ev, state, eta);
    CHECK(std::abs(q1.w[0]) <= eta);
    CHECK(std::abs(q1.w[0]) >= eta * (1.0 - 1e-6));
    CHECK(std::abs(q1.theta[0]) <= eta);
    CHECK(std::abs(q1.theta[0]) >= eta * (1.0 - 1e-6));
    CHECK(q1.w[0] > 0.0);      // ascends along +grad
    CHECK(q1.theta[0] > 0.0);  // descends along -grad (grad negative)

    auto s2 = OptimizerState::zero(1, 1);
    ParamPoint q = scalar_point(0.4, -0.8);
    for (int i = 0; i < 5; ++i) q = adam_step(q, zero_eval(1, 1), s2, eta);
    CHECK(q.w[0] == 0.4);
    CHECK(q.theta[0] == -0.8);
}

TEST_CASE("adam_step: matches the reference scalar recursion") {
    // Descent on f(th) = th^2/2 through the theta block.
    const auto quad = QuadraticSurface::scalar(0.0, 1.0);
    auto state = OptimizerState::zero(1, 1);
    oracles::ScalarAdam ref;
    ParamPoint q = scalar_point(0.0, 1.0);
    double x = 1.0;
    for (int i = 0; i < 100; ++i) {
        const auto ev = quad.eval_at(q);
        q = adam_step(q, ev, state, 1e-2);
        x = ref.step(x, x, 1e-2);  // grad of th^2/2 at the pre-step point
        CHECK(q.theta[0] == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK(std::abs(q.theta[0]) < 1.0);  // made progress toward 0
}

TEST_CASE("ladam_adjustment: cases from the closed form") {
    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 2.0);
    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(1, 1, 1.0);
    // D = eta g'Hg = 4 > 0, |g|^2/D = 1: the Newton step 1/(eta g_xx).
    CHECK(ladam_adjustment(g, h, 1.0, 0.1, 10.0) == doctest::Approx(1.0).epsilon(1e-15));
    // Clipping from below.
    CHECK(ladam_adjustment(g, h, 1.0, 2.0, 10.0) == 2.0);
    // Wrong convexity: u_max.
    CHECK(ladam_adjustment(g, -h, 1.0, 0.1, 10.0) == 10.0);
    // Zero gradient: D = 0 -> u_max branch.
    CHECK(ladam_adjustment(Eigen::VectorXd::Zero(1), h, 1.0, 0.1, 10.0) == 10.0);

    // Doubling the base rate halves the interior adjustment.
    const double u1 = ladam_adjustment(g, h, 0.3, 1e-6, 1e6);
    const double u2 = ladam_adjustment(g, h, 0.6, 1e-6, 1e6);
    CHECK(u2 == doctest::Approx(0.5 * u1).epsilon(1e-12));

    // Output always inside the clip interval.
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd gg(3);
        for (int k = 0; k < 3; ++k) gg[k] = rng.normal();
        Eigen::MatrixXd a(3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
        const Eigen::MatrixXd hh = 0.5 * (a + a.transpose());
        const double u = ladam_adjustment(gg, hh, 0.7, 0.25, 4.0);
        CHECK(u >= 0.25);
        CHECK(u <= 4.0);
    }
}

TEST_CASE("ladam_step: unit clip bounds reproduce adam bit for bit") {
    VanillaGanSurface gan;
    Batch batch;
    batch.xs = sample_dist(DistSpec::gaussian(3, 1), 64, 31);
    batch.zs = sample_dist(DistSpec::standard_normal(), 64, 32);

    ParamPoint qa{Eigen::Vector3d(0.2, 0.5, -0.4), Eigen::Vector2d(0.1, 1.1)};
    ParamPoint qb = qa;
    auto sa = OptimizerState::zero(3, 2);
    auto sb = OptimizerState::zero(3, 2);
    const LrControl ctrl{1e-2, 1e-2, 1.0, 1.0, 1e-9};
    for (int i = 0; i < 50; ++i) {
        const auto eva = gan.eval(qa, batch);
        const auto evb = gan.eval(qb, batch);
        qa = adam_step(qa, eva, sa, 1e-2);
        qb = ladam_step(qb, evb, sb, ctrl);
        for (int k = 0; k < 3; ++k) CHECK(qa.w[k] == qb.w[k]);
        for (int k = 0; k < 2; ++k) CHECK(qa.theta[k] == qb.theta[k]);
    }
}

TEST_CASE("ladam_step: degenerate bounds k act as adam with rate k*eta") {
    const auto quad = QuadraticSurface::scalar(-1.0, 1.0);
    const double k = 3.0, eta = 1e-2;
    ParamPoint qa = scalar_point(0.5, 1.0);
    ParamPoint qb = qa;
    auto sa = OptimizerState::zero(1, 1);
    auto sb = OptimizerState::zero(1, 1);
    for (int i = 0; i < 25; ++i) {
        qa = adam_step(qa, quad.eval_at(qa), sa, k * eta);
        qb = ladam_step(qb, quad.eval_at(qb), sb, LrControl{eta, eta, k, k, 1e-9});
        CHECK(qa.w[0] == doctest::Approx(qb.w[0]).epsilon(1e-14));
        CHECK(qa.theta[0] == doctest::Approx(qb.theta[0]).epsilon(1e-14));
    }
}

TEST_CASE("ladam_step: concave-in-w curvature gives position-independent adjustment") {
    const double c = 2.5, eta = 0.04;
    const auto quad = QuadraticSurface::scalar(-c, 1.0);
    for (double w0 : {-2.0, -0.3, 0.7, 3.1}) {
        ParamPoint q = scalar_point(w0, 0.5);
        auto state = OptimizerState::zero(1, 1);
        ladam_step(q, quad.eval_at(q), state, LrControl{eta, eta, 1e-4, 1e4, 1e-9});
        CHECK(state.adj_w == doctest::Approx(1.0 / (eta * c)).epsilon(1e-12));
    }
}

TEST_CASE("async_train: alternation semantics and inner-loop contraction") {
    // theta step sees post-w-update gradients: on the xy game from (1, 2),
    // w1 = 1 + eta*2, th1 = 2 - eta*w1 (not 2 - eta*1).
    auto xy = QuadraticSurface::xy_game();
    const double eta = 0.25;
    const auto batcher = []() { return dummy_batch(); };
    const auto trace = async_train(scalar_point(1.0, 2.0), xy, 1, 1, eta, eta, batcher);
    REQUIRE(trace.records.size() == 2);
    const double w1 = 1.0 + eta * 2.0;
    CHECK(trace.records[1].q.w[0] == w1);
    CHECK(trace.records[1].q.theta[0] == 2.0 - eta * w1);

    // Zero-gradient surface: frozen for any loop counts.
    QuadraticSurface flat(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                          Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
    const auto frozen = async_train(scalar_point(0.4, -0.6), flat, 3, 4, 0.1, 0.1, batcher);
    CHECK(frozen.records.back().q.w[0] == 0.4);
    CHECK(frozen.records.back().q.theta[0] == -0.6);

    // Concave-in-w quadratic: more inner updates leave |g_w| = |w| smaller.
    const auto concave = QuadraticSurface::scalar(-1.0, 1.0);
    double prev = 1e9;
    for (int n_w : {1, 2, 4, 8}) {
        const auto t = async_train(scalar_point(1.0, 0.3), concave, 1, n_w, 0.3, 0.3, batcher);
        const double gw = std::abs(t.records.back().q.w[0]);
        CHECK(gw < prev);
        prev = gw;
    }
}

TEST_CASE("disc_accuracy: constant, separated and optimal discriminators") {
    VanillaGanSurface gan;
    Batch b;
    b.xs = sample_dist(DistSpec::gaussian(3, 1), 1000, 17);
    b.zs = sample_dist(DistSpec::standard_normal(), 1000, 18);

    // w = 0: D = 1/2, all real counted correct, all fake wrong.
    ParamPoint q0{Eigen::Vector3d::Zero(), Eigen::Vector2d(0.0, 1.0)};
    CHECK(disc_accuracy(q0, gan, b) == 0.5);
    Batch uneven;
    uneven.xs = b.xs.head(300);
    uneven.zs = b.zs;
    CHECK(disc_accuracy(q0, gan, uneven) == doctest::Approx(300.0 / 1300.0).epsilon(1e-15));

    // Separated: reals near +-5 score > 1/2, fakes at 0 score < 1/2.
    Batch sep;
    sep.xs = Eigen::VectorXd::Constant(8, 5.0);
    sep.zs = Eigen::VectorXd::Zero(8);
    ParamPoint qsep{Eigen::Vector3d(-1.0, 0.0, 0.4), Eigen::Vector2d(0.0, 0.0)};
    CHECK(disc_accuracy(qsep, gan, sep) == 1.0);

    // Closed-form optimum: accuracy 1/2 within sampling tolerance.
    const auto q_star = optimal_pair(DistSpec::gaussian(3.0, 1.0));
    CHECK(std::abs(disc_accuracy(q_star, gan, b) - 0.5) < 0.05);
}
