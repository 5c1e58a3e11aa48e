// SPDX-License-Identifier: MIT
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "ganctl/distributions.hpp"
#include "ganctl/model.hpp"
#include "oracles.hpp"

using namespace ganctl;

namespace {

Batch make_batch(const DistSpec& target, int n_x, int n_z, std::uint64_t seed) {
    Batch b;
    b.xs = sample_dist(target, n_x, seed);
    b.zs = sample_dist(DistSpec::standard_normal(), n_z, seed ^ 0xabcdef12345ULL);
    return b;
}

ParamPoint point(std::initializer_list<double> w, std::initializer_list<double> th) {
    ParamPoint q;
    q.w = Eigen::VectorXd(static_cast<Eigen::Index>(w.size()));
    int i = 0;
    for (double v : w) q.w[i++] = v;
    q.theta = Eigen::VectorXd(static_cast<Eigen::Index>(th.size()));
    i = 0;
    for (double v : th) q.theta[i++] = v;
    return q;
}

}  // namespace

TEST_CASE("sample_dist: gaussian(3,1) moments") {
    const auto xs = sample_dist(DistSpec::gaussian(3.0, 1.0), 100000, 42);
    std::vector<double> v(xs.data(), xs.data() + xs.size());
    CHECK(std::abs(oracles::mean(v) - 3.0) < 0.02);
    CHECK(std::abs(oracles::sample_std(v) - 1.0) < 0.02);
}

TEST_CASE("sample_dist: determinism and parameter errors") {
    const auto a = sample_dist(DistSpec::gaussian(0.0, 1.0), 1, 7);
    const auto b = sample_dist(DistSpec::gaussian(0.0, 1.0), 1, 7);
    CHECK(a[0] == b[0]);
    CHECK_THROWS_AS(sample_dist(DistSpec{DistKind::gaussian, 0.0, 0.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(sample_dist(DistSpec{DistKind::student_t, 0.0, -1.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(sample_dist(DistSpec::gaussian(0.0, 1.0), 0, 1), ConfigError);
}

TEST_CASE("sample_dist: student t median vs inverse-CDF oracle") {
    const int n = 1000000;
    const auto xs = sample_dist(DistSpec::student_t(3.0, 3.0), n, 11);
    std::vector<double> v(xs.data(), xs.data() + xs.size());
    CHECK(std::abs(oracles::median(v) - 3.0) < 0.01);

    const auto ref = oracles::sample_student_t3_inverse_cdf(3.0, n, 13);
    CHECK(std::abs(oracles::median(ref) - 3.0) < 0.01);
    CHECK(std::abs(oracles::median(v) - oracles::median(ref)) < 0.01);
}

TEST_CASE("eval_vanilla: constant discriminator at w = 0") {
    VanillaGanSurface gan;
    const auto q = point({0, 0, 0}, {5.0, 2.0});
    const auto batch = make_batch(DistSpec::gaussian(3, 1), 257, 123, 1);
    const auto ev = gan.eval(q, batch);
    CHECK(ev.value == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-15));
    CHECK(ev.grad_theta.norm() == 0.0);  // D constant: generator gradient vanishes
    for (Eigen::Index i = 0; i < batch.xs.size(); ++i)
        CHECK(VanillaGanSurface::discriminator(q.w, batch.xs[i]) == 0.5);
}

TEST_CASE("eval_vanilla: generator term equals the scalar formula at theta2 = 0") {
    VanillaGanSurface gan;
    const auto batch = make_batch(DistSpec::gaussian(3, 1), 64, 64, 5);
    for (double theta1 : {-2.0, 0.0, 2.0}) {
        const auto q = point({1, 1, 2}, {theta1, 0.0});
        // Direct scalar evaluation of log(1 - D_w(theta1)).
        const double expo = 1.0 + 1.0 * theta1 + 0.5 * 2.0 * theta1 * theta1;
        const double direct = std::log1p(-1.0 / (1.0 + std::exp(-expo)));
        CHECK(VanillaGanSurface::generator_term(q, batch.zs) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("eval_vanilla: value invariant under batch permutation, exactly") {
    VanillaGanSurface gan;
    const auto q = point({0.3, -0.7, 1.1}, {0.4, 1.3});
    auto batch = make_batch(DistSpec::gaussian(3, 1), 101, 77, 2);
    const double v0 = gan.value(q, batch);

    std::mt19937 shuffler(99);
    std::vector<double> xs(batch.xs.data(), batch.xs.data() + batch.xs.size());
    std::vector<double> zs(batch.zs.data(), batch.zs.data() + batch.zs.size());
    std::shuffle(xs.begin(), xs.end(), shuffler);
    std::shuffle(zs.begin(), zs.end(), shuffler);
    Batch permuted;
    permuted.xs = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    permuted.zs = Eigen::Map<Eigen::VectorXd>(zs.data(), static_cast<Eigen::Index>(zs.size()));
    CHECK(gan.value(q, permuted) == v0);
}

TEST_CASE("fd_derivative_oracle: quadratic and constant surfaces") {
    QuadraticSurface quad(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1),
                          Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
    const auto q = point({3.0}, {0.0});
    Batch dummy;
    dummy.xs = Eigen::VectorXd::Ones(1);
    dummy.zs = Eigen::VectorXd::Ones(1);
    const auto fd = fd_derivative_oracle(quad, q, dummy);
    CHECK(fd.grad_w[0] == doctest::Approx(6.0).epsilon(1e-6));
    CHECK(fd.hess_ww(0, 0) == doctest::Approx(2.0).epsilon(1e-4));

    QuadraticSurface constant(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                              Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), {}, 5.0);
    const auto qc = point({0.2, -0.4}, {0.9});
    const auto fdc = fd_derivative_oracle(constant, qc, dummy);
    CHECK(fdc.grad_w.norm() < 1e-9);
    CHECK(fdc.grad_theta.norm() < 1e-9);
    CHECK(fdc.hess_ww.norm() < 1e-9);
}

TEST_CASE("eval_vanilla: analytic derivatives match finite differences") {
    VanillaGanSurface gan;
    const auto batch = make_batch(DistSpec::gaussian(3, 1), 48, 48, 3);
    const auto q = point({1, 1, 2}, {0.0, 1.0});
    const auto ev = gan.eval(q, batch);
    const auto fd = fd_derivative_oracle(gan, q, batch);
    CHECK((ev.grad_w - fd.grad_w).norm() / fd.grad_w.norm() < 1e-5);
    CHECK((ev.grad_theta - fd.grad_theta).norm() / fd.grad_theta.norm() < 1e-5);
}

TEST_CASE("eval_vanilla: derivative, symmetry, PSD and concavity properties") {
    VanillaGanSurface gan;
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        ParamPoint q;
        q.w = Eigen::VectorXd(3);
        q.theta = Eigen::VectorXd(2);
        for (int i = 0; i < 3; ++i) q.w[i] = 1.5 * rng.normal();
        q.theta[0] = 2.0 * rng.normal();
        q.theta[1] = 0.3 + std::abs(rng.normal());
        const auto batch = make_batch(DistSpec::gaussian(3, 1), 32, 32, 1000 + trial);
        const auto ev = gan.eval(q, batch);
        const auto fd = fd_derivative_oracle(gan, q, batch);

        const double scale_g =
            std::max(1e-8, std::max(fd.grad_w.norm(), fd.grad_theta.norm()));
        CHECK((ev.grad_w - fd.grad_w).norm() / scale_g < 1e-4);
        CHECK((ev.grad_theta - fd.grad_theta).norm() / scale_g < 1e-4);
        const double scale_h =
            std::max(1e-8, std::max(fd.hess_ww.norm(), fd.hess_thetatheta.norm()));
        CHECK((ev.hess_ww - fd.hess_ww).norm() / scale_h < 1e-4);
        CHECK((ev.hess_thetatheta - fd.hess_thetatheta).norm() / scale_h < 1e-4);

        CHECK((ev.hess_ww - ev.hess_ww.transpose()).norm() <= 1e-8 * (1.0 + ev.hess_ww.norm()));
        CHECK((ev.cov_w - ev.cov_w.transpose()).norm() <= 1e-12);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_cov(ev.cov_w);
        CHECK(es_cov.eigenvalues().minCoeff() >= -1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_cov_t(ev.cov_theta);
        CHECK(es_cov_t.eigenvalues().minCoeff() >= -1e-10);

        // Concavity in w: no Hessian eigenvalue above 1e-8.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_h(ev.hess_ww);
        CHECK(es_h.eigenvalues().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("g3_second_derivative: signs and fd agreement") {
    const auto w_pos = point({1, 1, 2}, {0, 0}).w;
    const auto w_neg = point({1, 1, -2}, {0, 0}).w;
    const auto w_zero = point({0, 0, 0}, {0, 0}).w;
    CHECK(g3_second_derivative(0.0, w_pos) < 0.0);
    CHECK(g3_second_derivative(0.0, w_neg) > 0.0);
    for (double t1 = -4.0; t1 <= 4.0; t1 += 0.25) CHECK(g3_second_derivative(t1, w_zero) == 0.0);

    // Against the second finite difference of the generator term.
    for (const auto& w : {w_pos, w_neg}) {
        const auto g3 = [&](double t1) {
            return log_sigmoid(-(w[0] + w[1] * t1 + 0.5 * w[2] * t1 * t1));
        };
        const double h = 1e-4;
        for (double t1 = -4.0; t1 <= 4.0; t1 += 0.125) {
            const double fd2 = (g3(t1 + h) - 2.0 * g3(t1) + g3(t1 - h)) / (h * h);
            CHECK(std::abs(g3_second_derivative(t1, w) - fd2) < 1e-5);
        }
    }
}

TEST_CASE("optimal_pair: closed form and stationarity") {
    const auto q = optimal_pair(DistSpec::gaussian(3.0, 1.0));
    CHECK(q.w.norm() == 0.0);
    CHECK(q.theta[0] == 3.0);
    CHECK(q.theta[1] == 1.0);
    CHECK(optimal_pair(DistSpec::gaussian(0.0, 1.0)).theta[0] == 0.0);
    CHECK_THROWS_AS(optimal_pair(DistSpec::student_t(3.0, 3.0)), ConfigError);

    // Monte-Carlo stationarity: only sampling noise remains at the optimum.
    VanillaGanSurface gan;
    const int n = 20000;
    const auto batch = make_batch(DistSpec::gaussian(3, 1), n, n, 21);
    const auto ev = gan.eval(q, batch);
    CHECK(ev.grad_theta.norm() == 0.0);  // identically zero at w* = 0
    CHECK(ev.grad_w.norm() < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sliced surface matches the base surface on its slice") {
    auto gan = std::make_shared<VanillaGanSurface>();
    const auto anchor = point({0.2, 0.8, -0.6}, {0.1, 1.2});
    SlicedSurface slice(gan, anchor, 0, 0);
    const auto batch = make_batch(DistSpec::gaussian(3, 1), 40, 40, 9);
    const auto qs = point({0.5}, {-0.3});
    const auto ev = slice.eval(qs, batch);

    ParamPoint full = anchor;
    full.w[0] = 0.5;
    full.theta[0] = -0.3;
    const auto ev_full = gan->eval(full, batch);
    CHECK(ev.value == ev_full.value);
    CHECK(ev.grad_w[0] == ev_full.grad_w[0]);
    CHECK(ev.grad_theta[0] == ev_full.grad_theta[0]);
    CHECK(ev.hess_ww(0, 0) == ev_full.hess_ww(0, 0));
}
