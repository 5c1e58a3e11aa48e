// SPDX-License-Identifier: MIT
//
// Objective surfaces for the minimax training problem: the closed-form
// vanilla-GAN model with a quadratic-exponent discriminator and affine
// generator, a generic quadratic test surface, coordinate-slice adapters,
// and a central finite-difference derivative oracle.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <memory>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/distributions.hpp"

namespace ganctl {

// Joint parameter state q = (w, theta) of discriminator and generator.
struct ParamPoint {
    Eigen::VectorXd w;
    Eigen::VectorXd theta;

    bool is_finite() const { return w.allFinite() && theta.allFinite(); }
};

// Sample batch: xs are target draws, zs latent draws.
struct Batch {
    Eigen::VectorXd xs;
    Eigen::VectorXd zs;

    void validate() const {
        if (xs.size() < 1 || zs.size() < 1)
            throw ConfigError("Batch: need at least one target and one latent sample");
    }
};

// Value, gradient blocks, Hessian blocks and gradient-noise covariance
// blocks of an objective at a point. Covariance blocks follow the
// estimator convention: empirical covariance of per-sample gradient
// contributions divided by the number of samples, so the implied
// diffusion magnitude shrinks as the batch grows.
struct ObjectiveEval {
    double value = 0.0;
    Eigen::VectorXd grad_w, grad_theta;
    Eigen::MatrixXd hess_ww, hess_thetatheta;
    Eigen::MatrixXd cov_w, cov_theta;

    bool is_finite() const {
        return std::isfinite(value) && grad_w.allFinite() && grad_theta.allFinite() &&
               hess_ww.allFinite() && hess_thetatheta.allFinite() && cov_w.allFinite() &&
               cov_theta.allFinite();
    }
};

class ObjectiveSurface {
public:
    virtual ~ObjectiveSurface() = default;
    virtual int dim_w() const = 0;
    virtual int dim_theta() const = 0;
    virtual double value(const ParamPoint& q, const Batch& batch) const = 0;
    virtual ObjectiveEval eval(const ParamPoint& q, const Batch& batch) const = 0;
};

namespace detail {

// Permutation-invariant mean: summing in sorted order makes the result
// independent of sample order within the batch, bit for bit.
inline double sorted_mean(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc / static_cast<double>(terms.size());
}

// Empirical covariance of rows, divided once more by the row count
// (covariance of the mean estimator). Two-pass for a PSD result.
inline Eigen::MatrixXd estimator_covariance(const Eigen::MatrixXd& rows) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    if (n < 2) return cov;
    const Eigen::RowVectorXd mu = rows.colwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd c = rows.row(i) - mu;
        cov.noalias() += c.transpose() * c;
    }
    cov /= static_cast<double>(n);  // population covariance
    cov /= static_cast<double>(n);  // estimator scaling
    return cov;
}

}  // namespace detail

// ============================================================================
// Vanilla GAN toy model
//   D_w(x)   = sigmoid(w3/2 x^2 + w2 x + w1)
//   G_th(z)  = th2 z + th1
//   g(w,th)  = mean_i log D_w(x_i) + mean_j log(1 - D_w(G_th(z_j)))
// All derivatives are closed-form; log terms go through log-sigmoid so
// finite inputs never produce non-finite output.
// ============================================================================
class VanillaGanSurface : public ObjectiveSurface {
public:
    int dim_w() const override { return 3; }
    int dim_theta() const override { return 2; }

    static double exponent(const Eigen::VectorXd& w, double x) {
        return w[0] + w[1] * x + 0.5 * w[2] * x * x;
    }
    static double discriminator(const Eigen::VectorXd& w, double x) {
        return sigmoid(exponent(w, x));
    }
    static double generate(const Eigen::VectorXd& theta, double z) {
        return theta[1] * z + theta[0];
    }

    // mean_j log(1 - D_w(G_th(z_j))), the generator side of the objective.
    static double generator_term(const ParamPoint& q, const Eigen::VectorXd& zs) {
        std::vector<double> terms(static_cast<std::size_t>(zs.size()));
        for (Eigen::Index j = 0; j < zs.size(); ++j)
            terms[static_cast<std::size_t>(j)] = log_sigmoid(-exponent(q.w, generate(q.theta, zs[j])));
        return detail::sorted_mean(terms);
    }

    double value(const ParamPoint& q, const Batch& batch) const override {
        check_dims(q);
        batch.validate();
        std::vector<double> real(static_cast<std::size_t>(batch.xs.size()));
        for (Eigen::Index i = 0; i < batch.xs.size(); ++i)
            real[static_cast<std::size_t>(i)] = log_sigmoid(exponent(q.w, batch.xs[i]));
        return detail::sorted_mean(real) + generator_term(q, batch.zs);
    }

    ObjectiveEval eval(const ParamPoint& q, const Batch& batch) const override {
        check_dims(q);
        batch.validate();
        const auto n = batch.xs.size();
        const auto m = batch.zs.size();
        const double w2 = q.w[1], w3 = q.w[2];

        ObjectiveEval out;
        out.grad_w = Eigen::VectorXd::Zero(3);
        out.grad_theta = Eigen::VectorXd::Zero(2);
        out.hess_ww = Eigen::MatrixXd::Zero(3, 3);
        out.hess_thetatheta = Eigen::MatrixXd::Zero(2, 2);

        std::vector<double> value_terms;
        value_terms.reserve(static_cast<std::size_t>(n));

        // Real samples contribute log D; d/dL log D = sigmoid(-L).
        Eigen::MatrixXd grad_w_real(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = batch.xs[i];
            const double L = exponent(q.w, x);
            const double s = sigmoid(L), sm = sigmoid(-L);
            const Eigen::Vector3d ell(1.0, x, 0.5 * x * x);
            value_terms.push_back(log_sigmoid(L));
            grad_w_real.row(i) = sm * ell;
            out.hess_ww.noalias() -= (s * sm / static_cast<double>(n)) * (ell * ell.transpose());
        }
        out.value = detail::sorted_mean(value_terms);
        out.grad_w += grad_w_real.colwise().mean();

        // Generated samples contribute log(1 - D); d/dL log(1-D) = -sigmoid(L).
        value_terms.clear();
        value_terms.reserve(static_cast<std::size_t>(m));
        Eigen::MatrixXd grad_w_fake(m, 3);
        Eigen::MatrixXd grad_th(m, 2);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double z = batch.zs[j];
            const double y = generate(q.theta, z);
            const double L = exponent(q.w, y);
            const double s = sigmoid(L), sm = sigmoid(-L);
            const double Lp = w2 + w3 * y;  // dL/dy
            const Eigen::Vector3d ell(1.0, y, 0.5 * y * y);
            const Eigen::Vector2d dy(1.0, z);  // dy/dtheta
            value_terms.push_back(log_sigmoid(-L));
            grad_w_fake.row(j) = -s * ell;
            grad_th.row(j) = -s * Lp * dy;
            out.hess_ww.noalias() -= (s * sm / static_cast<double>(m)) * (ell * ell.transpose());
            out.hess_thetatheta.noalias() -=
                ((s * sm * Lp * Lp + s * w3) / static_cast<double>(m)) * (dy * dy.transpose());
        }
        out.value += detail::sorted_mean(value_terms);
        out.grad_w += grad_w_fake.colwise().mean();
        out.grad_theta += grad_th.colwise().mean();

        out.cov_w = detail::estimator_covariance(grad_w_real) + detail::estimator_covariance(grad_w_fake);
        out.cov_theta = detail::estimator_covariance(grad_th);
        return out;
    }

    // Correct-classification rate: real x counts when D(x) >= 1/2,
    // generated G(z) counts when D(G(z)) < 1/2.
    double accuracy(const ParamPoint& q, const Batch& batch) const {
        check_dims(q);
        batch.validate();
        long correct = 0;
        for (Eigen::Index i = 0; i < batch.xs.size(); ++i)
            if (discriminator(q.w, batch.xs[i]) >= 0.5) ++correct;
        for (Eigen::Index j = 0; j < batch.zs.size(); ++j)
            if (discriminator(q.w, generate(q.theta, batch.zs[j])) < 0.5) ++correct;
        return static_cast<double>(correct) /
               static_cast<double>(batch.xs.size() + batch.zs.size());
    }

private:
    void check_dims(const ParamPoint& q) const {
        if (q.w.size() != 3 || q.theta.size() != 2)
            throw ConfigError("VanillaGanSurface: expected dims (3, 2)");
    }
};

// Closed-form second derivative of the generator term restricted to
// theta2 = 0, i.e. of theta1 -> log(1 - D_w(theta1)). Written in terms
// of sigmoids so it stays finite for any finite input.
inline double g3_second_derivative(double theta1, const Eigen::VectorXd& w) {
    const double w1 = w[0], w2 = w[1], w3 = w[2];
    const double h = theta1 * (0.5 * w3 * theta1 + w2);
    const double s = sigmoid(h + w1);
    const double sm = sigmoid(-(h + w1));
    return -s * (w3 * (1.0 + 2.0 * h * sm) + w2 * w2 * sm);
}

// Closed-form optimum for a Gaussian target: the constant discriminator
// 1/2 and the generator matching (mean, std).
inline ParamPoint optimal_pair(const DistSpec& spec) {
    if (spec.kind != DistKind::gaussian)
        throw ConfigError("optimal_pair: closed form available for Gaussian targets only");
    ParamPoint q;
    q.w = Eigen::VectorXd::Zero(3);
    q.theta = Eigen::VectorXd(2);
    q.theta << spec.mean, spec.scale;
    return q;
}

// ============================================================================
// Quadratic test surface
//   g(w,th) = 1/2 w'Aw w + bw'w + 1/2 th'At th + bt'th + w'C th + c0
// with user-set constant gradient-noise covariance blocks.
// ============================================================================
class QuadraticSurface : public ObjectiveSurface {
public:
    QuadraticSurface(Eigen::MatrixXd a_w, Eigen::VectorXd b_w, Eigen::MatrixXd a_th,
                     Eigen::VectorXd b_th, Eigen::MatrixXd cross = {}, double c0 = 0.0)
        : a_w_(0.5 * (a_w + a_w.transpose())),
          b_w_(std::move(b_w)),
          a_th_(0.5 * (a_th + a_th.transpose())),
          b_th_(std::move(b_th)),
          cross_(std::move(cross)),
          c0_(c0) {
        if (cross_.size() == 0) cross_ = Eigen::MatrixXd::Zero(a_w_.rows(), a_th_.rows());
        cov_w_ = Eigen::MatrixXd::Zero(a_w_.rows(), a_w_.rows());
        cov_theta_ = Eigen::MatrixXd::Zero(a_th_.rows(), a_th_.rows());
    }

    // Scalar-in-w, scalar-in-theta convenience: g = 1/2 aw w^2 + 1/2 at th^2.
    static QuadraticSurface scalar(double a_w, double a_th) {
        return QuadraticSurface(Eigen::MatrixXd::Constant(1, 1, a_w), Eigen::VectorXd::Zero(1),
                                Eigen::MatrixXd::Constant(1, 1, a_th), Eigen::VectorXd::Zero(1));
    }

    // The xy-game g(x, y) = x y with w = x, theta = y.
    static QuadraticSurface xy_game() {
        return QuadraticSurface(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                                Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                                Eigen::MatrixXd::Identity(1, 1));
    }

    void set_noise(Eigen::MatrixXd cov_w, Eigen::MatrixXd cov_theta) {
        cov_w_ = std::move(cov_w);
        cov_theta_ = std::move(cov_theta);
    }

    int dim_w() const override { return static_cast<int>(a_w_.rows()); }
    int dim_theta() const override { return static_cast<int>(a_th_.rows()); }

    double value(const ParamPoint& q, const Batch&) const override { return value_at(q); }

    double value_at(const ParamPoint& q) const {
        return 0.5 * q.w.dot(a_w_ * q.w) + b_w_.dot(q.w) + 0.5 * q.theta.dot(a_th_ * q.theta) +
               b_th_.dot(q.theta) + q.w.dot(cross_ * q.theta) + c0_;
    }

    ObjectiveEval eval(const ParamPoint& q, const Batch&) const override { return eval_at(q); }

    ObjectiveEval eval_at(const ParamPoint& q) const {
        ObjectiveEval out;
        out.value = value_at(q);
        out.grad_w = a_w_ * q.w + b_w_ + cross_ * q.theta;
        out.grad_theta = a_th_ * q.theta + b_th_ + cross_.transpose() * q.w;
        out.hess_ww = a_w_;
        out.hess_thetatheta = a_th_;
        out.cov_w = cov_w_;
        out.cov_theta = cov_theta_;
        return out;
    }

private:
    Eigen::MatrixXd a_w_;
    Eigen::VectorXd b_w_;
    Eigen::MatrixXd a_th_;
    Eigen::VectorXd b_th_;
    Eigen::MatrixXd cross_;
    double c0_;
    Eigen::MatrixXd cov_w_, cov_theta_;
};

// ============================================================================
// Coordinate slice: exposes one w coordinate and one theta coordinate of a
// larger surface as a (1, 1)-dimensional surface, other coordinates frozen
// at an anchor point. Used by the grid solver, whose state space is 1+1 D.
// ============================================================================
class SlicedSurface : public ObjectiveSurface {
public:
    SlicedSurface(std::shared_ptr<const ObjectiveSurface> base, ParamPoint anchor, int w_index,
                  int theta_index)
        : base_(std::move(base)), anchor_(std::move(anchor)), wi_(w_index), ti_(theta_index) {
        if (wi_ < 0 || wi_ >= base_->dim_w() || ti_ < 0 || ti_ >= base_->dim_theta())
            throw ConfigError("SlicedSurface: index out of range");
    }

    int dim_w() const override { return 1; }
    int dim_theta() const override { return 1; }

    ParamPoint embed(const ParamPoint& q) const {
        ParamPoint full = anchor_;
        full.w[wi_] = q.w[0];
        full.theta[ti_] = q.theta[0];
        return full;
    }

    double value(const ParamPoint& q, const Batch& batch) const override {
        return base_->value(embed(q), batch);
    }

    ObjectiveEval eval(const ParamPoint& q, const Batch& batch) const override {
        const ObjectiveEval full = base_->eval(embed(q), batch);
        ObjectiveEval out;
        out.value = full.value;
        out.grad_w = Eigen::VectorXd::Constant(1, full.grad_w[wi_]);
        out.grad_theta = Eigen::VectorXd::Constant(1, full.grad_theta[ti_]);
        out.hess_ww = Eigen::MatrixXd::Constant(1, 1, full.hess_ww(wi_, wi_));
        out.hess_thetatheta = Eigen::MatrixXd::Constant(1, 1, full.hess_thetatheta(ti_, ti_));
        out.cov_w = Eigen::MatrixXd::Constant(1, 1, full.cov_w(wi_, wi_));
        out.cov_theta = Eigen::MatrixXd::Constant(1, 1, full.cov_theta(ti_, ti_));
        return out;
    }

private:
    std::shared_ptr<const ObjectiveSurface> base_;
    ParamPoint anchor_;
    int wi_, ti_;
};

// ============================================================================
// Finite-difference derivative oracle. Central differences with step
// h = 1e-5 (1 + |coordinate|) for gradients; second differences use the
// larger step 5e-4 (1 + |coordinate|), below which they would be dominated
// by roundoff (eps / h^2). Accuracy O(h^2) in either case. Covariance
// blocks are not derivative objects and are copied from the surface's own
// evaluation.
// ============================================================================
inline ObjectiveEval fd_derivative_oracle(const ObjectiveSurface& surface, const ParamPoint& q,
                                          const Batch& batch) {
    const int dw = surface.dim_w();
    const int dt = surface.dim_theta();
    const auto val = [&](const ParamPoint& p) { return surface.value(p, batch); };

    // Pack (w, theta) into one coordinate vector for uniform differencing.
    const int d = dw + dt;
    Eigen::VectorXd x(d);
    x.head(dw) = q.w;
    x.tail(dt) = q.theta;
    const auto unpack = [&](const Eigen::VectorXd& v) {
        ParamPoint p;
        p.w = v.head(dw);
        p.theta = v.tail(dt);
        return p;
    };
    Eigen::VectorXd h(d), h2(d);
    for (int i = 0; i < d; ++i) {
        h[i] = 1e-5 * (1.0 + std::abs(x[i]));
        h2[i] = 5e-4 * (1.0 + std::abs(x[i]));
    }

    ObjectiveEval out;
    out.value = val(q);
    Eigen::VectorXd grad(d);
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        grad[i] = (val(unpack(xp)) - val(unpack(xm))) / (2.0 * h[i]);
    }
    out.grad_w = grad.head(dw);
    out.grad_theta = grad.tail(dt);

    const double f0 = out.value;
    const auto second = [&](int i, int j) {
        if (i == j) {
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h2[i];
            xm[i] -= h2[i];
            return (val(unpack(xp)) - 2.0 * f0 + val(unpack(xm))) / (h2[i] * h2[i]);
        }
        Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
        xpp[i] += h2[i]; xpp[j] += h2[j];
        xpm[i] += h2[i]; xpm[j] -= h2[j];
        xmp[i] -= h2[i]; xmp[j] += h2[j];
        xmm[i] -= h2[i]; xmm[j] -= h2[j];
        return (val(unpack(xpp)) - val(unpack(xpm)) - val(unpack(xmp)) + val(unpack(xmm))) /
               (4.0 * h2[i] * h2[j]);
    };

    out.hess_ww = Eigen::MatrixXd(dw, dw);
    for (int i = 0; i < dw; ++i)
        for (int j = i; j < dw; ++j) out.hess_ww(i, j) = out.hess_ww(j, i) = second(i, j);
    out.hess_thetatheta = Eigen::MatrixXd(dt, dt);
    for (int i = 0; i < dt; ++i)
        for (int j = i; j < dt; ++j)
            out.hess_thetatheta(i, j) = out.hess_thetatheta(j, i) = second(dw + i, dw + j);

    const ObjectiveEval own = surface.eval(q, batch);
    out.cov_w = own.cov_w;
    out.cov_theta = own.cov_theta;
    return out;
}

}  // namespace ganctl
