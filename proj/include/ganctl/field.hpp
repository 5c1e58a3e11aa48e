// SPDX-License-Identifier: MIT
//
// Drift/diffusion description of the training dynamics at a point:
// gradient blocks plus diffusion factors sigma with sigma sigma' equal to
// the gradient-noise covariance. Surfaces are adapted through a frozen
// batch so the field is a deterministic smooth function of q.
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>

#include "ganctl/model.hpp"

namespace ganctl {

// Symmetric PSD square root; negative eigenvalues (roundoff) clamp to 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct FieldEval {
    Eigen::VectorXd g_w, g_theta;
    Eigen::MatrixXd sigma_w, sigma_theta;
};

class DriftDiffusionField {
public:
    virtual ~DriftDiffusionField() = default;
    virtual int dim_w() const = 0;
    virtual int dim_theta() const = 0;
    virtual FieldEval at(const ParamPoint& q) const = 0;
    virtual double objective(const ParamPoint& q) const = 0;
};

// Objective surface + frozen batch. With diagonal_sigma the diffusion
// keeps only the covariance diagonal (cheaper; exact when the covariance
// is diagonal), otherwise the full matrix square root is used (d <= 5).
class SurfaceField : public DriftDiffusionField {
public:
    SurfaceField(std::shared_ptr<const ObjectiveSurface> surface, Batch batch,
                 bool diagonal_sigma = false)
        : surface_(std::move(surface)), batch_(std::move(batch)), diagonal_(diagonal_sigma) {}

    int dim_w() const override { return surface_->dim_w(); }
    int dim_theta() const override { return surface_->dim_theta(); }

    FieldEval at(const ParamPoint& q) const override {
        const ObjectiveEval ev = surface_->eval(q, batch_);
        FieldEval f;
        f.g_w = ev.grad_w;
        f.g_theta = ev.grad_theta;
        if (diagonal_) {
            f.sigma_w = ev.cov_w.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            f.sigma_theta = ev.cov_theta.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        } else {
            f.sigma_w = psd_sqrt(ev.cov_w);
            f.sigma_theta = psd_sqrt(ev.cov_theta);
        }
        return f;
    }

    double objective(const ParamPoint& q) const override { return surface_->value(q, batch_); }

    const ObjectiveSurface& surface() const { return *surface_; }
    const Batch& batch() const { return batch_; }

private:
    std::shared_ptr<const ObjectiveSurface> surface_;
    Batch batch_;
    bool diagonal_;
};

// Quadratic objective with constant, user-chosen diffusion factors.
// Covers the linear-drift test problems in closed form.
class QuadraticField : public DriftDiffusionField {
public:
    QuadraticField(QuadraticSurface surface, Eigen::MatrixXd sigma_w, Eigen::MatrixXd sigma_theta)
        : surface_(std::move(surface)),
          sigma_w_(std::move(sigma_w)),
          sigma_theta_(std::move(sigma_theta)) {}

    int dim_w() const override { return surface_.dim_w(); }
    int dim_theta() const override { return surface_.dim_theta(); }

    FieldEval at(const ParamPoint& q) const override {
        const ObjectiveEval ev = surface_.eval_at(q);
        return FieldEval{ev.grad_w, ev.grad_theta, sigma_w_, sigma_theta_};
    }

    double objective(const ParamPoint& q) const override { return surface_.value_at(q); }

    const QuadraticSurface& surface() const { return surface_; }

private:
    QuadraticSurface surface_;
    Eigen::MatrixXd sigma_w_, sigma_theta_;
};

}  // namespace ganctl
