// Copyright 2026 The RMA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>

#include "rma/pde.hpp"
#include "rma/prior.hpp"
#include "rma/sketch.hpp"

namespace rma {

// Data side of the inverse problem: observations, noise level, whitened
// data, and the forward/prior pair they refer to.
struct InverseProblem {
    ForwardProblem forward;
    GaussianPrior prior;
    Eigen::VectorXd data;
    double sigma = 1.0;
    Eigen::VectorXd data_whitened;
    std::optional<Eigen::VectorXd> u_truth;

    InverseProblem(ForwardProblem fwd, GaussianPrior pr, Eigen::VectorXd d, double noise_std)
        : forward(std::move(fwd)), prior(std::move(pr)) {
        set_data(std::move(d), noise_std);
    }

    void set_data(Eigen::VectorXd d, double noise_std) {
        if (!(noise_std > 0.0)) throw std::invalid_argument("sigma must be positive");
        if (d.size() != forward.num_observations())
            throw std::invalid_argument("data length must equal the observation count");
        data = std::move(d);
        sigma = noise_std;
        data_whitened = data / sigma;
    }

    int data_dim() const { return forward.num_observations(); }
    int param_dim() const { return forward.mesh().num_nodes(); }

    // Whitened observable map: one forward solve.
    Eigen::VectorXd observable_whitened(const Eigen::VectorXd& u) {
        return forward.observe(forward.solve_forward(u)) / sigma;
    }
};

// MAP objective: 1/2 ||d^ - F^(u)||^2 + prior when no sketch is attached,
// and 1/2 ||S(d^ - F^(u))||^2 + prior with one. Sketching costs linear
// algebra only; the PDE-solve ledger is identical in both modes (one forward
// per cost, one forward + one adjoint per gradient, two incremental solves
// per Gauss-Newton Hessian action). Instances are single-threaded.
class Objective {
public:
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    explicit Objective(InverseProblem& problem) : prob_(&problem) {}

    Objective(InverseProblem& problem, SketchMatrix sketch)
        : prob_(&problem), sketch_(std::move(sketch)) {
        if (sketch_->cols() != prob_->data_dim())
            throw std::invalid_argument("sketch width must equal the data dimension");
    }

    InverseProblem& problem() { return *prob_; }
    const SketchMatrix* sketch() const { return sketch_ ? &*sketch_ : nullptr; }
    bool sketched() const { return sketch_.has_value(); }

    // Down-weights the misfit term; 0 leaves the pure prior objective (the
    // solves still run so the ledger is unchanged).
    void set_misfit_weight(double w) {
        if (w < 0.0) throw std::invalid_argument("misfit weight must be >= 0");
        misfit_weight_ = w;
    }

    // d^ - F^(u), sketched if a sketch is attached. One forward solve.
    Vector misfit_vector(const Vector& u) {
        const Vector full = prob_->data_whitened - prob_->observable_whitened(u);
        return sketch_ ? sketch_->apply(full) : full;
    }

    // One forward solve.
    double cost(const Vector& u) {
        return 0.5 * misfit_weight_ * misfit_vector(u).squaredNorm() +
               prob_->prior.cost(u);
    }

    // One forward + one adjoint solve. For the sketched objective the
    // residual is lifted by S^T S before the adjoint solve, so the PDE cost
    // matches the full gradient. Also records the linearization state used
    // by gn_hessian_action.
    Vector gradient(const Vector& u) {
        const Field w = prob_->forward.solve_forward(u);
        const Vector full_misfit =
            prob_->data_whitened - prob_->forward.observe(w) / prob_->sigma;
        Vector lifted = full_misfit;
        if (sketch_) lifted = sketch_->apply_transpose(sketch_->apply(full_misfit));
        const Field jt = prob_->forward.jacobian_transpose_action(
            u, w, misfit_weight_ * lifted / prob_->sigma);
        lin_u_ = u;
        lin_w_ = w;
        lin_valid_ = true;
        return -jt.coeffs + prob_->prior.grad(u);
    }

    // Gauss-Newton Hessian action at the last gradient point: exactly two
    // incremental solves. Throws if u differs from that point.
    Vector gn_hessian_action(const Vector& u, const Vector& du) {
        if (!lin_valid_ || lin_u_.size() != u.size() || lin_u_ != u)
            throw std::logic_error(
                "gn_hessian_action requires a gradient call at the same point first");
        return gn_hessian_action(du);
    }

    Vector gn_hessian_action(const Vector& du) {
        if (!lin_valid_)
            throw std::logic_error("no linearization state; call gradient first");
        Vector jdu = prob_->forward.jacobian_action(lin_u_, lin_w_, du) / prob_->sigma;
        if (sketch_) jdu = sketch_->apply_transpose(sketch_->apply(jdu));
        const Field jt = prob_->forward.jacobian_transpose_action(
            lin_u_, lin_w_, misfit_weight_ * jdu / prob_->sigma);
        return jt.coeffs + prob_->prior.hess_action(du);
    }

    // CG preconditioner: the prior covariance.
    Vector precondition(const Vector& r) const {
        return prob_->prior.covariance_action(r);
    }

    long pde_solve_count() const { return prob_->forward.solve_count(); }

    // Whitened observable Jacobian at u, built column by column; costs one
    // forward plus param_dim incremental solves. Desk meshes only.
    Matrix dense_whitened_jacobian(const Vector& u) {
        const int m = prob_->param_dim();
        const Field w = prob_->forward.solve_forward(u);
        Matrix jac(prob_->data_dim(), m);
        Vector e = Vector::Zero(m);
        for (int k = 0; k < m; ++k) {
            e[k] = 1.0;
            jac.col(k) = prob_->forward.jacobian_action(u, w, e) / prob_->sigma;
            e[k] = 0.0;
        }
        return jac;
    }

    // Top-k eigenvalues (descending) of the prior-preconditioned Gauss-Newton
    // misfit Hessian at u, via dense assembly and a generalized eigensolve
    // with the prior precision.
    Vector misfit_hessian_spectrum(const Vector& u, int k) {
        const int m = prob_->param_dim();
        if (k < 1 || k > m) throw std::invalid_argument("spectrum size out of range");
        const Matrix jac = dense_whitened_jacobian(u);
        Matrix gn;
        if (sketch_) {
            const Matrix sj = sketch_->to_dense() * jac;
            gn = sj.transpose() * sj;
        } else {
            gn = jac.transpose() * jac;
        }
        const Matrix r_dense = prob_->prior.dense_precision();
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(gn, r_dense);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("generalized eigensolve failed");
        return es.eigenvalues().tail(k).reverse();
    }

private:
    InverseProblem* prob_;
    std::optional<SketchMatrix> sketch_;
    double misfit_weight_ = 1.0;

    bool lin_valid_ = false;
    Vector lin_u_;
    Field lin_w_;
};

}  // namespace rma
