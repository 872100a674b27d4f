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
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "rma/fem.hpp"
#include "rma/mesh.hpp"
#include "rma/rng.hpp"

namespace rma {

// Gaussian smoothness prior with squared-elliptic covariance. The discrete
// operator is A = gamma K + delta M (stiffness of the Laplacian with natural
// boundary conditions plus mass), and the precision is R = A M_L^{-1} A with
// the lumped mass M_L, realizing the whitening norm in the mesh-weighted L2
// inner product. Immutable after construction; A is factorized once.
class GaussianPrior {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;
    using Vector = Eigen::VectorXd;

    GaussianPrior(MeshPtr mesh, double gamma, double delta, Vector mean)
        : mesh_(std::move(mesh)), gamma_(gamma), delta_(delta), mean_(std::move(mean)) {
        if (!mesh_) throw std::invalid_argument("prior needs a mesh");
        if (!(gamma_ > 0.0) || !(delta_ > 0.0))
            throw std::invalid_argument("prior weights gamma, delta must be positive");
        if (mean_.size() != mesh_->num_nodes())
            throw std::invalid_argument("prior mean length must equal the node count");
        a_op_ = SparseMatrix(gamma_ * fem::stiffness(*mesh_, nullptr)) +
                SparseMatrix(delta_ * fem::mass(*mesh_));
        mass_lumped_ = fem::lumped_mass(*mesh_);
        inv_mass_lumped_ = mass_lumped_.cwiseInverse();
        fact_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
        fact_->compute(a_op_);
        if (fact_->info() != Eigen::Success)
            throw std::runtime_error("prior operator factorization failed");
    }

    static GaussianPrior zero_mean(MeshPtr mesh, double gamma, double delta) {
        const int n = mesh->num_nodes();
        return GaussianPrior(std::move(mesh), gamma, delta, Vector::Zero(n));
    }

    const Mesh& mesh() const { return *mesh_; }
    double gamma() const { return gamma_; }
    double delta() const { return delta_; }
    const Vector& mean() const { return mean_; }

    // 1/2 ||u - u0||^2 in the precision norm.
    double cost(const Vector& u) const {
        const Vector y = a_op_ * shift(u);
        return 0.5 * y.dot(inv_mass_lumped_.asDiagonal() * y);
    }

    // R (u - u0)
    Vector grad(const Vector& u) const { return precision_action(shift(u)); }

    // R du
    Vector hess_action(const Vector& du) const { return precision_action(du); }

    Vector precision_action(const Vector& v) const {
        check(v);
        return a_op_ * (inv_mass_lumped_.asDiagonal() * (a_op_ * v));
    }

    // R^{-1} v = A^{-1} M_L A^{-1} v; used as the CG preconditioner.
    Vector covariance_action(const Vector& v) const {
        check(v);
        return fact_->solve(mass_lumped_.asDiagonal() * fact_->solve(v));
    }

    // u0 + A^{-1} M_L^{1/2} xi with standard normal xi: samples carry
    // covariance R^{-1}.
    Field sample(std::uint64_t seed) const {
        Xoshiro256 rng(seed);
        Vector xi(mesh_->num_nodes());
        for (int i = 0; i < xi.size(); ++i) xi[i] = rng.gaussian();
        const Vector noise = mass_lumped_.cwiseSqrt().asDiagonal() * xi;
        return Field(mesh_, mean_ + fact_->solve(noise));
    }

    Eigen::MatrixXd dense_precision() const {
        const Eigen::MatrixXd a_dense(a_op_);
        return a_dense * inv_mass_lumped_.asDiagonal() * a_dense;
    }

private:
    void check(const Vector& v) const {
        if (v.size() != mesh_->num_nodes())
            throw std::invalid_argument("vector length must equal the node count");
    }

    Vector shift(const Vector& u) const {
        check(u);
        return u - mean_;
    }

    MeshPtr mesh_;
    double gamma_;
    double delta_;
    Vector mean_;
    SparseMatrix a_op_;
    Vector mass_lumped_;
    Vector inv_mass_lumped_;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> fact_;
};

}  // namespace rma
