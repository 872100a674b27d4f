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
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rma/fem.hpp"
#include "rma/mesh.hpp"

namespace rma {

// Elliptic heat-conduction model: -div(exp(u) grad w) = 0 with unit inflow
// flux on the tagged boundary portion and a Robin condition (coefficient Bi)
// on the rest. Owns the global PDE-solve counter; every forward, adjoint,
// or incremental solve increments it by one. Factorizations are cached per
// parameter vector, so repeated solves at the same u only pay a backsolve.
// Not thread-safe: use one instance per thread.
class ForwardProblem {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;
    using Vector = Eigen::VectorXd;

    explicit ForwardProblem(MeshPtr mesh, double bi = 0.1,
                            std::vector<std::uint8_t> observation_mask = {})
        : mesh_(std::move(mesh)), bi_(bi), mask_(std::move(observation_mask)) {
        if (!mesh_) throw std::invalid_argument("forward problem needs a mesh");
        if (!(bi_ > 0.0)) throw std::invalid_argument("Biot number must be positive");
        if (mask_.empty()) mask_.assign(mesh_->num_nodes(), 1);
        if (static_cast<int>(mask_.size()) != mesh_->num_nodes())
            throw std::invalid_argument("observation mask length must equal the node count");
        for (int i = 0; i < mesh_->num_nodes(); ++i)
            if (mask_[i]) observed_.push_back(i);
        if (observed_.empty())
            throw std::invalid_argument("observation mask selects no nodes");
    }

    const Mesh& mesh() const { return *mesh_; }
    MeshPtr mesh_ptr() const { return mesh_; }
    double biot() const { return bi_; }
    int num_observations() const { return static_cast<int>(observed_.size()); }
    const std::vector<int>& observed_nodes() const { return observed_; }
    long solve_count() const { return solve_count_; }

    // Assembles K(u) and the load vector. K is SPD: the Robin term removes
    // the Neumann null space.
    std::pair<SparseMatrix, Vector> assemble_system(const Vector& u) const {
        check_field(u);
        std::vector<fem::Triplet> trip;
        trip.reserve(static_cast<std::size_t>(mesh_->num_elements()) * 9 + 4 * mesh_->facets.size());
        for (int e = 0; e < mesh_->num_elements(); ++e) {
            const auto g = fem::element_geometry(*mesh_, e);
            const double c = fem::exp_coefficient(*mesh_, e, &u) * g.measure;
            const auto& el = mesh_->elements[e];
            for (int a = 0; a < g.nverts; ++a)
                for (int b = 0; b < g.nverts; ++b)
                    trip.emplace_back(el[a], el[b],
                                      c * g.grads.col(a).dot(g.grads.col(b)));
        }
        fem::add_robin_boundary(*mesh_, bi_, trip);
        SparseMatrix K(mesh_->num_nodes(), mesh_->num_nodes());
        K.setFromTriplets(trip.begin(), trip.end());
        return {std::move(K), fem::flux_load(*mesh_)};
    }

    // Solves K(u) w = f.
    Field solve_forward(const Vector& u) {
        const auto& fact = factorization(u);
        Vector w = fact.solve(fem::flux_load(*mesh_));
        ++solve_count_;
        return Field(mesh_, std::move(w));
    }

    // Restriction of nodal values to the observation mask.
    Vector observe(const Field& w) const {
        if (w.mesh.get() != mesh_.get())
            throw std::invalid_argument("state field lives on a different mesh");
        Vector d(observed_.size());
        for (std::size_t k = 0; k < observed_.size(); ++k) d[k] = w.coeffs[observed_[k]];
        return d;
    }

    // Zero-padded extension of an observation-space vector to all nodes.
    Vector scatter(const Vector& robs) const {
        if (robs.size() != num_observations())
            throw std::invalid_argument("residual length must equal the observation count");
        Vector full = Vector::Zero(mesh_->num_nodes());
        for (std::size_t k = 0; k < observed_.size(); ++k) full[observed_[k]] = robs[k];
        return full;
    }

    // Solves K(u) p = -scatter(rhs). K is symmetric, so no transpose is needed.
    Field solve_adjoint(const Vector& u, const Vector& rhs_obs) {
        const auto& fact = factorization(u);
        Vector p = fact.solve(-scatter(rhs_obs));
        ++solve_count_;
        return Field(mesh_, std::move(p));
    }

    // Directional derivative of the observable map: one incremental solve.
    // The caller supplies w = solve_forward(u); passing a stale state is a
    // contract violation that cannot be detected here.
    Vector jacobian_action(const Vector& u, const Field& w, const Vector& du) {
        check_field(u);
        check_field(du);
        const auto& fact = factorization(u);
        const Vector rhs = fem::conductivity_derivative_action(*mesh_, u, w.coeffs, du);
        Vector dw = fact.solve(-rhs);
        ++solve_count_;
        return observe(Field(mesh_, std::move(dw)));
    }

    // Transpose of jacobian_action (verified by the dot-product test): one
    // incremental solve.
    Field jacobian_transpose_action(const Vector& u, const Field& w, const Vector& dd) {
        check_field(u);
        const auto& fact = factorization(u);
        const Vector q = fact.solve(scatter(dd));
        ++solve_count_;
        return Field(mesh_,
                     -fem::conductivity_derivative_transpose(*mesh_, u, w.coeffs, q));
    }

private:
    void check_field(const Vector& v) const {
        if (v.size() != mesh_->num_nodes())
            throw std::invalid_argument("coefficient length must equal the node count");
    }

    const Eigen::SimplicialLDLT<SparseMatrix>& factorization(const Vector& u) {
        if (!fact_ || cache_u_.size() != u.size() || cache_u_ != u) {
            auto [K, f] = assemble_system(u);
            (void)f;
            if (!fact_) fact_ = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
            fact_->compute(K);
            if (fact_->info() != Eigen::Success)
                throw std::runtime_error("forward operator factorization failed");
            cache_u_ = u;
        }
        return *fact_;
    }

    MeshPtr mesh_;
    double bi_;
    std::vector<std::uint8_t> mask_;
    std::vector<int> observed_;
    long solve_count_ = 0;

    Vector cache_u_;
    std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> fact_;
};

}  // namespace rma
