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
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rma/mesh.hpp"

// P1 assembly kernels. One-point quadrature is used wherever a varying
// coefficient enters, so coefficients are evaluated at element midpoints
// (1D) or centroids (2D).

namespace rma::fem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct ElementGeometry {
    double measure;                       // length or area
    Eigen::Matrix<double, 2, 3> grads;    // P1 shape gradients (column per node)
    int nverts;
};

inline ElementGeometry element_geometry(const Mesh& mesh, int e) {
    ElementGeometry g;
    const auto& el = mesh.elements[e];
    if (mesh.dim == 1) {
        g.nverts = 2;
        const double x0 = mesh.nodes(el[0], 0), x1 = mesh.nodes(el[1], 0);
        const double h = x1 - x0;
        g.measure = h;
        g.grads.setZero();
        g.grads(0, 0) = -1.0 / h;
        g.grads(0, 1) = 1.0 / h;
    } else {
        g.nverts = 3;
        const Eigen::Vector2d p0 = mesh.nodes.row(el[0]);
        const Eigen::Vector2d p1 = mesh.nodes.row(el[1]);
        const Eigen::Vector2d p2 = mesh.nodes.row(el[2]);
        const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                           (p2.x() - p0.x()) * (p1.y() - p0.y());
        g.measure = 0.5 * std::abs(det);
        // grad(phi_k) = rot90(opposite edge) / det
        g.grads.col(0) = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / det;
        g.grads.col(1) = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / det;
        g.grads.col(2) = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / det;
    }
    return g;
}

// Coefficient value exp(u) at the quadrature point of element e; u = nullptr
// means unit coefficient.
inline double exp_coefficient(const Mesh& mesh, int e, const Eigen::VectorXd* u) {
    if (!u) return 1.0;
    const auto& el = mesh.elements[e];
    double mid = 0.0;
    const int nv = mesh.dim == 1 ? 2 : 3;
    for (int k = 0; k < nv; ++k) mid += (*u)[el[k]];
    return std::exp(mid / nv);
}

// Stiffness matrix with coefficient exp(u) (or 1 when u is null).
inline SparseMatrix stiffness(const Mesh& mesh, const Eigen::VectorXd* log_coeff) {
    if (log_coeff && log_coeff->size() != mesh.num_nodes())
        throw std::invalid_argument("coefficient length must equal the node count");
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * 9);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = element_geometry(mesh, e);
        const double c = exp_coefficient(mesh, e, log_coeff) * g.measure;
        const auto& el = mesh.elements[e];
        for (int a = 0; a < g.nverts; ++a)
            for (int b = 0; b < g.nverts; ++b)
                trip.emplace_back(el[a], el[b], c * g.grads.col(a).dot(g.grads.col(b)));
    }
    SparseMatrix K(mesh.num_nodes(), mesh.num_nodes());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

// Consistent P1 mass matrix.
inline SparseMatrix mass(const Mesh& mesh) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * 9);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = element_geometry(mesh, e);
        const auto& el = mesh.elements[e];
        if (mesh.dim == 1) {
            const double m = g.measure / 6.0;
            trip.emplace_back(el[0], el[0], 2 * m);
            trip.emplace_back(el[1], el[1], 2 * m);
            trip.emplace_back(el[0], el[1], m);
            trip.emplace_back(el[1], el[0], m);
        } else {
            const double m = g.measure / 12.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    trip.emplace_back(el[a], el[b], (a == b ? 2 : 1) * m);
        }
    }
    SparseMatrix M(mesh.num_nodes(), mesh.num_nodes());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

// Row sums of the mass matrix as a diagonal vector.
inline Eigen::VectorXd lumped_mass(const Mesh& mesh) {
    Eigen::VectorXd ml = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = element_geometry(mesh, e);
        const auto& el = mesh.elements[e];
        const int nv = mesh.dim == 1 ? 2 : 3;
        for (int k = 0; k < nv; ++k) ml[el[k]] += g.measure / nv;
    }
    return ml;
}

// Adds Bi * <w, v> over the Robin part of the boundary.
inline void add_robin_boundary(const Mesh& mesh, double bi, std::vector<Triplet>& trip) {
    for (const auto& f : mesh.facets) {
        if (f.tag != BoundaryTag::Robin) continue;
        if (mesh.dim == 1) {
            trip.emplace_back(f.nodes[0], f.nodes[0], bi);
        } else {
            const Eigen::Vector2d p0 = mesh.nodes.row(f.nodes[0]);
            const Eigen::Vector2d p1 = mesh.nodes.row(f.nodes[1]);
            const double len = (p1 - p0).norm();
            const double m = bi * len / 6.0;
            trip.emplace_back(f.nodes[0], f.nodes[0], 2 * m);
            trip.emplace_back(f.nodes[1], f.nodes[1], 2 * m);
            trip.emplace_back(f.nodes[0], f.nodes[1], m);
            trip.emplace_back(f.nodes[1], f.nodes[0], m);
        }
    }
}

// Load vector <1, v> over the inflow-flux boundary.
inline Eigen::VectorXd flux_load(const Mesh& mesh) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (const auto& facet : mesh.facets) {
        if (facet.tag != BoundaryTag::FluxInflow) continue;
        if (mesh.dim == 1) {
            f[facet.nodes[0]] += 1.0;
        } else {
            const Eigen::Vector2d p0 = mesh.nodes.row(facet.nodes[0]);
            const Eigen::Vector2d p1 = mesh.nodes.row(facet.nodes[1]);
            const double len = (p1 - p0).norm();
            f[facet.nodes[0]] += 0.5 * len;
            f[facet.nodes[1]] += 0.5 * len;
        }
    }
    return f;
}

// t_i = integral of exp(u) du grad(w) . grad(phi_i): the action of the
// parameter derivative of the diffusion form on a direction du.
inline Eigen::VectorXd conductivity_derivative_action(const Mesh& mesh,
                                                      const Eigen::VectorXd& u,
                                                      const Eigen::VectorXd& w,
                                                      const Eigen::VectorXd& du) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = element_geometry(mesh, e);
        const auto& el = mesh.elements[e];
        const int nv = g.nverts;
        double du_mid = 0.0;
        Eigen::Vector2d grad_w = Eigen::Vector2d::Zero();
        for (int k = 0; k < nv; ++k) {
            du_mid += du[el[k]];
            grad_w += w[el[k]] * g.grads.col(k);
        }
        du_mid /= nv;
        const double c = exp_coefficient(mesh, e, &u) * du_mid * g.measure;
        for (int k = 0; k < nv; ++k) t[el[k]] += c * grad_w.dot(g.grads.col(k));
    }
    return t;
}

// g_k = integral of exp(u) phi_k grad(w) . grad(q): the transpose of the
// action above in its du argument.
inline Eigen::VectorXd conductivity_derivative_transpose(const Mesh& mesh,
                                                         const Eigen::VectorXd& u,
                                                         const Eigen::VectorXd& w,
                                                         const Eigen::VectorXd& q) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = element_geometry(mesh, e);
        const auto& el = mesh.elements[e];
        const int nv = g.nverts;
        Eigen::Vector2d grad_w = Eigen::Vector2d::Zero();
        Eigen::Vector2d grad_q = Eigen::Vector2d::Zero();
        for (int k = 0; k < nv; ++k) {
            grad_w += w[el[k]] * g.grads.col(k);
            grad_q += q[el[k]] * g.grads.col(k);
        }
        const double c = exp_coefficient(mesh, e, &u) * grad_w.dot(grad_q) * g.measure / nv;
        for (int k = 0; k < nv; ++k) out[el[k]] += c;
    }
    return out;
}

}  // namespace rma::fem
