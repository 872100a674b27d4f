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
#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rma {

enum class BoundaryTag { FluxInflow, Robin };

// A boundary facet: a point in 1D (node[1] = -1) or an edge in 2D.
struct Facet {
    std::array<int, 2> nodes{-1, -1};
    BoundaryTag tag = BoundaryTag::Robin;
};

// Piecewise-linear simplicial mesh of an interval or a rectangle. Every
// boundary facet carries exactly one tag; the inflow-flux portion is the
// facet set tagged FluxInflow.
class Mesh {
public:
    int dim = 1;
    Eigen::MatrixX2d nodes;                    // (x, y); y = 0 in 1D
    std::vector<std::array<int, 3>> elements;  // 1D: third entry = -1
    std::vector<Facet> facets;

    int num_nodes() const { return static_cast<int>(nodes.rows()); }
    int num_elements() const { return static_cast<int>(elements.size()); }

    // Uniform mesh of (0,1) into `cells` intervals; flux side "left" or "right".
    static std::shared_ptr<const Mesh> interval(int cells,
                                                const std::string& flux_side = "left") {
        if (cells < 1) throw std::invalid_argument("interval mesh needs >= 1 cell");
        auto mesh = std::make_shared<Mesh>();
        mesh->dim = 1;
        const int n = cells + 1;
        mesh->nodes.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            mesh->nodes(i, 0) = static_cast<double>(i) / cells;
            mesh->nodes(i, 1) = 0.0;
        }
        mesh->elements.reserve(cells);
        for (int i = 0; i < cells; ++i) mesh->elements.push_back({i, i + 1, -1});
        const bool flux_left = flux_side == "left";
        if (!flux_left && flux_side != "right")
            throw std::invalid_argument("1D flux side must be 'left' or 'right'");
        mesh->facets.push_back({{0, -1},
                                flux_left ? BoundaryTag::FluxInflow : BoundaryTag::Robin});
        mesh->facets.push_back({{n - 1, -1},
                                flux_left ? BoundaryTag::Robin : BoundaryTag::FluxInflow});
        return mesh;
    }

    // Structured triangulation of the unit square with nx-by-ny cells, each
    // split into two triangles; flux side one of bottom/top/left/right.
    static std::shared_ptr<const Mesh> unit_square(int nx, int ny,
                                                   const std::string& flux_side = "bottom") {
        if (nx < 1 || ny < 1) throw std::invalid_argument("unit square needs >= 1 cell per side");
        auto mesh = std::make_shared<Mesh>();
        mesh->dim = 2;
        const int mx = nx + 1, my = ny + 1;
        mesh->nodes.resize(mx * my, 2);
        auto id = [mx](int i, int j) { return j * mx + i; };
        for (int j = 0; j < my; ++j)
            for (int i = 0; i < mx; ++i) {
                mesh->nodes(id(i, j), 0) = static_cast<double>(i) / nx;
                mesh->nodes(id(i, j), 1) = static_cast<double>(j) / ny;
            }
        mesh->elements.reserve(2 * nx * ny);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
                mesh->elements.push_back({a, b, c});
                mesh->elements.push_back({a, c, d});
            }
        auto tag_for = [&flux_side](const std::string& side) {
            return side == flux_side ? BoundaryTag::FluxInflow : BoundaryTag::Robin;
        };
        if (flux_side != "bottom" && flux_side != "top" && flux_side != "left" &&
            flux_side != "right")
            throw std::invalid_argument("2D flux side must be bottom/top/left/right");
        for (int i = 0; i < nx; ++i) {
            mesh->facets.push_back({{id(i, 0), id(i + 1, 0)}, tag_for("bottom")});
            mesh->facets.push_back({{id(i, ny), id(i + 1, ny)}, tag_for("top")});
        }
        for (int j = 0; j < ny; ++j) {
            mesh->facets.push_back({{id(0, j), id(0, j + 1)}, tag_for("left")});
            mesh->facets.push_back({{id(nx, j), id(nx, j + 1)}, tag_for("right")});
        }
        return mesh;
    }

    std::vector<int> boundary_nodes() const {
        std::vector<char> seen(num_nodes(), 0);
        for (const auto& f : facets) {
            seen[f.nodes[0]] = 1;
            if (f.nodes[1] >= 0) seen[f.nodes[1]] = 1;
        }
        std::vector<int> out;
        for (int i = 0; i < num_nodes(); ++i)
            if (seen[i]) out.push_back(i);
        return out;
    }

    void write_csv(const std::string& nodes_path, const std::string& elements_path,
                   const std::string& stamp = "") const {
        std::ofstream nf(nodes_path);
        if (!nf) throw std::runtime_error("cannot write " + nodes_path);
        if (!stamp.empty()) nf << stamp << '\n';
        nf << "node,x,y\n";
        nf.precision(17);
        for (int i = 0; i < num_nodes(); ++i)
            nf << i << ',' << nodes(i, 0) << ',' << nodes(i, 1) << '\n';
        std::ofstream ef(elements_path);
        if (!ef) throw std::runtime_error("cannot write " + elements_path);
        if (!stamp.empty()) ef << stamp << '\n';
        if (dim == 1) {
            ef << "element,n0,n1\n";
            for (int e = 0; e < num_elements(); ++e)
                ef << e << ',' << elements[e][0] << ',' << elements[e][1] << '\n';
        } else {
            ef << "element,n0,n1,n2\n";
            for (int e = 0; e < num_elements(); ++e)
                ef << e << ',' << elements[e][0] << ',' << elements[e][1] << ','
                   << elements[e][2] << '\n';
        }
    }
};

using MeshPtr = std::shared_ptr<const Mesh>;

// Nodal coefficient vector of a piecewise-linear function on a mesh.
struct Field {
    MeshPtr mesh;
    Eigen::VectorXd coeffs;

    Field() = default;
    Field(MeshPtr m, Eigen::VectorXd c) : mesh(std::move(m)), coeffs(std::move(c)) {
        if (!mesh || coeffs.size() != mesh->num_nodes())
            throw std::invalid_argument("field length must equal the node count");
    }

    static Field zero(MeshPtr m) {
        const int n = m ? m->num_nodes() : 0;
        return Field(std::move(m), Eigen::VectorXd::Zero(n));
    }

    void write_csv(const std::string& path, const std::string& stamp = "") const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        if (!stamp.empty()) f << stamp << '\n';
        f << "node,value\n";
        f.precision(17);
        for (int i = 0; i < coeffs.size(); ++i) f << i << ',' << coeffs[i] << '\n';
    }
};

}  // namespace rma
