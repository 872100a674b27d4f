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
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rma {

struct SolverConfig {
    double tol_cost = 1e-6;
    double tol_grad = 1e-6;
    double tol_step = 1e-6;
    int max_newton = 200;
    int cg_max = 400;
    double armijo_c1 = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 30;

    void validate() const {
        if (!(tol_cost > 0.0) || !(tol_grad > 0.0) || !(tol_step > 0.0))
            throw std::invalid_argument("solver tolerances must be positive");
        if (max_newton < 1 || cg_max < 1)
            throw std::invalid_argument("iteration caps must be positive");
    }

    nlohmann::json to_json() const {
        return {{"tol_cost", tol_cost},     {"tol_grad", tol_grad},
                {"tol_step", tol_step},     {"max_newton", max_newton},
                {"cg_max", cg_max},         {"armijo_c1", armijo_c1},
                {"backtrack_factor", backtrack_factor},
                {"max_backtracks", max_backtracks}};
    }
};

struct IterationRecord {
    int iter = 0;
    double cost = 0.0;
    double grad_norm = 0.0;
    int cg_iters = 0;
    int ls_evals = 0;
    long pde_solves = 0;  // cumulative
};

struct SolveReport {
    Eigen::VectorXd u_final;
    int newton_iters = 0;
    long cg_iters_total = 0;
    long pde_solves = 0;
    std::vector<IterationRecord> history;
    bool converged = false;
    std::string reason;
    double wall_time_sec = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& rec : history)
            hist.push_back({{"iter", rec.iter},
                            {"cost", rec.cost},
                            {"grad_norm", rec.grad_norm},
                            {"cg_iters", rec.cg_iters},
                            {"ls_evals", rec.ls_evals},
                            {"pde_solves", rec.pde_solves}});
        return {{"newton_iters", newton_iters}, {"cg_iters_total", cg_iters_total},
                {"pde_solves", pde_solves},     {"converged", converged},
                {"reason", reason},             {"wall_time_sec", wall_time_sec},
                {"history", hist}};
    }

    void write_history_csv(const std::string& path, const std::string& stamp = "") const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        if (!stamp.empty()) f << stamp << '\n';
        f << "iter,cost,grad_norm,cg_iters,ls_evals,pde_solves\n";
        f.precision(17);
        for (const auto& rec : history)
            f << rec.iter << ',' << rec.cost << ',' << rec.grad_norm << ','
              << rec.cg_iters << ',' << rec.ls_evals << ',' << rec.pde_solves << '\n';
    }
};

struct CgResult {
    Eigen::VectorXd step;
    int iters = 0;
    bool negative_curvature = false;
    bool hit_max = false;
};

namespace detail {
struct IdentityPrecond {
    Eigen::VectorXd operator()(const Eigen::VectorXd& r) const { return r; }
};
}  // namespace detail

// Preconditioned CG on H p = -g, truncated once the true residual satisfies
// ||H p + g|| <= forcing_tol * ||g|| or curvature turns nonpositive (then the
// current iterate is returned; on the first iteration the preconditioned
// steepest-descent direction is used instead).
template <class HessAction, class Precond = detail::IdentityPrecond>
CgResult cg_solve(HessAction&& hess, const Eigen::VectorXd& g, double forcing_tol,
                  int cg_max, Precond&& precond = Precond{}) {
    using Eigen::VectorXd;
    CgResult res;
    res.step = VectorXd::Zero(g.size());
    VectorXd r = -g;
    const double target = forcing_tol * g.norm();
    if (r.norm() <= target) return res;
    VectorXd z = precond(r);
    VectorXd d = z;
    double rz = r.dot(z);
    for (int k = 0; k < cg_max; ++k) {
        const VectorXd hd = hess(d);
        ++res.iters;
        const double curvature = d.dot(hd);
        if (curvature <= 0.0) {
            res.negative_curvature = true;
            if (k == 0) res.step = z;
            return res;
        }
        const double alpha = rz / curvature;
        res.step += alpha * d;
        r -= alpha * hd;
        if (r.norm() <= target) return res;
        z = precond(r);
        const double rz_next = r.dot(z);
        d = z + (rz_next / rz) * d;
        rz = rz_next;
    }
    res.hit_max = true;
    return res;
}

// Inexact Gauss-Newton-CG with Armijo backtracking. The objective must
// provide cost(u), gradient(u) (which fixes the linearization point),
// gn_hessian_action(du) at that point, precondition(r), and
// pde_solve_count(). Stops when the cost, gradient norm, or accepted step
// norm falls below its tolerance. The CG forcing term is
// min(0.5, sqrt(||g|| / ||g0||)).
template <class Obj>
SolveReport minimize(Obj& obj, const Eigen::VectorXd& u_init, const SolverConfig& cfg) {
    using Eigen::VectorXd;
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const long solves_start = obj.pde_solve_count();

    SolveReport report;
    VectorXd u = u_init;
    double cost = obj.cost(u);
    double grad_norm0 = -1.0;

    for (int k = 0; k < cfg.max_newton; ++k) {
        if (cost < cfg.tol_cost) {
            report.converged = true;
            report.reason = "cost";
            break;
        }
        const VectorXd g = obj.gradient(u);
        const double grad_norm = g.norm();
        if (grad_norm0 < 0.0) grad_norm0 = grad_norm;
        if (grad_norm < cfg.tol_grad) {
            report.converged = true;
            report.reason = "gradient";
            report.history.push_back({k, cost, grad_norm, 0, 0,
                                      obj.pde_solve_count() - solves_start});
            break;
        }

        const double forcing =
            std::min(0.5, std::sqrt(grad_norm / std::max(grad_norm0, 1e-300)));
        auto hess = [&obj](const VectorXd& v) { return obj.gn_hessian_action(v); };
        auto precond = [&obj](const VectorXd& r) { return obj.precondition(r); };
        const CgResult cg = cg_solve(hess, g, forcing, cfg.cg_max, precond);
        VectorXd p = cg.step;
        double slope = g.dot(p);
        if (slope >= 0.0) {  // fall back to steepest descent
            p = -g;
            slope = g.dot(p);
        }

        double alpha = 1.0;
        int ls_evals = 0;
        double trial_cost = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < cfg.max_backtracks; ++ls) {
            trial_cost = obj.cost(u + alpha * p);
            ++ls_evals;
            if (trial_cost <= cost + cfg.armijo_c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack_factor;
        }
        report.newton_iters = k + 1;
        report.cg_iters_total += cg.iters;
        report.history.push_back({k, trial_cost, grad_norm, cg.iters, ls_evals,
                                  obj.pde_solve_count() - solves_start});
        if (!accepted) {
            report.converged = false;
            report.reason = "linesearch";
            break;
        }
        const double step_norm = alpha * p.norm();
        u += alpha * p;
        cost = trial_cost;
        if (step_norm < cfg.tol_step) {
            report.converged = true;
            report.reason = "step";
            break;
        }
    }
    if (report.reason.empty()) {
        report.converged = cost < cfg.tol_cost;
        report.reason = report.converged ? "cost" : "max_newton";
    }

    report.u_final = u;
    report.pde_solves = obj.pde_solve_count() - solves_start;
    report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace rma
