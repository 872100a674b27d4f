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
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rma/objective.hpp"
#include "rma/optimizer.hpp"
#include "rma/sketch.hpp"

// Statistical verification layer: discrepancy statistics for the sketched
// and full misfits, a dense linear oracle for the linearized problem, and
// the convergence/bias studies built on it.

namespace rma {

// ||d^ - F^(u)||^2 / N: one forward solve.
inline double discrepancy_tau(InverseProblem& problem, const Eigen::VectorXd& u) {
    const Eigen::VectorXd misfit = problem.data_whitened - problem.observable_whitened(u);
    return misfit.squaredNorm() / problem.data_dim();
}

// The guaranteed interval for the full-misfit discrepancy given the sketched
// one: (tau' / (1 + eps), tau' / (1 - eps)).
inline std::pair<double, double> morozov_range(double tau_prime, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("epsilon must lie in (0,1)");
    return {tau_prime / (1.0 + epsilon), tau_prime / (1.0 - epsilon)};
}

struct MorozovRecord {
    int N = 0;
    int n = 0;
    double Jn_misfit = 0.0;   // ||S (d^ - F^(u*_n))||^2
    double tau_prime = 0.0;   // Jn_misfit / N
    double range_lo = 0.0;
    double range_hi = 0.0;
    double p = 0.0;           // 1 - exp(-n eps^2 / 8)
    double J_misfit = 0.0;    // ||d^ - F^(u*_n)||^2
    double tau = 0.0;         // J_misfit / N
    bool success = false;     // tau inside [range_lo, range_hi]
    long pde_solves = 0;
    bool converged = false;
};

struct MorozovSummary {
    int n = 0;
    double epsilon = 0.0;
    double p = 0.0;
    std::vector<MorozovRecord> records;
    double success_rate = 0.0;
    double mean_tau_prime = 0.0;

    void write_csv(const std::string& path, const std::string& stamp = "") const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        if (!stamp.empty()) f << stamp << '\n';
        f << "trial,N,n,Jn_misfit,tau_prime,range_lo,range_hi,p,J_misfit,tau,success\n";
        f.precision(17);
        for (std::size_t t = 0; t < records.size(); ++t) {
            const auto& r = records[t];
            f << t << ',' << r.N << ',' << r.n << ',' << r.Jn_misfit << ','
              << r.tau_prime << ',' << r.range_lo << ',' << r.range_hi << ','
              << r.p << ',' << r.J_misfit << ',' << r.tau << ','
              << (r.success ? 1 : 0) << '\n';
        }
    }
};

using ProblemFactory = std::function<InverseProblem()>;

namespace detail {

// Runs trial bodies 0..trials-1 across jobs threads; bodies must only touch
// their own slot in pre-sized output storage.
inline void parallel_trials(int trials, int jobs, const std::function<void(int)>& body) {
    jobs = std::max(1, std::min(jobs, trials));
    if (jobs == 1) {
        for (int t = 0; t < trials; ++t) body(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&]() {
            for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) body(t);
        });
    for (auto& th : workers) th.join();
}

}  // namespace detail

// One full RMA inversion per trial; per-trial sketch seed derived from
// (seed, trial). Success means the full-misfit discrepancy tau of the
// sketched solution lands inside the guaranteed range around tau'.
inline MorozovSummary morozov_verify(const ProblemFactory& make_problem,
                                     const SketchDistribution& dist, int n,
                                     double epsilon, int trials, std::uint64_t seed,
                                     const SolverConfig& cfg = {}, int jobs = 1) {
    MorozovSummary summary;
    summary.n = n;
    summary.epsilon = epsilon;
    summary.p = 1.0 - failure_probability(n, epsilon);
    summary.records.resize(trials);

    detail::parallel_trials(trials, jobs, [&](int t) {
        InverseProblem prob = make_problem();
        const auto sk = build_sketch(dist, n, prob.data_dim(),
                                     derive_seed(seed, static_cast<std::uint64_t>(t)));
        Objective obj(prob, sk);
        const SolveReport rep = minimize(obj, prob.prior.mean(), cfg);

        MorozovRecord rec;
        rec.N = prob.data_dim();
        rec.n = n;
        const Eigen::VectorXd full_misfit =
            prob.data_whitened - prob.observable_whitened(rep.u_final);
        rec.J_misfit = full_misfit.squaredNorm();
        rec.Jn_misfit = sk.apply(full_misfit).squaredNorm();
        rec.tau = rec.J_misfit / rec.N;
        rec.tau_prime = rec.Jn_misfit / rec.N;
        std::tie(rec.range_lo, rec.range_hi) = morozov_range(rec.tau_prime, epsilon);
        rec.p = summary.p;
        rec.success = rec.tau >= rec.range_lo && rec.tau <= rec.range_hi;
        rec.pde_solves = rep.pde_solves;
        rec.converged = rep.converged;
        summary.records[t] = rec;
    });

    int successes = 0;
    double tau_prime_sum = 0.0;
    for (const auto& r : summary.records) {
        successes += r.success ? 1 : 0;
        tau_prime_sum += r.tau_prime;
    }
    summary.success_rate = trials > 0 ? double(successes) / trials : 0.0;
    summary.mean_tau_prime = trials > 0 ? tau_prime_sum / trials : 0.0;
    return summary;
}

// Pilot tuning: bisection on the trial-mean tau' toward 1 over [n_lo, n_hi].
// tau' grows with n (small n overfits the sketched directions), so plain
// bisection applies.
inline int tune_morozov_n(const ProblemFactory& make_problem,
                          const SketchDistribution& dist, double epsilon,
                          int pilot_trials, std::uint64_t seed,
                          const SolverConfig& cfg = {}, int n_lo = 10, int n_hi = 400,
                          int jobs = 1) {
    auto mean_tau_prime = [&](int n) {
        return morozov_verify(make_problem, dist, n, epsilon, pilot_trials, seed, cfg, jobs)
            .mean_tau_prime;
    };
    double lo_val = mean_tau_prime(n_lo);
    if (lo_val >= 1.0) return n_lo;
    double hi_val = mean_tau_prime(n_hi);
    if (hi_val <= 1.0) return n_hi;
    int lo = n_lo, hi = n_hi;
    while (hi - lo > 5) {
        const int mid = (lo + hi) / 2;
        const double val = mean_tau_prime(mid);
        if (val < 1.0) lo = mid; else hi = mid;
    }
    return hi;
}

// Dense oracle for the problem linearized at u_lin: whitened Jacobian,
// effective whitened data, and the dense prior precision. Built with
// param_dim incremental solves; desk meshes only.
struct LinearOracle {
    Eigen::MatrixXd F_hat;   // N x m
    Eigen::MatrixXd R;       // m x m prior precision
    Eigen::VectorXd d_hat;   // effective data: d^ - F^(u_lin) + F_hat u_lin
    Eigen::VectorXd u0;
    int param_dim = 0;

    double cost(const Eigen::VectorXd& u, const SketchMatrix* sketch = nullptr) const {
        Eigen::VectorXd misfit = d_hat - F_hat * u;
        if (sketch) misfit = sketch->apply(misfit);
        const Eigen::VectorXd du = u - u0;
        return 0.5 * misfit.squaredNorm() + 0.5 * du.dot(R * du);
    }
};

inline LinearOracle linear_oracle_build(InverseProblem& problem,
                                        const Eigen::VectorXd& u_lin,
                                        int max_param_dim = 2000) {
    LinearOracle oracle;
    oracle.param_dim = problem.param_dim();
    if (oracle.param_dim > max_param_dim)
        throw std::invalid_argument("parameter dimension too large for the dense oracle");
    Objective obj(problem);
    oracle.F_hat = obj.dense_whitened_jacobian(u_lin);
    oracle.R = problem.prior.dense_precision();
    const Eigen::VectorXd f_at_lin = problem.observable_whitened(u_lin);
    oracle.d_hat = problem.data_whitened - f_at_lin + oracle.F_hat * u_lin;
    oracle.u0 = problem.prior.mean();
    return oracle;
}

// Exact minimizer of the (optionally sketched) quadratic cost by a dense SPD
// solve of the first-order optimality system.
inline Eigen::VectorXd normal_equations_solve(const LinearOracle& oracle,
                                              const SketchMatrix* sketch = nullptr) {
    Eigen::MatrixXd lhs;
    Eigen::VectorXd rhs;
    if (sketch) {
        const Eigen::MatrixXd sf = sketch->to_dense() * oracle.F_hat;
        lhs = sf.transpose() * sf + oracle.R;
        rhs = sf.transpose() * sketch->apply(oracle.d_hat) + oracle.R * oracle.u0;
    } else {
        lhs = oracle.F_hat.transpose() * oracle.F_hat + oracle.R;
        rhs = oracle.F_hat.transpose() * oracle.d_hat + oracle.R * oracle.u0;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("normal equations are not positive definite");
    Eigen::VectorXd u = llt.solve(rhs);
    u += llt.solve(rhs - lhs * u);  // one refinement step
    return u;
}

// The linearized problem as a minimizable objective; cross-validates the
// iterative optimizer against the dense solve.
class QuadraticObjective {
public:
    explicit QuadraticObjective(const LinearOracle& oracle,
                                std::optional<SketchMatrix> sketch = std::nullopt)
        : oracle_(&oracle), sketch_(std::move(sketch)) {
        r_llt_.compute(oracle.R);
        if (r_llt_.info() != Eigen::Success)
            throw std::runtime_error("prior precision factorization failed");
    }

    double cost(const Eigen::VectorXd& u) const {
        return oracle_->cost(u, sketch_ ? &*sketch_ : nullptr);
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
        Eigen::VectorXd misfit = oracle_->d_hat - oracle_->F_hat * u;
        Eigen::VectorXd lifted = misfit;
        if (sketch_) lifted = sketch_->apply_transpose(sketch_->apply(misfit));
        return -oracle_->F_hat.transpose() * lifted + oracle_->R * (u - oracle_->u0);
    }

    Eigen::VectorXd gn_hessian_action(const Eigen::VectorXd& du) const {
        Eigen::VectorXd fdu = oracle_->F_hat * du;
        if (sketch_) fdu = sketch_->apply_transpose(sketch_->apply(fdu));
        return oracle_->F_hat.transpose() * fdu + oracle_->R * du;
    }

    Eigen::VectorXd precondition(const Eigen::VectorXd& r) const {
        return r_llt_.solve(r);
    }

    long pde_solve_count() const { return 0; }

private:
    const LinearOracle* oracle_;
    std::optional<SketchMatrix> sketch_;
    Eigen::LLT<Eigen::MatrixXd> r_llt_;
};

struct ConvergenceStudy {
    std::vector<int> n_values;
    std::vector<double> mean_abs_err_J;
    std::vector<double> mean_abs_err_u;
    std::vector<double> mean_rel_err_J;
    std::vector<double> mean_rel_err_u;
    double slope_J = 0.0;  // log-log least squares over n
    double slope_u = 0.0;
    double J_star = 0.0;
    double u_star_norm = 0.0;

    void write_csv(const std::string& path, const std::string& stamp = "") const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        if (!stamp.empty()) f << stamp << '\n';
        f << "n,mean_abs_err_J,mean_abs_err_u,mean_rel_err_J,mean_rel_err_u\n";
        f.precision(17);
        for (std::size_t i = 0; i < n_values.size(); ++i)
            f << n_values[i] << ',' << mean_abs_err_J[i] << ',' << mean_abs_err_u[i]
              << ',' << mean_rel_err_J[i] << ',' << mean_rel_err_u[i] << '\n';
    }
};

namespace detail {
inline double loglog_slope(const std::vector<int>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(static_cast<double>(x[i]));
        const double ly = std::log(y[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
}  // namespace detail

// Trial-averaged |J*_n - J*| and ||u*_n - u*|| over a sweep of n, with
// log-log slope estimates. Relative errors share the slopes by construction.
inline ConvergenceStudy convergence_study(const LinearOracle& oracle,
                                          const std::vector<int>& n_values, int trials,
                                          const SketchDistribution& dist,
                                          std::uint64_t seed, int jobs = 1) {
    if (n_values.size() < 2)
        throw std::invalid_argument("convergence study needs at least two n values");
    const auto [n_min, n_max] = std::minmax_element(n_values.begin(), n_values.end());
    if (std::log10(double(*n_max) / double(*n_min)) < 1.5)
        throw std::invalid_argument("convergence study needs n to span 1.5 decades");
    ConvergenceStudy study;
    study.n_values = n_values;
    const Eigen::VectorXd u_star = normal_equations_solve(oracle);
    study.J_star = oracle.cost(u_star);
    study.u_star_norm = u_star.norm();

    const int total = static_cast<int>(n_values.size()) * trials;
    std::vector<double> err_J(total), err_u(total);
    detail::parallel_trials(total, jobs, [&](int idx) {
        const int ni = idx / trials;
        const int n = n_values[ni];
        const auto sk = build_sketch(dist, n, static_cast<int>(oracle.F_hat.rows()),
                                     derive_seed(seed, static_cast<std::uint64_t>(idx)));
        const Eigen::VectorXd u_n = normal_equations_solve(oracle, &sk);
        const double j_n = oracle.cost(u_n, &sk);
        err_J[idx] = std::abs(j_n - study.J_star);
        err_u[idx] = (u_n - u_star).norm();
    });

    for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
        double sj = 0.0, su = 0.0;
        for (int t = 0; t < trials; ++t) {
            sj += err_J[ni * trials + t];
            su += err_u[ni * trials + t];
        }
        study.mean_abs_err_J.push_back(sj / trials);
        study.mean_abs_err_u.push_back(su / trials);
        study.mean_rel_err_J.push_back(sj / trials / std::abs(study.J_star));
        study.mean_rel_err_u.push_back(su / trials / study.u_star_norm);
    }
    study.slope_J = detail::loglog_slope(study.n_values, study.mean_abs_err_J);
    study.slope_u = detail::loglog_slope(study.n_values, study.mean_abs_err_u);
    return study;
}

struct BiasCheck {
    int n = 0;
    int trials = 0;
    double mean_Jn_star = 0.0;
    double stderr_Jn_star = 0.0;
    double J_star = 0.0;
};

// Sample mean of J*_n over sketches; Jensen makes it a downward-biased
// estimate of J*.
inline BiasCheck bias_check(const LinearOracle& oracle, const SketchDistribution& dist,
                            int n, int trials, std::uint64_t seed, int jobs = 1) {
    if (trials < 2) throw std::invalid_argument("bias check needs trials >= 2");
    BiasCheck out;
    out.n = n;
    out.trials = trials;
    out.J_star = oracle.cost(normal_equations_solve(oracle));
    std::vector<double> values(trials);
    detail::parallel_trials(trials, jobs, [&](int t) {
        const auto sk = build_sketch(dist, n, static_cast<int>(oracle.F_hat.rows()),
                                     derive_seed(seed, static_cast<std::uint64_t>(t)));
        const Eigen::VectorXd u_n = normal_equations_solve(oracle, &sk);
        values[t] = oracle.cost(u_n, &sk);
    });
    double sum = 0.0, sumsq = 0.0;
    for (double v : values) {
        sum += v;
        sumsq += v * v;
    }
    out.mean_Jn_star = sum / trials;
    const double var = std::max(0.0, sumsq / trials - out.mean_Jn_star * out.mean_Jn_star);
    out.stderr_Jn_star = std::sqrt(var / trials);
    return out;
}

// Right-hand side of the linear solution-error bound:
// (eps / sigma_min^2(G)) (||F^|| ||u*|| + ||d^||) ||F^|| with
// G = (F^T S^T S F^ + R)^(1/2).
inline double theorem_error_bound(const LinearOracle& oracle, const SketchMatrix& sketch,
                                  double epsilon) {
    const Eigen::MatrixXd sf = sketch.to_dense() * oracle.F_hat;
    const Eigen::MatrixXd gram = sf.transpose() * sf + oracle.R;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double sigma_min_sq = es.eigenvalues().minCoeff();  // = sigma_min(G)^2
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ff(oracle.F_hat.transpose() *
                                                      oracle.F_hat);
    const double f_norm = std::sqrt(std::max(0.0, ff.eigenvalues().maxCoeff()));
    const Eigen::VectorXd u_star = normal_equations_solve(oracle);
    return epsilon / sigma_min_sq * (f_norm * u_star.norm() + oracle.d_hat.norm()) * f_norm;
}

}  // namespace rma
