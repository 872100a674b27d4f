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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rma/rng.hpp"

namespace rma {

enum class SketchKind { Gaussian, Rademacher, Achlioptas, SparseSign, Uniform };

inline std::string to_string(SketchKind kind) {
    switch (kind) {
        case SketchKind::Gaussian: return "gaussian";
        case SketchKind::Rademacher: return "rademacher";
        case SketchKind::Achlioptas: return "achlioptas";
        case SketchKind::SparseSign: return "sparse_sign";
        case SketchKind::Uniform: return "uniform";
    }
    throw std::logic_error("unreachable sketch kind");
}

inline SketchKind sketch_kind_from_string(const std::string& name) {
    if (name == "gaussian") return SketchKind::Gaussian;
    if (name == "rademacher") return SketchKind::Rademacher;
    if (name == "achlioptas") return SketchKind::Achlioptas;
    if (name == "sparse_sign") return SketchKind::SparseSign;
    if (name == "uniform") return SketchKind::Uniform;
    throw std::invalid_argument("unknown sketch kind: " + name);
}

// Entry distribution for the sketch. Every kind has mean 0 and variance 1.
// The sign family takes values in {+sqrt(s), 0, -sqrt(s)} with nonzero
// probability 1/s; Rademacher is s = 1 and Achlioptas is s = 3.
struct SketchDistribution {
    SketchKind kind = SketchKind::Gaussian;
    double sparsity_s = 1.0;
    double subgaussian_b = 1.0;

    static SketchDistribution gaussian() {
        return {SketchKind::Gaussian, 1.0, 1.0};
    }
    static SketchDistribution rademacher() {
        return {SketchKind::Rademacher, 1.0, sign_family_b(1.0)};
    }
    static SketchDistribution achlioptas() {
        return {SketchKind::Achlioptas, 3.0, sign_family_b(3.0)};
    }
    static SketchDistribution sparse_sign(double s) {
        if (!(s >= 1.0)) throw std::invalid_argument("sparse_sign requires s >= 1");
        return {SketchKind::SparseSign, s, sign_family_b(s)};
    }
    static SketchDistribution uniform() {
        return {SketchKind::Uniform, 1.0, 1.0};
    }

    bool is_sign_family() const {
        return kind == SketchKind::Rademacher || kind == SketchKind::Achlioptas ||
               kind == SketchKind::SparseSign;
    }

    // Moment parameter b with E[exp(t z)] <= exp(b^2 t^2 / 2) on the sign family.
    static double sign_family_b(double s) { return std::sqrt(s - 2.0 * std::log(s)); }
};

// One draw with mean 0 and variance 1. The sign family returns +/-sqrt(s)
// with probability 1/(2s) each and 0 otherwise.
inline double sample_entry(const SketchDistribution& dist, Xoshiro256& rng) {
    switch (dist.kind) {
        case SketchKind::Gaussian:
            return rng.gaussian();
        case SketchKind::Uniform: {
            // endpoints +/-sqrt(3) exactly (= sqrt(12)/2)
            constexpr double kSqrt3 = 1.7320508075688772;
            return (2.0 * rng.uniform01() - 1.0) * kSqrt3;
        }
        case SketchKind::Rademacher:
            return rng.uniform01() < 0.5 ? 1.0 : -1.0;
        case SketchKind::Achlioptas:
        case SketchKind::SparseSign: {
            const double s = dist.sparsity_s;
            const double u = rng.uniform01();
            if (u < 0.5 / s) return std::sqrt(s);
            if (u < 1.0 / s) return -std::sqrt(s);
            return 0.0;
        }
    }
    throw std::logic_error("unreachable sketch kind");
}

// The n x N operator with i.i.d. entries drawn from `dist` and scaled by
// 1/sqrt(n). Rows use independent streams derived from (seed, row), so the
// matrix is a pure function of (dist, n, N, seed). Sign-family kinds with
// s >= 3 store per-row (index, sign) lists; everything else is dense.
class SketchMatrix {
public:
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    SketchMatrix() = default;

    static SketchMatrix build(const SketchDistribution& dist, int n, int N,
                              std::uint64_t seed) {
        if (n < 1 || N < 1)
            throw std::invalid_argument("sketch dimensions must be positive");
        SketchMatrix sk;
        sk.n_ = n;
        sk.N_ = N;
        sk.dist_ = dist;
        sk.seed_ = seed;
        sk.sparse_ = dist.is_sign_family() && dist.sparsity_s >= 3.0;
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        if (sk.sparse_) {
            const double s = dist.sparsity_s;
            sk.sparse_value_ = std::sqrt(s) * scale;
            sk.rows_.resize(n);
            for (int j = 0; j < n; ++j) {
                Xoshiro256 rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
                auto& row = sk.rows_[j];
                row.reserve(static_cast<std::size_t>(N / s * 1.3 + 8));
                for (int i = 0; i < N; ++i) {
                    const double u = rng.uniform01();
                    if (u < 0.5 / s) {
                        row.emplace_back(i, std::int8_t{+1});
                    } else if (u < 1.0 / s) {
                        row.emplace_back(i, std::int8_t{-1});
                    }
                }
            }
        } else {
            sk.dense_.resize(n, N);
            for (int j = 0; j < n; ++j) {
                Xoshiro256 rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
                for (int i = 0; i < N; ++i)
                    sk.dense_(j, i) = sample_entry(dist, rng) * scale;
            }
        }
        return sk;
    }

    int rows() const { return n_; }
    int cols() const { return N_; }
    const SketchDistribution& distribution() const { return dist_; }
    std::uint64_t seed() const { return seed_; }
    bool sparse_storage() const { return sparse_; }

    // y = S v
    Vector apply(const Vector& v) const {
        if (v.size() != N_)
            throw std::invalid_argument("apply_sketch: vector length != N");
        if (!sparse_) return dense_ * v;
        Vector y(n_);
        for (int j = 0; j < n_; ++j) {
            double acc = 0.0;
            for (const auto& [idx, sign] : rows_[j])
                acc += sign > 0 ? v[idx] : -v[idx];
            y[j] = acc * sparse_value_;
        }
        return y;
    }

    // x = S^T w
    Vector apply_transpose(const Vector& w) const {
        if (w.size() != n_)
            throw std::invalid_argument("apply_transpose: vector length != n");
        if (!sparse_) return dense_.transpose() * w;
        Vector x = Vector::Zero(N_);
        for (int j = 0; j < n_; ++j) {
            const double wj = w[j] * sparse_value_;
            for (const auto& [idx, sign] : rows_[j])
                x[idx] += sign > 0 ? wj : -wj;
        }
        return x;
    }

    Matrix to_dense() const {
        if (!sparse_) return dense_;
        Matrix out = Matrix::Zero(n_, N_);
        for (int j = 0; j < n_; ++j)
            for (const auto& [idx, sign] : rows_[j])
                out(j, idx) = sign > 0 ? sparse_value_ : -sparse_value_;
        return out;
    }

    double nonzero_fraction() const {
        if (!sparse_) {
            std::int64_t nnz = 0;
            for (int j = 0; j < n_; ++j)
                for (int i = 0; i < N_; ++i)
                    if (dense_(j, i) != 0.0) ++nnz;
            return static_cast<double>(nnz) / (static_cast<double>(n_) * N_);
        }
        std::int64_t nnz = 0;
        for (const auto& row : rows_) nnz += static_cast<std::int64_t>(row.size());
        return static_cast<double>(nnz) / (static_cast<double>(n_) * N_);
    }

    nlohmann::json to_json() const {
        return {{"kind", to_string(dist_.kind)},
                {"s", dist_.sparsity_s},
                {"n", n_},
                {"N", N_},
                {"seed", seed_}};
    }

    static SketchMatrix from_json(const nlohmann::json& j) {
        const auto kind = sketch_kind_from_string(j.at("kind").get<std::string>());
        SketchDistribution dist;
        switch (kind) {
            case SketchKind::Gaussian: dist = SketchDistribution::gaussian(); break;
            case SketchKind::Rademacher: dist = SketchDistribution::rademacher(); break;
            case SketchKind::Achlioptas: dist = SketchDistribution::achlioptas(); break;
            case SketchKind::Uniform: dist = SketchDistribution::uniform(); break;
            case SketchKind::SparseSign:
                dist = SketchDistribution::sparse_sign(j.at("s").get<double>());
                break;
        }
        return build(dist, j.at("n").get<int>(), j.at("N").get<int>(),
                     j.at("seed").get<std::uint64_t>());
    }

private:
    int n_ = 0;
    int N_ = 0;
    SketchDistribution dist_;
    std::uint64_t seed_ = 0;
    bool sparse_ = false;
    double sparse_value_ = 0.0;
    Matrix dense_;
    std::vector<std::vector<std::pair<std::int32_t, std::int8_t>>> rows_;
};

inline SketchMatrix build_sketch(const SketchDistribution& dist, int n, int N,
                                 std::uint64_t seed) {
    return SketchMatrix::build(dist, n, N, seed);
}

inline Eigen::VectorXd apply_sketch(const SketchMatrix& sk, const Eigen::VectorXd& v) {
    return sk.apply(v);
}

// ||S v||^2 / ||v||^2 - 1.
inline double distortion(const SketchMatrix& sk, const Eigen::VectorXd& v) {
    const double vv = v.squaredNorm();
    if (vv == 0.0)
        throw std::invalid_argument("distortion undefined for the zero vector");
    return sk.apply(v).squaredNorm() / vv - 1.0;
}

// Accuracy/confidence budget for choosing the reduced dimension. The tail
// constant c is a reporting convention (see failure_probability); alpha and
// m parameterize the union bound over m vectors.
struct JlBudget {
    double epsilon = 0.5;
    double beta = 1.0;
    double c = 0.125;
    double alpha = 0.0;
    int m = 0;

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("epsilon must lie in (0,1)");
        if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
        if (!(c > 0.0 && c <= 0.25))
            throw std::invalid_argument("c must lie in (0, 1/4]");
        if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    }
};

// Smallest n with n >= beta / (c eps^2).
inline int required_n(const JlBudget& budget) {
    budget.validate();
    const double bound = budget.beta / (budget.c * budget.epsilon * budget.epsilon);
    return static_cast<int>(std::ceil(bound - 1e-12));
}

// Smallest n with n >= (2 + alpha) ln(m) / (c eps^2); the all-pairs guarantee
// then holds with probability at least 1 - m^(-alpha).
inline int required_n_union(const JlBudget& budget) {
    budget.validate();
    if (budget.m < 2) throw std::invalid_argument("union bound requires m >= 2");
    const double bound = (2.0 + budget.alpha) * std::log(static_cast<double>(budget.m)) /
                         (budget.c * budget.epsilon * budget.epsilon);
    return static_cast<int>(std::ceil(bound - 1e-12));
}

// exp(-c n eps^2): probability that a single sketched norm falls outside the
// (1 +/- eps) band. Success probability is 1 minus this.
inline double failure_probability(int n, double epsilon, double c = 0.125) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("epsilon must lie in (0,1)");
    if (!(c > 0.0 && c <= 0.25)) throw std::invalid_argument("c must lie in (0, 1/4]");
    return std::exp(-c * n * epsilon * epsilon);
}

}  // namespace rma
