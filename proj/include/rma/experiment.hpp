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

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rma/analysis.hpp"
#include "rma/objective.hpp"
#include "rma/optimizer.hpp"
#include "rma/sketch.hpp"
#include "rma/version.hpp"

// Experiment driver: JSON experiment configs, synthetic data generation,
// and the report-emitting commands behind the CLI. Every artifact embeds
// the resolved config, its hash, the seed, and the code version; reruns
// with an identical config are byte-identical except for timestamps.

namespace rma {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruthSpec {
    std::string type = "gaussian-blob";  // sinusoid | gaussian-blob | file
    double amplitude = 1.5;
    double width = 0.15;                 // gaussian-blob
    double periods = 1.0;                // sinusoid
    std::array<double, 2> center{0.5, 0.5};
    std::string path;                    // file
};

struct ExperimentConfig {
    int dim = 2;
    std::vector<int> resolution{36, 35};
    double bi = 0.1;
    std::string flux_boundary;  // defaulted by dim: left (1D), bottom (2D)
    std::string observation = "all";
    TruthSpec truth;
    double noise_fraction = -1.0;  // defaulted by dim: 0.01 (1D), 0.001 (2D)
    double prior_gamma = 0.1;
    double prior_delta = 1.0;
    std::string prior_u0 = "zero";
    std::optional<SketchKind> sketch_kind;
    double sketch_s = 1.0;
    int sketch_n = 0;
    SolverConfig solver;
    double epsilon = 0.5;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    json resolved() const {
        json truth_json = {{"type", truth.type}};
        if (truth.type == "sinusoid") {
            truth_json["amplitude"] = truth.amplitude;
            truth_json["periods"] = truth.periods;
        } else if (truth.type == "gaussian-blob") {
            truth_json["amplitude"] = truth.amplitude;
            truth_json["width"] = truth.width;
            truth_json["center"] = truth.center;
        } else {
            truth_json["path"] = truth.path;
        }
        json j = {{"schema", 1},
                  {"problem",
                   {{"dim", dim},
                    {"resolution", resolution},
                    {"bi", bi},
                    {"flux_boundary", flux_boundary},
                    {"observation", observation}}},
                  {"truth", truth_json},
                  {"noise_fraction", noise_fraction},
                  {"prior", {{"gamma", prior_gamma}, {"delta", prior_delta}, {"u0", prior_u0}}},
                  {"solver", solver.to_json()},
                  {"epsilon", epsilon},
                  {"seed", seed},
                  {"output_dir", output_dir}};
        if (sketch_kind) {
            j["sketch"] = {{"kind", to_string(*sketch_kind)},
                           {"s", sketch_s},
                           {"n", sketch_n}};
        }
        return j;
    }

    // Hash over the fields that determine the synthetic data (sketch and
    // solver settings do not affect it).
    json data_determining() const {
        json j = resolved();
        j.erase("sketch");
        j.erase("solver");
        j.erase("epsilon");
        j.erase("output_dir");
        return j;
    }
};

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

inline std::string config_hash(const json& j) { return fnv1a_hex(j.dump()); }

// Hash of the resolved config minus the output location: the experiment
// identity, not its deployment.
inline std::string experiment_hash(const json& resolved_config) {
    json j = resolved_config;
    j.erase("output_dir");
    return config_hash(j);
}

// First-line comment stamped into every CSV artifact.
inline std::string artifact_stamp(const ExperimentConfig& cfg) {
    return std::string("# code_version=") + kVersion +
           " config_hash=" + experiment_hash(cfg.resolved()) +
           " seed=" + std::to_string(cfg.seed);
}

namespace detail {

template <typename T>
T require_field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("config: missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + key + "' has the wrong type");
    }
}

template <typename T>
T optional_field(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    if (detail::require_field<int>(j, "schema") != 1)
        throw ConfigError("config: unsupported schema version");
    const json problem = detail::require_field<json>(j, "problem");
    cfg.dim = detail::require_field<int>(problem, "dim");
    if (cfg.dim != 1 && cfg.dim != 2) throw ConfigError("config: dim must be 1 or 2");
    cfg.resolution = detail::require_field<std::vector<int>>(problem, "resolution");
    if (static_cast<int>(cfg.resolution.size()) != cfg.dim)
        throw ConfigError("config: resolution must list one cell count per dimension");
    for (int r : cfg.resolution)
        if (r < 1) throw ConfigError("config: resolution entries must be positive");
    cfg.bi = detail::optional_field(problem, "bi", 0.1);
    if (!(cfg.bi > 0.0)) throw ConfigError("config: bi must be positive");
    cfg.flux_boundary = detail::optional_field<std::string>(
        problem, "flux_boundary", cfg.dim == 1 ? "left" : "bottom");
    cfg.observation = detail::optional_field<std::string>(problem, "observation", "all");
    if (cfg.observation != "all" && cfg.observation != "boundary")
        throw ConfigError("config: observation must be 'all' or 'boundary'");

    const json truth = detail::require_field<json>(j, "truth");
    cfg.truth.type = detail::require_field<std::string>(truth, "type");
    if (cfg.truth.type == "sinusoid") {
        if (cfg.dim != 1) throw ConfigError("config: sinusoid truth is 1D");
        cfg.truth.amplitude = detail::optional_field(truth, "amplitude", 1.0);
        cfg.truth.periods = detail::optional_field(truth, "periods", 1.0);
    } else if (cfg.truth.type == "gaussian-blob") {
        if (cfg.dim != 2) throw ConfigError("config: gaussian-blob truth is 2D");
        cfg.truth.amplitude = detail::optional_field(truth, "amplitude", 1.5);
        cfg.truth.width = detail::optional_field(truth, "width", 0.15);
        cfg.truth.center = detail::optional_field(truth, "center",
                                                  std::array<double, 2>{0.5, 0.5});
    } else if (cfg.truth.type == "file") {
        cfg.truth.path = detail::require_field<std::string>(truth, "path");
    } else {
        throw ConfigError("config: unknown truth type '" + cfg.truth.type + "'");
    }

    cfg.noise_fraction =
        detail::optional_field(j, "noise_fraction", cfg.dim == 1 ? 0.01 : 0.001);
    if (!(cfg.noise_fraction >= 0.0))
        throw ConfigError("config: noise_fraction must be >= 0");

    const json prior = detail::require_field<json>(j, "prior");
    cfg.prior_gamma = detail::require_field<double>(prior, "gamma");
    cfg.prior_delta = detail::require_field<double>(prior, "delta");
    cfg.prior_u0 = detail::optional_field<std::string>(prior, "u0", "zero");
    if (!(cfg.prior_gamma > 0.0) || !(cfg.prior_delta > 0.0))
        throw ConfigError("config: prior weights must be positive");

    if (j.contains("sketch") && !j.at("sketch").is_null()) {
        const json sk = j.at("sketch");
        cfg.sketch_kind = sketch_kind_from_string(
            detail::require_field<std::string>(sk, "kind"));
        cfg.sketch_s = detail::optional_field(sk, "s", 1.0);
        cfg.sketch_n = detail::require_field<int>(sk, "n");
        if (cfg.sketch_n < 1) throw ConfigError("config: sketch n must be positive");
    }

    if (j.contains("solver")) {
        const json s = j.at("solver");
        cfg.solver.tol_cost = detail::optional_field(s, "tol_cost", cfg.solver.tol_cost);
        cfg.solver.tol_grad = detail::optional_field(s, "tol_grad", cfg.solver.tol_grad);
        cfg.solver.tol_step = detail::optional_field(s, "tol_step", cfg.solver.tol_step);
        cfg.solver.max_newton = detail::optional_field(s, "max_newton", cfg.solver.max_newton);
        cfg.solver.cg_max = detail::optional_field(s, "cg_max", cfg.solver.cg_max);
        cfg.solver.armijo_c1 = detail::optional_field(s, "armijo_c1", cfg.solver.armijo_c1);
        cfg.solver.backtrack_factor =
            detail::optional_field(s, "backtrack_factor", cfg.solver.backtrack_factor);
        cfg.solver.max_backtracks =
            detail::optional_field(s, "max_backtracks", cfg.solver.max_backtracks);
    }
    cfg.solver.validate();

    cfg.epsilon = detail::optional_field(j, "epsilon", 0.5);
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
        throw ConfigError("config: epsilon must lie in (0,1)");
    cfg.seed = detail::optional_field<std::uint64_t>(j, "seed", 0);
    cfg.output_dir = detail::optional_field<std::string>(j, "output_dir", "out");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline MeshPtr build_mesh(const ExperimentConfig& cfg) {
    if (cfg.dim == 1) return Mesh::interval(cfg.resolution[0], cfg.flux_boundary);
    return Mesh::unit_square(cfg.resolution[0], cfg.resolution[1], cfg.flux_boundary);
}

inline Eigen::VectorXd load_field_csv(const std::string& path, int expected_len) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(f, line);  // header
    Eigen::VectorXd v = Eigen::VectorXd::Zero(expected_len);
    int count = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ": malformed row '" + line + "'");
        const int node = std::stoi(line.substr(0, comma));
        if (node < 0 || node >= expected_len)
            throw std::runtime_error(path + ": node index out of range");
        v[node] = std::stod(line.substr(comma + 1));
        ++count;
    }
    if (count != expected_len)
        throw std::runtime_error(path + ": expected " + std::to_string(expected_len) +
                                 " rows, found " + std::to_string(count));
    return v;
}

inline Field build_truth(const ExperimentConfig& cfg, const MeshPtr& mesh) {
    Eigen::VectorXd u(mesh->num_nodes());
    if (cfg.truth.type == "sinusoid") {
        for (int i = 0; i < mesh->num_nodes(); ++i)
            u[i] = cfg.truth.amplitude *
                   std::sin(2.0 * M_PI * cfg.truth.periods * mesh->nodes(i, 0));
    } else if (cfg.truth.type == "gaussian-blob") {
        for (int i = 0; i < mesh->num_nodes(); ++i) {
            const double dx = mesh->nodes(i, 0) - cfg.truth.center[0];
            const double dy = mesh->nodes(i, 1) - cfg.truth.center[1];
            u[i] = cfg.truth.amplitude *
                   std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.truth.width * cfg.truth.width));
        }
    } else {
        u = load_field_csv(cfg.truth.path, mesh->num_nodes());
    }
    return Field(mesh, std::move(u));
}

inline std::vector<std::uint8_t> observation_mask(const ExperimentConfig& cfg,
                                                  const MeshPtr& mesh) {
    if (cfg.observation == "all") return {};
    std::vector<std::uint8_t> mask(mesh->num_nodes(), 0);
    for (int b : mesh->boundary_nodes()) mask[b] = 1;
    return mask;
}

struct Synthesis {
    MeshPtr mesh;
    Field truth;
    Eigen::VectorXd clean;  // noiseless observations
    Eigen::VectorXd data;   // noisy observations
    double sigma = 0.0;
    long solves_used = 0;
};

// Forward-solves the truth and adds white noise with standard deviation
// noise_fraction * max|F(u_truth)|. A zero noise fraction keeps the data
// noiseless and pins sigma to 1.
inline Synthesis synthesize(const ExperimentConfig& cfg) {
    Synthesis out;
    out.mesh = build_mesh(cfg);
    out.truth = build_truth(cfg, out.mesh);
    ForwardProblem fwd(out.mesh, cfg.bi, observation_mask(cfg, out.mesh));
    out.clean = fwd.observe(fwd.solve_forward(out.truth.coeffs));
    out.sigma = cfg.noise_fraction * out.clean.cwiseAbs().maxCoeff();
    out.data = out.clean;
    if (out.sigma > 0.0) {
        Xoshiro256 rng(derive_seed(cfg.seed, 0x6e6f697365ULL));  // noise stream
        for (int i = 0; i < out.data.size(); ++i) out.data[i] += out.sigma * rng.gaussian();
    } else {
        out.sigma = 1.0;
    }
    out.solves_used = fwd.solve_count();
    return out;
}

inline InverseProblem build_problem(const ExperimentConfig& cfg) {
    const Synthesis syn = synthesize(cfg);
    ForwardProblem fwd(syn.mesh, cfg.bi, observation_mask(cfg, syn.mesh));
    GaussianPrior prior(syn.mesh, cfg.prior_gamma, cfg.prior_delta,
                        cfg.prior_u0 == "zero"
                            ? Eigen::VectorXd::Zero(syn.mesh->num_nodes())
                            : load_field_csv(cfg.prior_u0, syn.mesh->num_nodes()));
    InverseProblem prob(std::move(fwd), std::move(prior), syn.data, syn.sigma);
    prob.u_truth = syn.truth.coeffs;
    return prob;
}

inline SketchDistribution config_distribution(const ExperimentConfig& cfg) {
    if (!cfg.sketch_kind) throw ConfigError("config: no sketch section present");
    switch (*cfg.sketch_kind) {
        case SketchKind::Gaussian: return SketchDistribution::gaussian();
        case SketchKind::Rademacher: return SketchDistribution::rademacher();
        case SketchKind::Achlioptas: return SketchDistribution::achlioptas();
        case SketchKind::Uniform: return SketchDistribution::uniform();
        case SketchKind::SparseSign: return SketchDistribution::sparse_sign(cfg.sketch_s);
    }
    throw std::logic_error("unreachable sketch kind");
}

inline SketchMatrix build_config_sketch(const ExperimentConfig& cfg, int data_dim,
                                        std::uint64_t trial = 0) {
    return build_sketch(config_distribution(cfg), cfg.sketch_n, data_dim,
                        derive_seed(derive_seed(cfg.seed, 0x736bULL), trial));
}

// ---------------------------------------------------------------------------
// report plumbing

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline json report_envelope(const ExperimentConfig& cfg, const std::string& command) {
    const json resolved = cfg.resolved();
    return {{"schema", 1},
            {"command", command},
            {"code_version", kVersion},
            {"config", resolved},
            {"config_hash", experiment_hash(resolved)},
            {"seed", cfg.seed},
            {"timestamp", iso_timestamp()}};
}

inline void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// commands; each returns the report JSON it wrote

inline json cmd_synthesize(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    const Synthesis syn = synthesize(cfg);

    ForwardProblem fwd(syn.mesh, cfg.bi, observation_mask(cfg, syn.mesh));
    const auto& nodes = fwd.observed_nodes();
    const std::string stamp = artifact_stamp(cfg);
    {
        std::ofstream f(dir / "data.csv");
        if (!f) throw std::runtime_error("cannot write data.csv");
        f << stamp << '\n';
        f << "obs,node,x,y,value\n";
        f.precision(17);
        for (std::size_t k = 0; k < nodes.size(); ++k)
            f << k << ',' << nodes[k] << ',' << syn.mesh->nodes(nodes[k], 0) << ','
              << syn.mesh->nodes(nodes[k], 1) << ',' << syn.data[k] << '\n';
    }
    syn.truth.write_csv((dir / "truth.csv").string(), stamp);
    syn.mesh->write_csv((dir / "nodes.csv").string(), (dir / "elements.csv").string(),
                        stamp);

    json meta = report_envelope(cfg, "synthesize");
    meta["data_hash"] = config_hash(cfg.data_determining());
    meta["result"] = {{"N", static_cast<int>(nodes.size())},
                      {"sigma", syn.sigma},
                      {"noiseless_max_abs", syn.clean.cwiseAbs().maxCoeff()},
                      {"pde_solves", syn.solves_used}};
    meta["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(meta, dir / "metadata.json");
    return meta;
}

inline json solve_summary(InverseProblem& prob, const SolveReport& rep,
                          const SketchMatrix* sketch) {
    const Eigen::VectorXd misfit =
        prob.data_whitened - prob.observable_whitened(rep.u_final);
    json result = rep.to_json();
    result["final_cost"] = rep.history.empty() ? 0.0 : rep.history.back().cost;
    result["tau"] = misfit.squaredNorm() / prob.data_dim();
    result["N"] = prob.data_dim();
    if (sketch) {
        result["tau_prime"] = sketch->apply(misfit).squaredNorm() / prob.data_dim();
        result["sketch"] = sketch->to_json();
    } else {
        result["sketch"] = nullptr;
    }
    return result;
}

inline json cmd_invert(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    InverseProblem prob = build_problem(cfg);
    std::optional<SketchMatrix> sketch;
    if (cfg.sketch_kind) sketch = build_config_sketch(cfg, prob.data_dim());
    SolveReport rep;
    if (sketch) {
        Objective obj(prob, *sketch);
        rep = minimize(obj, prob.prior.mean(), cfg.solver);
    } else {
        Objective obj(prob);
        rep = minimize(obj, prob.prior.mean(), cfg.solver);
    }

    const std::string stamp = artifact_stamp(cfg);
    rep.write_history_csv((dir / "history.csv").string(), stamp);
    Field(prob.forward.mesh_ptr(), rep.u_final).write_csv((dir / "u_map.csv").string(),
                                                          stamp);

    json report = report_envelope(cfg, "invert");
    report["result"] = solve_summary(prob, rep, sketch ? &*sketch : nullptr);
    report["result"].erase("history");  // history lives in the CSV
    report["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, dir / "report.json");
    return report;
}

// Full inversions across sketch sizes; n = 0 denotes the deterministic
// baseline. Trials run concurrently up to `jobs` with per-trial seeds, so
// results do not depend on scheduling.
inline json cmd_sweep(const ExperimentConfig& cfg, const std::vector<int>& n_list,
                      int trials, int jobs) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!cfg.sketch_kind)
        throw ConfigError("config: sweep needs a sketch section for the distribution");
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    struct Row {
        int n, trial;
        std::uint64_t seed;
        SolveReport rep;
        double tau, tau_prime;
    };
    std::vector<int> ns = n_list;
    if (ns.empty()) ns = {0, cfg.sketch_n};
    std::vector<Row> rows(ns.size() * trials);
    detail::parallel_trials(static_cast<int>(rows.size()), jobs, [&](int idx) {
        const int n = ns[idx / trials];
        const int trial = idx % trials;
        ExperimentConfig local = cfg;
        local.sketch_n = n;
        InverseProblem prob = build_problem(local);
        Row row;
        row.n = n;
        row.trial = trial;
        row.seed = derive_seed(derive_seed(cfg.seed, 0x736bULL),
                               static_cast<std::uint64_t>(idx));
        if (n == 0) {
            Objective obj(prob);
            row.rep = minimize(obj, prob.prior.mean(), cfg.solver);
            const Eigen::VectorXd misfit =
                prob.data_whitened - prob.observable_whitened(row.rep.u_final);
            row.tau = misfit.squaredNorm() / prob.data_dim();
            row.tau_prime = row.tau;
        } else {
            const SketchMatrix sk = build_config_sketch(local, prob.data_dim(),
                                                        static_cast<std::uint64_t>(idx));
            Objective obj(prob, sk);
            row.rep = minimize(obj, prob.prior.mean(), cfg.solver);
            const Eigen::VectorXd misfit =
                prob.data_whitened - prob.observable_whitened(row.rep.u_final);
            row.tau = misfit.squaredNorm() / prob.data_dim();
            row.tau_prime = sk.apply(misfit).squaredNorm() / prob.data_dim();
        }
        rows[idx] = std::move(row);
    });

    {
        std::ofstream f(dir / "sweep.csv");
        if (!f) throw std::runtime_error("cannot write sweep.csv");
        f << artifact_stamp(cfg) << '\n';
        f << "n,trial,seed,dist,pde_solves,newton_iters,cg_iters,cost,grad_norm,"
             "converged,reason,tau,tau_prime\n";
        f.precision(17);
        for (const auto& r : rows) {
            const auto& h = r.rep.history;
            f << r.n << ',' << r.trial << ',' << r.seed << ','
              << (r.n == 0 ? "none" : to_string(*cfg.sketch_kind)) << ','
              << r.rep.pde_solves << ',' << r.rep.newton_iters << ','
              << r.rep.cg_iters_total << ',' << (h.empty() ? 0.0 : h.back().cost) << ','
              << (h.empty() ? 0.0 : h.back().grad_norm) << ','
              << (r.rep.converged ? 1 : 0) << ',' << r.rep.reason << ',' << r.tau << ','
              << r.tau_prime << '\n';
        }
    }

    json means = json::array();
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        double solves = 0.0, tau = 0.0, tau_prime = 0.0;
        for (int t = 0; t < trials; ++t) {
            const auto& r = rows[ni * trials + t];
            solves += double(r.rep.pde_solves) / trials;
            tau += r.tau / trials;
            tau_prime += r.tau_prime / trials;
        }
        means.push_back({{"n", ns[ni]},
                         {"mean_pde_solves", solves},
                         {"mean_tau", tau},
                         {"mean_tau_prime", tau_prime}});
    }
    json report = report_envelope(cfg, "sweep");
    report["result"] = {{"trials", trials}, {"per_n", means}};
    report["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, dir / "report.json");
    return report;
}

// Statistical Morozov verification; n <= 0 triggers the pilot bisection
// toward trial-mean tau' = 1.
inline json cmd_morozov(const ExperimentConfig& cfg, int n, int trials, int jobs) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!cfg.sketch_kind)
        throw ConfigError("config: morozov needs a sketch section for the distribution");
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    const SketchDistribution dist = config_distribution(cfg);
    auto factory = [&cfg]() { return build_problem(cfg); };
    bool tuned = false;
    if (n <= 0) {
        n = tune_morozov_n(factory, dist, cfg.epsilon, 6, derive_seed(cfg.seed, 0x70ULL),
                           cfg.solver, 10, 400, jobs);
        tuned = true;
    }
    const MorozovSummary summary = morozov_verify(factory, dist, n, cfg.epsilon, trials,
                                                  derive_seed(cfg.seed, 0x6dULL),
                                                  cfg.solver, jobs);
    summary.write_csv((dir / "table_morozov.csv").string(), artifact_stamp(cfg));

    json report = report_envelope(cfg, "morozov");
    report["result"] = {{"n", n},
                        {"n_tuned_by_pilot", tuned},
                        {"epsilon", cfg.epsilon},
                        {"trials", trials},
                        {"p", summary.p},
                        {"success_rate", summary.success_rate},
                        {"mean_tau_prime", summary.mean_tau_prime}};
    report["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, dir / "report.json");
    return report;
}

// Spectra of the prior-preconditioned Gauss-Newton misfit Hessian at a
// random prior draw: the full operator next to sketched ones.
inline json cmd_spectrum(const ExperimentConfig& cfg, const std::vector<int>& n_list) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    std::vector<int> ns = n_list;
    if (ns.empty()) ns = {30, 50, 100};
    InverseProblem prob = build_problem(cfg);
    const Eigen::VectorXd u_draw =
        prob.prior.sample(derive_seed(cfg.seed, 0x64726177ULL)).coeffs;
    const int m = prob.param_dim();

    Objective full(prob);
    std::vector<Eigen::VectorXd> spectra;
    spectra.push_back(full.misfit_hessian_spectrum(u_draw, m));
    const SketchDistribution dist = cfg.sketch_kind ? config_distribution(cfg)
                                                     : SketchDistribution::achlioptas();
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const auto sk = build_sketch(dist, ns[i], prob.data_dim(),
                                     derive_seed(cfg.seed, 0x730000ULL + i));
        Objective sketched(prob, sk);
        spectra.push_back(sketched.misfit_hessian_spectrum(u_draw, m));
    }

    {
        std::ofstream f(dir / "spectrum.csv");
        if (!f) throw std::runtime_error("cannot write spectrum.csv");
        f << artifact_stamp(cfg) << '\n';
        f << "index,full";
        for (int n : ns) f << ",n_" << n;
        f << '\n';
        f.precision(17);
        for (int i = 0; i < m; ++i) {
            f << i;
            for (const auto& s : spectra) f << ',' << s[i];
            f << '\n';
        }
    }

    json counts = json::array();
    for (std::size_t si = 0; si < spectra.size(); ++si) {
        int above_one = 0;
        for (int i = 0; i < m; ++i)
            if (spectra[si][i] > 1.0) ++above_one;
        counts.push_back({{"series", si == 0 ? json("full") : json(ns[si - 1])},
                          {"rank_above_one", above_one},
                          {"lambda_max", spectra[si][0]}});
    }
    json report = report_envelope(cfg, "spectrum");
    report["result"] = {{"param_dim", m}, {"series", counts}};
    report["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, dir / "report.json");
    return report;
}

// Empirical distortion tail rates for the whitened misfit at the prior mean,
// against the exp(-n eps^2 / 8) reporting convention.
inline json cmd_jltest(const ExperimentConfig& cfg, const std::vector<int>& n_list,
                       int trials) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    std::vector<int> ns = n_list;
    if (ns.empty()) ns = {25, 50, 100, 200};
    InverseProblem prob = build_problem(cfg);
    Objective obj(prob);
    const Eigen::VectorXd v = obj.misfit_vector(prob.prior.mean());

    const std::vector<SketchDistribution> dists = {
        SketchDistribution::gaussian(),        SketchDistribution::rademacher(),
        SketchDistribution::achlioptas(),      SketchDistribution::sparse_sign(20.0),
        SketchDistribution::sparse_sign(100.0), SketchDistribution::uniform()};

    std::ofstream f(dir / "jltest.csv");
    if (!f) throw std::runtime_error("cannot write jltest.csv");
    f << artifact_stamp(cfg) << '\n';
    f << "dist,s,n,epsilon,trials,violations,violation_rate,bound\n";
    f.precision(17);
    json result = json::array();
    std::uint64_t stream = derive_seed(cfg.seed, 0x6a6cULL);
    for (const auto& dist : dists) {
        for (int n : ns) {
            int violations = 0;
            for (int t = 0; t < trials; ++t) {
                const auto sk = build_sketch(dist, n, prob.data_dim(), stream++);
                if (std::abs(distortion(sk, v)) > cfg.epsilon) ++violations;
            }
            const double rate = double(violations) / trials;
            const double bound = failure_probability(n, cfg.epsilon);
            f << to_string(dist.kind) << ',' << dist.sparsity_s << ',' << n << ','
              << cfg.epsilon << ',' << trials << ',' << violations << ',' << rate << ','
              << bound << '\n';
            result.push_back({{"dist", to_string(dist.kind)},
                              {"s", dist.sparsity_s},
                              {"n", n},
                              {"violation_rate", rate},
                              {"bound", bound}});
        }
    }

    json report = report_envelope(cfg, "jltest");
    report["result"] = {{"trials", trials}, {"epsilon", cfg.epsilon}, {"rows", result}};
    report["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, dir / "report.json");
    return report;
}

}  // namespace rma
