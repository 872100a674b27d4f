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

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rma/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> dist;
    std::optional<double> sparsity;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config JSON")->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--out", flags.out, "override the output directory");
    cmd->add_option("--dist", flags.dist,
                    "sketch distribution: gaussian|rademacher|achlioptas|sparse_sign|uniform");
    cmd->add_option("--s", flags.sparsity, "sparsity parameter for sparse_sign");
}

rma::ExperimentConfig resolve(const CommonFlags& flags, std::optional<int> n_override) {
    rma::ExperimentConfig cfg = rma::load_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.dist) {
        cfg.sketch_kind = rma::sketch_kind_from_string(*flags.dist);
        if (flags.sparsity) cfg.sketch_s = *flags.sparsity;
        if (cfg.sketch_n < 1) cfg.sketch_n = 50;
    }
    if (n_override && *n_override > 0) {
        cfg.sketch_n = *n_override;
        if (!cfg.sketch_kind) cfg.sketch_kind = rma::SketchKind::Achlioptas;
    }
    return cfg;
}

void emit_error(const char* type, const std::string& message) {
    nlohmann::json err = {{"error", {{"type", type}, {"message", message}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"randomized misfit inversion experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::optional<int> n_single;
    std::vector<int> n_list;
    int trials = 10;
    int jobs = 1;

    auto* synth = app.add_subcommand("synthesize", "generate noisy observations");
    add_common(synth, flags);

    auto* invert = app.add_subcommand("invert", "run one inversion");
    add_common(invert, flags);
    invert->add_option("--n", n_single, "sketch size (0 disables sketching)");

    auto* sweep = app.add_subcommand("sweep", "inversions across sketch sizes");
    add_common(sweep, flags);
    sweep->add_option("--n", n_list, "sketch sizes; 0 is the deterministic baseline");
    sweep->add_option("--trials", trials, "trials per sketch size");
    sweep->add_option("--jobs", jobs, "concurrent trials");

    auto* morozov = app.add_subcommand("morozov", "statistical discrepancy verification");
    add_common(morozov, flags);
    morozov->add_option("--n", n_single, "sketch size; omit to tune by pilot runs");
    morozov->add_option("--trials", trials, "number of inversions");
    morozov->add_option("--jobs", jobs, "concurrent trials");

    auto* spectrum = app.add_subcommand("spectrum", "misfit Hessian spectra");
    add_common(spectrum, flags);
    spectrum->add_option("--n", n_list, "sketch sizes");

    auto* jltest = app.add_subcommand("jltest", "distortion tail rates");
    add_common(jltest, flags);
    jltest->add_option("--n", n_list, "sketch sizes");
    jltest->add_option("--trials", trials, "sketches per (distribution, n)");

    CLI11_PARSE(app, argc, argv);

    try {
        rma::ExperimentConfig cfg = resolve(flags, n_single);
        nlohmann::json report;
        if (synth->parsed()) {
            report = rma::cmd_synthesize(cfg);
        } else if (invert->parsed()) {
            if (n_single && *n_single == 0) cfg.sketch_kind.reset();
            report = rma::cmd_invert(cfg);
        } else if (sweep->parsed()) {
            report = rma::cmd_sweep(cfg, n_list, trials, jobs);
        } else if (morozov->parsed()) {
            report = rma::cmd_morozov(cfg, n_single.value_or(0), trials, jobs);
        } else if (spectrum->parsed()) {
            report = rma::cmd_spectrum(cfg, n_list);
        } else if (jltest->parsed()) {
            report = rma::cmd_jltest(cfg, n_list, trials);
        }
        std::printf("%s\n", report.dump(2).c_str());
        return 0;
    } catch (const rma::ConfigError& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        emit_error("invalid_argument", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return 1;
    }
}
