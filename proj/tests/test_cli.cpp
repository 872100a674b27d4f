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

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "rma/experiment.hpp"

using namespace rma;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("rma_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string first_non_comment_line(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::string line;
    while (std::getline(f, line))
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json base_config_1d(const fs::path& out) {
    return {{"schema", 1},
            {"problem", {{"dim", 1}, {"resolution", {96}}, {"bi", 0.1}}},
            {"truth", {{"type", "sinusoid"}, {"amplitude", 1.0}, {"periods", 1.0}}},
            {"noise_fraction", 0.01},
            {"prior", {{"gamma", 0.1}, {"delta", 1.0}}},
            {"sketch", {{"kind", "achlioptas"}, {"n", 30}}},
            {"seed", 42},
            {"output_dir", out.string()}};
}

json scrub_timestamps(json j) {
    j.erase("timestamp");
    j.erase("wall_time_sec");
    if (j.contains("result") && j.at("result").contains("wall_time_sec"))
        j["result"].erase("wall_time_sec");
    return j;
}

int run_cli(const std::string& args, const fs::path& out_file, const fs::path& err_file) {
    const char* cli = std::getenv("RMA_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = std::string(cli) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config validation rejects malformed inputs") {
    const fs::path out = fresh_dir("validate");
    json good = base_config_1d(out);
    CHECK_NOTHROW(parse_config(good));

    json j = good;
    j["schema"] = 2;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j.erase("schema");
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["problem"]["dim"] = 3;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["problem"]["resolution"] = {16, 16};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["truth"]["type"] = "staircase";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["truth"] = {{"type", "gaussian-blob"}};  // blob truth on a 1D problem
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["noise_fraction"] = -0.5;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["prior"]["gamma"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["sketch"]["n"] = 0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["epsilon"] = 1.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = good;
    j["problem"]["observation"] = "corners";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("zero noise keeps the data noiseless") {
    const fs::path out = fresh_dir("noiseless");
    json j = base_config_1d(out);
    j["noise_fraction"] = 0.0;
    const ExperimentConfig cfg = parse_config(j);
    const Synthesis syn = synthesize(cfg);
    CHECK(syn.data == syn.clean);
    CHECK(syn.sigma == 1.0);
}

TEST_CASE("1D sinusoid at 1024 cells emits N = 1025 observations") {
    const fs::path out = fresh_dir("n1025");
    json j = base_config_1d(out);
    j["problem"]["resolution"] = {1024};
    const json meta = cmd_synthesize(parse_config(j));
    CHECK(meta.at("result").at("N") == 1025);

    CHECK(first_non_comment_line(out / "data.csv") == "obs,node,x,y,value");
    int rows = 0;
    std::ifstream f(out / "data.csv");
    std::string line;
    std::getline(f, line);  // stamp
    std::getline(f, line);  // header
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1025);
}

TEST_CASE("synthesize is byte-reproducible for a fixed seed") {
    const fs::path out_a = fresh_dir("repro_a");
    const fs::path out_b = fresh_dir("repro_b");
    json ja = base_config_1d(out_a);
    json jb = base_config_1d(out_b);
    cmd_synthesize(parse_config(ja));
    cmd_synthesize(parse_config(jb));
    CHECK(slurp(out_a / "data.csv") == slurp(out_b / "data.csv"));
    CHECK(slurp(out_a / "truth.csv") == slurp(out_b / "truth.csv"));
    CHECK(slurp(out_a / "nodes.csv") == slurp(out_b / "nodes.csv"));

    // different seed moves the noise
    jb["seed"] = 43;
    jb["output_dir"] = (out_b / "v2").string();
    cmd_synthesize(parse_config(jb));
    CHECK(slurp(out_a / "data.csv") != slurp(out_b / "v2" / "data.csv"));
}

TEST_CASE("invert rerun is identical except timestamps") {
    const fs::path out_a = fresh_dir("invert_a");
    const fs::path out_b = fresh_dir("invert_b");
    json ja = base_config_1d(out_a);
    json jb = base_config_1d(out_b);
    const json ra = cmd_invert(parse_config(ja));
    const json rb = cmd_invert(parse_config(jb));

    json sa = scrub_timestamps(ra);
    json sb = scrub_timestamps(rb);
    sa["config"].erase("output_dir");
    sb["config"].erase("output_dir");
    CHECK(sa == sb);  // the hash excludes output_dir, so it matches too
    CHECK(slurp(out_a / "history.csv") == slurp(out_b / "history.csv"));
    CHECK(slurp(out_a / "u_map.csv") == slurp(out_b / "u_map.csv"));

    CHECK(ra.at("result").at("pde_solves").get<long>() > 0);
    CHECK(ra.at("result").contains("tau"));
    CHECK(ra.at("result").at("sketch").at("n") == 30);
    CHECK(ra.at("code_version") == kVersion);
}

TEST_CASE("sketched inversion beats the deterministic baseline on the 2D config") {
    const fs::path out = fresh_dir("reduction");
    json j = {{"schema", 1},
              {"problem", {{"dim", 2}, {"resolution", {36, 35}}, {"bi", 0.1}}},
              {"truth", {{"type", "gaussian-blob"}}},
              {"noise_fraction", 0.001},
              {"prior", {{"gamma", 0.02}, {"delta", 8.0}}},
              {"solver", {{"max_newton", 15}}},
              {"seed", 42},
              {"output_dir", (out / "full").string()}};
    const json full = cmd_invert(parse_config(j));

    j["sketch"] = {{"kind", "achlioptas"}, {"n", 50}};
    j["output_dir"] = (out / "rma").string();
    const json rma = cmd_invert(parse_config(j));

    const long solves_full = full.at("result").at("pde_solves").get<long>();
    const long solves_rma = rma.at("result").at("pde_solves").get<long>();
    INFO("full " << solves_full << " rma " << solves_rma);
    CHECK(solves_rma < solves_full);
}

TEST_CASE("spectrum command caps the sketched rank at n") {
    const fs::path out = fresh_dir("spectrum");
    json j = {{"schema", 1},
              {"problem", {{"dim", 2}, {"resolution", {12, 12}}, {"bi", 0.1}}},
              {"truth", {{"type", "gaussian-blob"}}},
              {"noise_fraction", 0.001},
              {"prior", {{"gamma", 0.4}, {"delta", 4.0}}},
              {"seed", 7},
              {"output_dir", out.string()}};
    const json report = cmd_spectrum(parse_config(j), {10, 20});

    const int m = report.at("result").at("param_dim").get<int>();
    CHECK(m == 169);
    const auto series = report.at("result").at("series");
    REQUIRE(series.size() == 3);
    CHECK(series[1].at("rank_above_one").get<int>() <= 10);
    CHECK(series[2].at("rank_above_one").get<int>() <= 20);

    CHECK(first_non_comment_line(out / "spectrum.csv") == "index,full,n_10,n_20");
    std::ifstream f(out / "spectrum.csv");
    int rows = 0;
    std::string line;
    std::getline(f, line);  // stamp
    std::getline(f, line);  // header
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == m);
}

TEST_CASE("jltest emits tail rates below the reporting bound") {
    const fs::path out = fresh_dir("jltest");
    json j = base_config_1d(out);
    const json report = cmd_jltest(parse_config(j), {25, 100}, 400);
    const auto rows = report.at("result").at("rows");
    REQUIRE(rows.size() == 12);  // six distributions, two sizes
    for (const auto& row : rows) {
        const double rate = row.at("violation_rate").get<double>();
        const double bound = row.at("bound").get<double>();
        INFO(row.dump());
        CHECK(rate <= 1.5 * bound + 0.01);
    }
    CHECK(fs::exists(out / "jltest.csv"));
    std::ifstream f(out / "jltest.csv");
    std::string stamp;
    std::getline(f, stamp);
    CHECK(stamp.rfind("# code_version=", 0) == 0);
    CHECK(stamp.find("config_hash=") != std::string::npos);
    CHECK(stamp.find("seed=") != std::string::npos);
}

TEST_CASE("morozov command writes consistent records") {
    const fs::path out = fresh_dir("morozov");
    json j = base_config_1d(out);
    j["problem"]["resolution"] = {160};
    j["sketch"] = {{"kind", "achlioptas"}, {"n", 40}};
    const json report = cmd_morozov(parse_config(j), 40, 8, 2);
    CHECK(report.at("result").at("n") == 40);
    CHECK(report.at("result").at("trials") == 8);
    const double rate = report.at("result").at("success_rate").get<double>();
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);

    CHECK(first_non_comment_line(out / "table_morozov.csv") ==
          "trial,N,n,Jn_misfit,tau_prime,range_lo,range_hi,p,J_misfit,tau,success");
    std::ifstream f(out / "table_morozov.csv");
    int rows = 0;
    std::string line;
    std::getline(f, line);  // stamp
    std::getline(f, line);  // header
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);
}

TEST_CASE("sweep aggregates per-n means") {
    const fs::path out = fresh_dir("sweep");
    json j = base_config_1d(out);
    j["problem"]["resolution"] = {96};
    const json report = cmd_sweep(parse_config(j), {0, 20}, 3, 2);
    const auto per_n = report.at("result").at("per_n");
    REQUIRE(per_n.size() == 2);
    CHECK(per_n[0].at("n") == 0);
    CHECK(per_n[1].at("n") == 20);
    CHECK(per_n[0].at("mean_pde_solves").get<double>() > 0.0);

    std::ifstream f(out / "sweep.csv");
    std::string line;
    std::getline(f, line);  // stamp
    std::getline(f, line);  // header
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
}

TEST_CASE("cli binary reports machine-readable errors") {
    const fs::path dir = fresh_dir("binary");
    const fs::path stdout_file = dir / "out.txt";
    const fs::path stderr_file = dir / "err.txt";

    SECTION("missing config file") {
        const int code = run_cli("invert --config /nonexistent/cfg.json",
                                 stdout_file, stderr_file);
        CHECK(code == 2);
        const json err = json::parse(slurp(stderr_file));
        CHECK(err.at("error").at("type") == "config");
    }
    SECTION("schema violation") {
        const fs::path bad = dir / "bad.json";
        std::ofstream(bad) << R"({"schema": 9, "problem": {}, "truth": {}, "prior": {}})";
        const int code = run_cli("invert --config " + bad.string(), stdout_file,
                                 stderr_file);
        CHECK(code == 2);
        const json err = json::parse(slurp(stderr_file));
        CHECK(err.at("error").at("type") == "config");
    }
    SECTION("successful run prints the report") {
        const fs::path cfg_path = dir / "ok.json";
        json j = base_config_1d(dir / "run");
        std::ofstream(cfg_path) << j.dump();
        const int code = run_cli("invert --config " + cfg_path.string() + " --n 10",
                                 stdout_file, stderr_file);
        CHECK(code == 0);
        const json report = json::parse(slurp(stdout_file));
        CHECK(report.at("command") == "invert");
        CHECK(report.at("result").at("sketch").at("n") == 10);
    }
}
