// Copyright 2026 The gmecert Authors
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

// End-to-end tests of the command-line tool plus the pipeline helpers.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace gmecert;
using namespace gmecert::pipeline;

namespace {

const fs::path kGolden = GMECERT_GOLDEN_DIR;

struct CliResult {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gmecert_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CliResult cli(const std::string& args) {
  const fs::path err = fs::temp_directory_path() / ("gmecert_cli_" + std::to_string(::getpid()) + ".stderr");
  const std::string cmd = std::string(GMECERT_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file " << p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  const std::string s = slurp(p);
  return s.substr(0, s.find('\n'));
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  return n;
}

// Four-qubit config with the given analyses.
fs::path small_config(const fs::path& dir, const std::string& analyses, const std::string& extra = "") {
  const fs::path p = dir / "config.json";
  write_text(p, R"({"coupling": {"num_qubits": 4, "j0": 0.17}, "times_ms": [0.0, 1.0], "shots": 100,
                    "master_seed": 3, "analyses": )" +
                    analyses + extra + "}");
  return p;
}

}  // namespace

TEST_CASE("magnetization-only run on a Neel chain writes one CSV with alternating signs") {
  const fs::path dir = scratch("mag");
  write_text(dir / "c.json", R"({"coupling": {"num_qubits": 4}, "times_ms": [0], "analyses": ["magnetization"]})");
  const CliResult r = cli("--config " + (dir / "c.json").string() + " --out " + (dir / "out").string() + " run");
  REQUIRE(r.code == 0);
  CHECK(count_files(dir / "out", ".csv") == 1);
  CHECK(count_files(dir / "out" / "counts", ".jsonl") == 1);
  const auto rows = lines_of(dir / "out" / "magnetization.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "t_ms,site,z_expectation,data,std_error");
  CHECK(rows[1] == "0,1,1,1,0");
  CHECK(rows[2] == "0,2,-1,-1,0");
  CHECK(rows[3] == "0,3,1,1,0");
  CHECK(rows[4] == "0,4,-1,-1,0");
}

TEST_CASE("golden files: counts, magnetization and manifest are stable") {
  const fs::path dir = scratch("golden");
  const CliResult r =
      cli("--config " + (kGolden / "n4_config.json").string() + " --out " + (dir / "out").string() + " run");
  REQUIRE(r.code == 0);
  for (const char* f : {"counts/t_0.000ms.jsonl", "counts/t_1.000ms.jsonl", "magnetization.csv"})
    CHECK_MESSAGE(slurp(dir / "out" / f) == slurp(kGolden / "n4_run" / f), f);
  nlohmann::json m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m.at("versions").contains("gmecert"));
  CHECK(m.at("versions").contains("eigen"));
  m.erase("versions");
  CHECK(m == nlohmann::json::parse(slurp(kGolden / "n4_run" / "manifest_without_versions.json")));
}

TEST_CASE("reruns with the same seed give byte-identical counts; thread count does not matter") {
  const fs::path dir = scratch("det");
  const fs::path cfg = small_config(dir, R"(["magnetization"])");
  REQUIRE(cli("--config " + cfg.string() + " --out " + (dir / "a").string() + " sample").code == 0);
  REQUIRE(cli("--config " + cfg.string() + " --out " + (dir / "b").string() + " --threads 3 sample").code == 0);
  REQUIRE(cli("--config " + cfg.string() + " --out " + (dir / "c").string() + " --seed 4 sample").code == 0);
  for (const char* f : {"t_0.000ms.jsonl", "t_1.000ms.jsonl"}) {
    CHECK(slurp(dir / "a" / "counts" / f) == slurp(dir / "b" / "counts" / f));
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  }
  CHECK(slurp(dir / "a" / "counts" / "t_1.000ms.jsonl") != slurp(dir / "c" / "counts" / "t_1.000ms.jsonl"));
}

TEST_CASE("full preset run: file accounting, shared marginals and deterministic analyses") {
  const fs::path dir = scratch("full");
  const CliResult r = cli("--out " + (dir / "out").string() + " --dump-marginals run");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const fs::path out = dir / "out";
  CHECK(count_files(out / "counts", ".jsonl") == 8);
  CHECK(count_files(out, ".csv") == 4);
  CHECK(first_line(out / "magnetization.csv") == "t_ms,site,z_expectation,data,std_error");
  CHECK(first_line(out / "pair_negativity.csv") == "t_ms,site_i,site_j,negativity,std_error");
  CHECK(first_line(out / "bell_fidelity.csv") == "t_ms,k,group_start,value,std_error,threshold,detected");
  CHECK(first_line(out / "witness.csv") == "t_ms,k,group_start,S,std_error,source");
  // 8 times x 8 sites; 8 x 7 pairs; 8 x (7 + 6) groups; 3 rows per witness.
  CHECK(lines_of(out / "magnetization.csv").size() == 1 + 64);
  CHECK(lines_of(out / "pair_negativity.csv").size() == 1 + 56);
  CHECK(lines_of(out / "bell_fidelity.csv").size() == 1 + 104);
  CHECK(lines_of(out / "witness.csv").size() == 1 + 3 * 104);
  CHECK(count_files(out / "witnesses", ".json") == 104);

  // Bell and GMN analyses must read the very same marginal estimates.
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(out / "marginals" / "bell")) {
    const fs::path twin = out / "marginals" / "gmn" / e.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(slurp(e.path()) == slurp(twin));
    ++compared;
  }
  CHECK(compared == 104);

  const nlohmann::json m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m.at("status") == "ok");
  CHECK(m.at("config_hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(m.at("outputs").size() == 8 + 4 + 104);
  CHECK_FALSE(fs::exists(out / "FAILED"));

  // Re-analysis of the stored counts reproduces every CSV byte for byte.
  const CliResult again =
      cli("--out " + (dir / "re").string() + " --threads 2 analyze --counts " + (out / "counts").string());
  REQUIRE_MESSAGE(again.code == 0, again.err);
  for (const char* f : {"magnetization.csv", "pair_negativity.csv", "bell_fidelity.csv", "witness.csv"})
    CHECK_MESSAGE(slurp(out / f) == slurp(dir / "re" / f), f);
}

TEST_CASE("counts from a foreign generator with the same schema are accepted") {
  const fs::path dir = scratch("foreign");
  fs::create_directories(dir / "counts");
  // Different key order, whitespace, no label field; every shot reads 1010.
  std::ostringstream text;
  for (const AxisLabel& l : all_axis_labels()) {
    const MeasurementSetting s = scheme_setting(4, l);
    text << "{ \"shots\": 20, \"counts\": { \"1010\": 20 }, \"axes\": [";
    for (int q = 0; q < 4; ++q) text << (q ? ", " : "") << '"' << to_char(s.axes[static_cast<std::size_t>(q)]) << '"';
    text << "] }\n";
  }
  write_text(dir / "counts" / "t_0.000ms.jsonl", text.str());
  const fs::path cfg = small_config(dir, R"(["magnetization", "bell"])");
  const CliResult r =
      cli("--config " + cfg.string() + " --out " + (dir / "out").string() + " analyze --counts " +
          (dir / "counts").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines_of(dir / "out" / "magnetization.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[1] == "0,1,1,1,0");
  CHECK(rows[2] == "0,2,-1,-1,0");
  CHECK(fs::exists(dir / "out" / "bell_fidelity.csv"));
}

TEST_CASE("schema violations are reported with file name and line number") {
  const fs::path dir = scratch("schema");
  const fs::path cfg = small_config(dir, R"(["magnetization"])");
  REQUIRE(cli("--config " + cfg.string() + " --out " + (dir / "a").string() + " sample").code == 0);
  const fs::path f = dir / "a" / "counts" / "t_1.000ms.jsonl";
  auto rows = lines_of(f);
  rows[4] = R"({"axes": ["X", "X", "X", "X"], "shots": 10})";
  std::string text;
  for (const auto& l : rows) text += l + "\n";
  write_text(f, text);
  const CliResult r =
      cli("--config " + cfg.string() + " --out " + (dir / "b").string() + " analyze --counts " +
          (dir / "a" / "counts").string());
  CHECK(r.code == 3);
  CHECK(r.err.find("t_1.000ms.jsonl") != std::string::npos);
  CHECK(r.err.find("line 5") != std::string::npos);
  CHECK(r.err.find("counts") != std::string::npos);
  const nlohmann::json m = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
  CHECK(m.at("status") == "failed");
  CHECK(m.at("failed_stage") == "read_counts");
}

TEST_CASE("a missing setting names the group and the absent label; earlier outputs are kept") {
  const fs::path dir = scratch("missing");
  const fs::path cfg = small_config(dir, R"(["magnetization", "bell"])");
  REQUIRE(cli("--config " + cfg.string() + " --out " + (dir / "a").string() + " sample").code == 0);
  const fs::path f = dir / "a" / "counts" / "t_0.000ms.jsonl";
  std::string text;
  for (const auto& l : lines_of(f))
    if (l.find(R"("label":["Y","Z","X"])") == std::string::npos) text += l + "\n";
  REQUIRE(text.size() < slurp(f).size());
  write_text(f, text);
  const fs::path out = dir / "b";
  const CliResult r =
      cli("--config " + cfg.string() + " --out " + out.string() + " analyze --counts " + (dir / "a" / "counts").string());
  CHECK(r.code == 3);
  CHECK(r.err.find("{1,2,3}") != std::string::npos);
  CHECK(r.err.find("YZX") != std::string::npos);
  CHECK(fs::exists(out / "magnetization.csv"));
  CHECK_FALSE(fs::exists(out / "bell_fidelity.csv"));
  REQUIRE(fs::exists(out / "FAILED"));
  CHECK(slurp(out / "FAILED").rfind("bell:", 0) == 0);
  const nlohmann::json m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m.at("status") == "failed");
  CHECK(m.at("failed_stage") == "bell");
  CHECK(m.at("outputs") == nlohmann::json::array({"magnetization.csv"}));
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path dir = scratch("config");
  const auto run_with = [&](const std::string& json) {
    write_text(dir / "bad.json", json);
    return cli("--config " + (dir / "bad.json").string() + " --out " + (dir / "out").string() + " simulate");
  };
  CHECK(run_with(R"({"times_ms": [1.0, 0.5]})").code == 2);
  CHECK(run_with(R"({"times_ms": [0.0, 0.0]})").code == 2);
  CHECK(run_with(R"({"shots": 0})").code == 2);
  CHECK(run_with(R"({"k_list": [6]})").code == 2);
  CHECK(run_with(R"({"analyses": ["spectroscopy"]})").code == 2);
  CHECK(run_with(R"({"time_step": 0.5})").code == 2);
  CHECK(run_with(R"({"initial_model": {"kind": "flip", "f_ideal": 0.5, "f_single": 0.1, "f_multi": 0.1}})").code == 2);
  CHECK(run_with("{ not json").code == 2);
  CHECK(cli("--config " + (dir / "absent.json").string() + " simulate").code == 2);
  CHECK(cli("--analyses magnetization,tea simulate").code == 2);
  CHECK(cli("--threads 0 simulate").code == 2);
  CHECK(cli("frobnicate").code == 2);
  const CliResult r = run_with(R"({"k_list": [6]})");
  CHECK(r.err.find("stage config") != std::string::npos);
}

TEST_CASE("simulate writes model magnetization; initial-state tables are read relative to the config") {
  const fs::path dir = scratch("simulate");
  write_text(dir / "init.json", R"({"components": [{"bits": "1010", "weight": 0.75}, {"bits": "1001", "weight": 0.25}]})");
  write_text(dir / "c.json", R"({"coupling": {"num_qubits": 4, "centre_edge_ratio": 1.25}, "times_ms": [0],
                                 "initial_model": {"kind": "table", "path": "init.json"}})");
  const CliResult r = cli("--config " + (dir / "c.json").string() + " --out " + (dir / "out").string() + " simulate");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines_of(dir / "out" / "magnetization_model.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "t_ms,site,z_expectation");
  CHECK(rows[3] == "0,3,0.5");
  CHECK(rows[4] == "0,4,-0.5");
}

TEST_CASE("export-sdpa writes the problem and a sidecar with a certified optimum") {
  const fs::path dir = scratch("export");
  const CliResult r = cli("--out " + dir.string() + " export-sdpa --problem gmn --state ghz --k 3");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const nlohmann::json meta = nlohmann::json::parse(slurp(dir / "gmn_k3.json"));
  CHECK(meta.at("optimal_value").get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(meta.at("duality_gap").get<double>() <= 1e-7);
  const std::string sdpa = slurp(dir / "gmn_k3.dat-s");
  CHECK(sdpa.rfind("\"", 0) == 0);
  CHECK(cli("--out " + dir.string() + " export-sdpa --problem lp").code == 2);
  CHECK(cli("--out " + dir.string() + " export-sdpa --state model --k 3 --group-start 7").code == 2);
}

TEST_CASE("pipeline helpers: file names, analysis lists, error categories") {
  CHECK(counts_file_name(0.5) == "t_0.500ms.jsonl");
  CHECK(counts_file_time("t_3.500ms.jsonl") == doctest::Approx(3.5));
  CHECK_FALSE(counts_file_time("notes.txt").has_value());
  CHECK(parse_analyses(" bell, gmn ") == std::set<std::string>{"bell", "gmn"});
  CHECK_THROWS_AS(parse_analyses("bell,xyz"), ConfigError);

  const auto category = [](auto thrower) {
    try {
      in_stage("s", thrower);
    } catch (const StageError& e) {
      CHECK(e.stage() == "s");
      return exit_code(e.category());
    }
    return 0;
  };
  CHECK(category([] { throw ConfigError("c"); }) == 2);
  CHECK(category([] { throw AnalysisError("a"); }) == 3);
  CHECK(category([] { throw SchemaError("x", 3); }) == 3);
  CHECK(category([] { throw SolverError("s"); }) == 4);

  ExperimentConfig c = ExperimentConfig::preset();
  CHECK(c.coupling.num_qubits == 8);
  CHECK(c.shots == 1000);
  CHECK(c.times_ms.size() == 8);
  CHECK(c.times_ms.back() == doctest::Approx(3.5));
  const ExperimentConfig round = ExperimentConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());
  CHECK(config_hash(round) == config_hash(c));
  c.master_seed = 2;
  CHECK(config_hash(round) != config_hash(c));
}
