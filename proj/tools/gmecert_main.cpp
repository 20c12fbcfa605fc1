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

// Command-line front end: simulate, sample, analyze, run, export-sdpa.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gmecert/gmn.hpp"
#include "gmecert/sdp.hpp"
#include "gmecert/state.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace gmecert;
using namespace gmecert::pipeline;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "gmecert_out";
  std::optional<std::string> analyses;
  int threads = 1;
  bool dump_marginals = false;
};

struct ExportOptions {
  std::string problem = "gmn";
  std::string state = "model";
  int k = 3;
  double time_ms = 0.0;
  int group_start = 1;
};

ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig::preset() : ExperimentConfig::load(g.config_path);
  if (g.seed) c.master_seed = *g.seed;
  if (g.analyses) c.analyses = parse_analyses(*g.analyses);
  c.validate();
  return c;
}

std::string model_magnetization_csv(const ExperimentConfig& c, const std::vector<MixedState>& models) {
  std::ostringstream csv;
  csv.precision(10);
  csv << "t_ms,site,z_expectation\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::vector<double> m = models[i].magnetization();
    for (std::size_t q = 0; q < m.size(); ++q) csv << c.times_ms[i] << ',' << q + 1 << ',' << m[q] << '\n';
  }
  return csv.str();
}

DensityMatrix export_state(const ExperimentConfig& c, const ExportOptions& e) {
  if (e.state == "ghz") return DensityMatrix::from_pure(ghz_state(e.k));
  if (e.state == "w") return DensityMatrix::from_pure(w_state(e.k));
  if (e.state != "model") throw ConfigError("--state must be ghz, w or model");
  const int start = e.group_start - 1;
  if (start < 0 || start + e.k > c.coupling.num_qubits) throw ConfigError("--group-start is outside the chain");
  const MixedState s = evolve_mixture(c.coupling, initial_state(c), e.time_ms);
  std::vector<int> sites;
  for (int p = 0; p < e.k; ++p) sites.push_back(start + p);
  return s.reduce(sites);
}

// Writes the problem plus a sidecar with this solver's optimum for
// external cross-checks.
std::vector<std::string> export_problem(const ExperimentConfig& c, const ExportOptions& e, const fs::path& out) {
  if (e.k < 2 || e.k > 5) throw ConfigError("--k must lie in {2,3,4,5}");
  const DensityMatrix rho = export_state(c, e);
  SdpProblem problem;
  if (e.problem == "gmn") {
    problem = gmn_problem(rho);
  } else if (e.problem == "design") {
    const int phase = e.state == "model" ? (e.group_start - 1) % 3 : 0;
    const ProjectorBasis basis = projector_basis(e.k, phase);
    problem = witness_design_problem(basis.probabilities(rho), basis);
  } else {
    throw ConfigError("--problem must be gmn or design");
  }
  const SdpSolution sol = solve(problem);
  if (sol.status != SdpStatus::Optimal) throw SolverError("export check solve did not converge");
  const std::string stem = e.problem + "_k" + std::to_string(e.k);
  write_atomic(out / (stem + ".dat-s"), export_sdpa(problem));
  const nlohmann::json meta{{"problem", e.problem},
                            {"state", e.state},
                            {"k", e.k},
                            {"t_ms", e.time_ms},
                            {"group_start", e.group_start},
                            {"sdpa_file", stem + ".dat-s"},
                            {"sense", problem.sense() == SdpSense::Maximize ? "maximize" : "minimize"},
                            {"optimal_value", sol.primal_value},
                            {"duality_gap", sol.duality_gap}};
  write_atomic(out / (stem + ".json"), meta.dump(2) + "\n");
  return {stem + ".dat-s", stem + ".json"};
}

int run_command(const std::string& command, const GlobalOptions& g, const std::string& counts_dir,
                const ExportOptions& e) {
  ExperimentConfig config;
  try {
    config = in_stage("config", [&] { return load_config(g); });
  } catch (const StageError& err) {
    std::cerr << "gmecert: error in stage " << err.stage() << ": " << err.what() << '\n';
    return exit_code(err.category());
  }
  const fs::path out = g.out;
  Manifest manifest;
  manifest.command = command;
  try {
    in_stage("output", [&] { fs::create_directories(out); });
    const AnalyzeOptions ao{g.threads, g.dump_marginals};
    if (command == "simulate") {
      const auto models = in_stage("simulate", [&] { return simulate(config, g.threads); });
      in_stage("simulate", [&] { write_atomic(out / "magnetization_model.csv", model_magnetization_csv(config, models)); });
      manifest.outputs.push_back("magnetization_model.csv");
    } else if (command == "sample" || command == "run") {
      const auto models = in_stage("simulate", [&] { return simulate(config, g.threads); });
      const auto steps = in_stage("sample", [&] { return sample_counts(config, models, g.threads); });
      in_stage("write_counts", [&] { write_counts(out / "counts", steps); });
      for (const TimeStep& s : steps) manifest.outputs.push_back("counts/" + counts_file_name(s.t_ms));
      if (command == "run") {
        analyze(config, steps, models, out, ao, manifest.outputs);
      }
    } else if (command == "analyze") {
      const auto steps = in_stage("read_counts", [&] { return read_counts(counts_dir); });
      config.times_ms.clear();
      for (const TimeStep& s : steps) config.times_ms.push_back(s.t_ms);
      in_stage("config", [&] { config.validate(); });
      const auto models = in_stage("simulate", [&] { return simulate(config, g.threads); });
      analyze(config, steps, models, out, ao, manifest.outputs);
    } else if (command == "export-sdpa") {
      manifest.outputs = in_stage("export-sdpa", [&] { return export_problem(config, e, out); });
    }
    write_manifest(out, config, manifest);
    return 0;
  } catch (const StageError& err) {
    std::cerr << "gmecert: error in stage " << err.stage() << ": " << err.what() << '\n';
    manifest.status = "failed";
    manifest.failed_stage = err.stage();
    manifest.error = err.what();
    try {
      write_manifest(out, config, manifest);
    } catch (const std::exception& m) {
      std::cerr << "gmecert: cannot write manifest: " << m.what() << '\n';
    }
    return exit_code(err.category());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement certification pipeline for long-range XY quench experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON experiment config (default: built-in preset)");
  app.add_option("--seed", g.seed, "Override the master seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--analyses", g.analyses, "Comma-separated subset of magnetization,pair_tomo,bell,gmn");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--dump-marginals", g.dump_marginals, "Write the marginal counts used by each analysis");

  std::string counts_dir;
  ExportOptions e;
  app.add_subcommand("simulate", "Model magnetization at every configured time");
  app.add_subcommand("sample", "Simulate and write sampled counts");
  auto* analyze_cmd = app.add_subcommand("analyze", "Run analyses on existing counts files");
  analyze_cmd->add_option("--counts", counts_dir, "Directory of t_<ms>ms.jsonl files")->required();
  app.add_subcommand("run", "Simulate, sample, write counts and analyze");
  auto* export_cmd = app.add_subcommand("export-sdpa", "Write a GMN or witness-design SDP in SDPA format");
  export_cmd->add_option("--problem", e.problem, "gmn or design")->capture_default_str();
  export_cmd->add_option("--state", e.state, "ghz, w or model")->capture_default_str();
  export_cmd->add_option("--k", e.k, "Group size")->capture_default_str();
  export_cmd->add_option("--time", e.time_ms, "Model time in ms")->capture_default_str();
  export_cmd->add_option("--group-start", e.group_start, "First site of the group (1-based)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  for (CLI::App* sub : app.get_subcommands()) return run_command(sub->get_name(), g, counts_dir, e);
  return 2;
}
