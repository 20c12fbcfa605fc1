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

#pragma once

// Experiment pipeline behind the command-line tool: configuration, model
// simulation, sampling, persistence and the analysis stages.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmecert/measurement.hpp"
#include "gmecert/xy_model.hpp"

namespace gmecert::pipeline {

inline constexpr const char* kConfigSchema = "gmecert.config/1";
inline constexpr const char* kManifestSchema = "gmecert.manifest/1";
inline constexpr const char* kToolVersion = "0.1.0";

struct InitialModelSpec {
  enum class Kind { Ideal, Flip, Table };
  Kind kind = Kind::Ideal;
  // Flip-model weights: Neel, single flips, adjacent double flips.
  double f_ideal = 1.0;
  double f_single = 0.0;
  double f_multi = 0.0;
  std::filesystem::path table;  // JSON {"components": [{"bits", "weight"}]}
};

struct ExperimentConfig {
  CouplingModel coupling;
  std::optional<double> centre_edge_ratio;  // builds a Gaussian envelope
  std::vector<double> times_ms;
  std::uint64_t shots = 1000;
  std::uint64_t master_seed = 1;
  InitialModelSpec initial;
  std::set<std::string> analyses;
  std::vector<int> k_list;
  int resamples = 200;
  bool sparsify = true;

  // N = 8, alpha = 1.1, 1000 shots, 0 to 3.5 ms in steps of 0.5 ms.
  static ExperimentConfig preset();
  void validate() const;
  nlohmann::json to_json() const;
  // Relative table paths resolve against `base`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

const std::set<std::string>& known_analyses();
std::set<std::string> parse_analyses(const std::string& list);

// FNV-1a over the canonical JSON text.
std::string config_hash(const ExperimentConfig& config);

InitialStateModel initial_state(const ExperimentConfig& config);
CouplingModel coupling(const ExperimentConfig& config);

struct TimeStep {
  double t_ms = 0.0;
  std::vector<CountsTable> tables;
};

std::vector<MixedState> simulate(const ExperimentConfig& config, int threads);
std::vector<TimeStep> sample_counts(const ExperimentConfig& config, const std::vector<MixedState>& models,
                                    int threads);

// "t_0.500ms.jsonl" and its inverse.
std::string counts_file_name(double t_ms);
std::optional<double> counts_file_time(const std::string& name);
void write_counts(const std::filesystem::path& dir, const std::vector<TimeStep>& steps);
// All counts files of a directory, ordered by time.
std::vector<TimeStep> read_counts(const std::filesystem::path& dir);

// Write-then-rename so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct AnalyzeOptions {
  int threads = 1;
  bool dump_marginals = false;
};

// Runs the configured analyses on counts aligned with the model states and
// appends each finished file name (relative to `out`) to `written`, so the
// list stays accurate when a later stage fails.
void analyze(const ExperimentConfig& config, const std::vector<TimeStep>& steps,
             const std::vector<MixedState>& models, const std::filesystem::path& out, const AnalyzeOptions& options,
             std::vector<std::string>& written);

// Every group of k neighbouring sites must see all 27 settings.
void require_settings(const std::vector<TimeStep>& steps, int k);

// Failure inside a named stage; keeps the original error category.
class StageError : public Error {
 public:
  enum class Category { Config, Analysis, Solver };
  StageError(std::string stage, Category category, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)), category_(category) {}
  const std::string& stage() const { return stage_; }
  Category category() const { return category_; }

 private:
  std::string stage_;
  Category category_;
};

// Calls `f`, converting library errors into a StageError for `stage`.
template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const SolverError& e) {
    throw StageError(stage, StageError::Category::Solver, e.what());
  } catch (const ConfigError& e) {
    throw StageError(stage, StageError::Category::Config, e.what());
  } catch (const Error& e) {
    throw StageError(stage, StageError::Category::Analysis, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(stage, StageError::Category::Analysis, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw StageError(stage, StageError::Category::Analysis, e.what());
  }
}

int exit_code(StageError::Category c);

struct Manifest {
  std::string command;
  std::vector<std::string> outputs;
  std::string status = "ok";
  std::string failed_stage;
  std::string error;
};

void write_manifest(const std::filesystem::path& out, const ExperimentConfig& config, const Manifest& m);

}  // namespace gmecert::pipeline
