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

#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <regex>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "gmecert/bell_witness.hpp"
#include "gmecert/gmn.hpp"
#include "gmecert/tomography.hpp"

namespace fs = std::filesystem;

namespace gmecert::pipeline {

namespace {

// Runs f(0..count-1) on up to `threads` workers; rethrows the first failure.
template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_time(double t_ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", t_ms);
  return buf;
}

std::string group_tag(int start, int k) { return "g" + std::to_string(start + 1) + "_k" + std::to_string(k); }

std::string group_name(int start, int k) {
  std::string s = "{";
  for (int p = 0; p < k; ++p) s += (p ? "," : "") + std::to_string(start + p + 1);
  return s + "}";
}

std::string label_name(const AxisLabel& l) { return {to_char(l[0]), to_char(l[1]), to_char(l[2])}; }

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

// ---- configuration ---------------------------------------------------------

const std::set<std::string>& known_analyses() {
  static const std::set<std::string> names{"magnetization", "pair_tomo", "bell", "gmn"};
  return names;
}

std::set<std::string> parse_analyses(const std::string& list) {
  std::set<std::string> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (!known_analyses().count(item)) throw ConfigError("unknown analysis '" + item + "'");
    out.insert(item);
  }
  return out;
}

ExperimentConfig ExperimentConfig::preset() {
  ExperimentConfig c;
  c.coupling = CouplingModel::uniform(8, 1.1, 0.17);
  for (int i = 0; i <= 7; ++i) c.times_ms.push_back(0.5 * i);
  c.shots = 1000;
  c.master_seed = 1;
  c.analyses = known_analyses();
  c.k_list = {2, 3};
  return c;
}

void ExperimentConfig::validate() const {
  coupling.validate();
  if (times_ms.empty()) throw ConfigError("config needs at least one time");
  for (std::size_t i = 0; i < times_ms.size(); ++i) {
    if (!(times_ms[i] >= 0.0)) throw ConfigError("times must be nonnegative");
    if (i > 0 && !(times_ms[i] > times_ms[i - 1])) throw ConfigError("times must be strictly ascending");
    if (i > 0 && format_time(times_ms[i]) == format_time(times_ms[i - 1]))
      throw ConfigError("times closer than 1 us cannot be stored separately");
  }
  if (shots == 0) throw ConfigError("shots must be positive");
  for (int k : k_list)
    if (k < 2 || k > 5) throw ConfigError("k_list entries must lie in {2,3,4,5}");
  for (int k : k_list)
    if (k > coupling.num_qubits) throw ConfigError("k_list entry exceeds the chain length");
  for (const std::string& a : analyses)
    if (!known_analyses().count(a)) throw ConfigError("unknown analysis '" + a + "'");
  if (resamples < 100) throw ConfigError("resamples must be at least 100");
  if (initial.kind == InitialModelSpec::Kind::Flip) {
    const double total = initial.f_ideal + initial.f_single + initial.f_multi;
    if (initial.f_ideal < 0 || initial.f_single < 0 || initial.f_multi < 0 || std::abs(total - 1.0) > 1e-9)
      throw ConfigError("flip-model weights must be nonnegative and sum to one");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json cp{{"num_qubits", coupling.num_qubits},
                    {"alpha", coupling.alpha},
                    {"j0", coupling.j0},
                    {"b_field", coupling.b_field}};
  if (centre_edge_ratio) cp["centre_edge_ratio"] = *centre_edge_ratio;
  else if (!coupling.envelope.empty()) cp["envelope"] = coupling.envelope;
  nlohmann::json init;
  switch (initial.kind) {
    case InitialModelSpec::Kind::Ideal: init = {{"kind", "ideal"}}; break;
    case InitialModelSpec::Kind::Flip:
      init = {{"kind", "flip"}, {"f_ideal", initial.f_ideal}, {"f_single", initial.f_single}, {"f_multi", initial.f_multi}};
      break;
    case InitialModelSpec::Kind::Table: init = {{"kind", "table"}, {"path", initial.table.string()}}; break;
  }
  return {{"schema", kConfigSchema},
          {"coupling", cp},
          {"times_ms", times_ms},
          {"shots", shots},
          {"master_seed", master_seed},
          {"initial_model", init},
          {"analyses", std::vector<std::string>(analyses.begin(), analyses.end())},
          {"k_list", k_list},
          {"resamples", resamples},
          {"sparsify", sparsify}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("schema") && j.at("schema") != kConfigSchema)
      throw ConfigError("unsupported config schema " + j.at("schema").dump());
    static const std::set<std::string> keys{"schema", "coupling", "times_ms", "shots", "master_seed",
                                            "initial_model", "analyses", "k_list", "resamples", "sparsify"};
    for (const auto& [key, value] : j.items())
      if (!keys.count(key)) throw ConfigError("unknown config key '" + key + "'");
    ExperimentConfig c = preset();
    if (j.contains("coupling")) {
      const nlohmann::json& cp = j.at("coupling");
      c.coupling.num_qubits = get_or(cp, "num_qubits", c.coupling.num_qubits);
      c.coupling.alpha = get_or(cp, "alpha", c.coupling.alpha);
      c.coupling.j0 = get_or(cp, "j0", c.coupling.j0);
      c.coupling.b_field = get_or(cp, "b_field", c.coupling.b_field);
      if (cp.contains("envelope") && cp.contains("centre_edge_ratio"))
        throw ConfigError("give either an envelope or a centre/edge ratio");
      if (cp.contains("envelope")) c.coupling.envelope = cp.at("envelope").get<std::vector<double>>();
      if (cp.contains("centre_edge_ratio")) {
        c.centre_edge_ratio = cp.at("centre_edge_ratio").get<double>();
        c.coupling.envelope = gaussian_envelope(c.coupling.num_qubits, *c.centre_edge_ratio);
      }
    }
    if (j.contains("times_ms")) c.times_ms = j.at("times_ms").get<std::vector<double>>();
    if (j.contains("shots")) {
      if (!j.at("shots").is_number_integer() || j.at("shots").get<std::int64_t>() <= 0)
        throw ConfigError("shots must be a positive integer");
      c.shots = j.at("shots").get<std::uint64_t>();
    }
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("initial_model")) {
      const nlohmann::json& im = j.at("initial_model");
      const std::string kind = im.at("kind").get<std::string>();
      if (kind == "ideal") {
        c.initial.kind = InitialModelSpec::Kind::Ideal;
      } else if (kind == "flip") {
        c.initial.kind = InitialModelSpec::Kind::Flip;
        c.initial.f_ideal = im.at("f_ideal").get<double>();
        c.initial.f_single = im.at("f_single").get<double>();
        c.initial.f_multi = im.at("f_multi").get<double>();
      } else if (kind == "table") {
        c.initial.kind = InitialModelSpec::Kind::Table;
        fs::path p = im.at("path").get<std::string>();
        c.initial.table = p.is_relative() && !base.empty() ? base / p : p;
      } else {
        throw ConfigError("initial_model kind must be ideal, flip or table");
      }
    }
    if (j.contains("analyses")) {
      c.analyses.clear();
      for (const auto& a : j.at("analyses")) c.analyses.insert(a.get<std::string>());
    }
    if (j.contains("k_list")) c.k_list = j.at("k_list").get<std::vector<int>>();
    c.resamples = get_or(j, "resamples", c.resamples);
    c.sparsify = get_or(j, "sparsify", c.sparsify);
    std::sort(c.k_list.begin(), c.k_list.end());
    c.k_list.erase(std::unique(c.k_list.begin(), c.k_list.end()), c.k_list.end());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CouplingModel coupling(const ExperimentConfig& config) { return config.coupling; }

InitialStateModel initial_state(const ExperimentConfig& config) {
  const int n = config.coupling.num_qubits;
  switch (config.initial.kind) {
    case InitialModelSpec::Kind::Ideal: {
      std::string bits;
      for (int q = 0; q < n; ++q) bits.push_back(q % 2 == 0 ? '1' : '0');
      return InitialStateModel::ideal(bits);
    }
    case InitialModelSpec::Kind::Flip:
      return InitialStateModel::flip_model(n, config.initial.f_ideal, config.initial.f_single, config.initial.f_multi);
    case InitialModelSpec::Kind::Table: {
      std::ifstream in(config.initial.table);
      if (!in) throw ConfigError("cannot read initial-state table " + config.initial.table.string());
      try {
        const nlohmann::json j = nlohmann::json::parse(in);
        InitialStateModel m;
        for (const auto& c : j.at("components"))
          m.components.emplace_back(c.at("bits").get<std::string>(), c.at("weight").get<double>());
        m.validate();
        if (m.num_qubits() != n) throw ConfigError("initial-state table does not match the chain length");
        return m;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("initial-state table: " + std::string(e.what()));
      }
    }
  }
  throw ConfigError("unknown initial model");
}

// ---- simulation and sampling -------------------------------------------------

std::vector<MixedState> simulate(const ExperimentConfig& config, int threads) {
  const InitialStateModel init = initial_state(config);
  std::vector<std::optional<MixedState>> out(config.times_ms.size());
  parallel_for(out.size(), threads,
               [&](std::size_t i) { out[i] = evolve_mixture(config.coupling, init, config.times_ms[i]); });
  std::vector<MixedState> states;
  for (auto& s : out) states.push_back(std::move(*s));
  return states;
}

std::vector<TimeStep> sample_counts(const ExperimentConfig& config, const std::vector<MixedState>& models,
                                    int threads) {
  std::vector<TimeStep> steps(models.size());
  parallel_for(models.size(), threads, [&](std::size_t i) {
    steps[i].t_ms = config.times_ms[i];
    const std::uint64_t seed = derive_seed(config.master_seed, "counts/" + format_time(config.times_ms[i]));
    steps[i].tables = sample_scheme(models[i], config.shots, seed);
  });
  return steps;
}

std::string counts_file_name(double t_ms) { return "t_" + format_time(t_ms) + "ms.jsonl"; }

std::optional<double> counts_file_time(const std::string& name) {
  static const std::regex re(R"(t_([0-9]+(\.[0-9]+)?)ms\.jsonl)");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return std::stod(m[1].str());
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw AnalysisError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw AnalysisError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_counts(const fs::path& dir, const std::vector<TimeStep>& steps) {
  for (const TimeStep& s : steps) {
    std::ostringstream out;
    write_counts_jsonl(out, s.tables);
    write_atomic(dir / counts_file_name(s.t_ms), out.str());
  }
}

std::vector<TimeStep> read_counts(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw AnalysisError("counts directory " + dir.string() + " does not exist");
  std::vector<TimeStep> steps;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const auto t = counts_file_time(name);
    if (!t) continue;
    std::ifstream in(entry.path());
    try {
      steps.push_back({*t, read_counts_jsonl(in)});
    } catch (const SchemaError& e) {
      throw SchemaError(name + ": " + e.what(), e.line());
    }
    if (steps.back().tables.empty()) throw AnalysisError(name + ": no counts tables");
  }
  if (steps.empty()) throw AnalysisError("no counts files (t_<ms>ms.jsonl) in " + dir.string());
  std::sort(steps.begin(), steps.end(), [](const TimeStep& a, const TimeStep& b) { return a.t_ms < b.t_ms; });
  const int n = steps.front().tables.front().setting.num_qubits();
  for (const TimeStep& s : steps)
    for (const CountsTable& t : s.tables)
      if (t.setting.num_qubits() != n) throw AnalysisError("counts files disagree on the number of qubits");
  return steps;
}

// ---- analyses ----------------------------------------------------------------

void require_settings(const std::vector<TimeStep>& steps, int k) {
  for (const TimeStep& s : steps) {
    const int n = s.tables.front().setting.num_qubits();
    for (int start = 0; start + k <= n; ++start)
      for (const AxisLabel& label : all_axis_labels()) {
        const bool found = std::any_of(s.tables.begin(), s.tables.end(), [&](const CountsTable& t) {
          for (int p = 0; p < k; ++p)
            if (t.setting.axes[static_cast<std::size_t>(start + p)] != label[static_cast<std::size_t>((start + p) % 3)])
              return false;
          return true;
        });
        if (!found)
          throw AnalysisError("t = " + format_time(s.t_ms) + " ms: group " + group_name(start, k) +
                              " lacks setting " + label_name(label));
      }
  }
}

namespace {

// Marginal tables per (step, first site, k), computed once and shared by
// every analysis that needs them.
class MarginalCache {
 public:
  explicit MarginalCache(const std::vector<TimeStep>& steps) : steps_(steps) {}

  const std::vector<CountsTable>& get(std::size_t step, int start, int k) {
    std::lock_guard<std::mutex> lock(m_);
    auto& slot = cache_[{step, start, k}];
    if (slot.empty()) {
      std::vector<int> sites(static_cast<std::size_t>(k));
      std::iota(sites.begin(), sites.end(), start);
      for (const CountsTable& t : steps_[step].tables) slot.push_back(marginalize(t, sites));
    }
    return slot;
  }

 private:
  const std::vector<TimeStep>& steps_;
  std::mutex m_;
  std::map<std::tuple<std::size_t, int, int>, std::vector<CountsTable>> cache_;
};

std::vector<int> local_sites(int k) {
  std::vector<int> s(static_cast<std::size_t>(k));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

void dump_marginals(const fs::path& out, const std::string& analysis, double t_ms, int start, int k,
                    const std::vector<CountsTable>& tables) {
  std::ostringstream text;
  write_counts_jsonl(text, tables);
  write_atomic(out / "marginals" / analysis / ("t_" + format_time(t_ms) + "ms_" + group_tag(start, k) + ".jsonl"),
               text.str());
}

}  // namespace

void analyze(const ExperimentConfig& config, const std::vector<TimeStep>& steps,
             const std::vector<MixedState>& models, const fs::path& out, const AnalyzeOptions& options,
             std::vector<std::string>& written) {
  if (steps.size() != models.size()) throw ConfigError("counts and model states are not aligned in time");
  const int n = steps.front().tables.front().setting.num_qubits();
  if (n != config.coupling.num_qubits) throw ConfigError("counts and config disagree on the number of qubits");
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (std::abs(steps[i].t_ms - config.times_ms[i]) > 5e-4)
      throw ConfigError("counts and model states are not aligned in time");
  MarginalCache cache(steps);
  const auto has = [&](const char* a) { return config.analyses.count(a) > 0; };

  if (has("magnetization")) {
    in_stage("magnetization", [&] {
      std::ostringstream csv;
      csv << "t_ms,site,z_expectation,data,std_error\n";
      csv.precision(10);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::vector<double> model = models[i].magnetization();
        for (int q = 0; q < n; ++q) {
          std::vector<Pauli> ops(static_cast<std::size_t>(n), Pauli::I);
          ops[static_cast<std::size_t>(q)] = Pauli::Z;
          const CorrelatorEstimate e = estimate_correlator(steps[i].tables, PauliString(ops));
          csv << steps[i].t_ms << ',' << q + 1 << ',' << model[static_cast<std::size_t>(q)] << ',' << e.value << ','
              << e.std_error << '\n';
        }
      }
      write_atomic(out / "magnetization.csv", csv.str());
      written.push_back("magnetization.csv");
    });
  }

  if (has("pair_tomo")) {
    in_stage("pair_tomo", [&] {
      std::vector<TimeStepCounts> tsc;
      for (const TimeStep& s : steps) tsc.push_back({s.t_ms, s.tables});
      NegativitySweepOptions o;
      o.resamples = config.resamples;
      o.seed = derive_seed(config.master_seed, "pair_tomo");
      const std::vector<PairNegativityRow> rows = pair_negativity_sweep(tsc, o);
      std::ostringstream csv;
      write_pair_negativity_csv(csv, rows);
      write_atomic(out / "pair_negativity.csv", csv.str());
      written.push_back("pair_negativity.csv");
    });
  }

  if (has("bell")) {
    in_stage("bell", [&] {
      std::vector<FidelityRow> rows;
      for (int k : config.k_list) {
        if (k > 3) continue;
        require_settings(steps, k);
        for (std::size_t i = 0; i < steps.size(); ++i)
          for (int start = 0; start + k <= n; ++start) {
            const std::vector<CountsTable>& marg = cache.get(i, start, k);
            if (options.dump_marginals) dump_marginals(out, "bell", steps[i].t_ms, start, k, marg);
            const GroupCorrelations c = correlations_from_counts(marg, local_sites(k));
            std::vector<int> group(static_cast<std::size_t>(k));
            std::iota(group.begin(), group.end(), start);
            rows.push_back({steps[i].t_ms, evaluate_group(c, group)});
          }
      }
      std::ostringstream csv;
      write_fidelity_csv(csv, rows);
      write_atomic(out / "bell_fidelity.csv", csv.str());
      written.push_back("bell_fidelity.csv");
    });
  }

  if (has("gmn")) {
    in_stage("gmn", [&] {
      // The pure model is the noiseless Neel quench.
      ExperimentConfig ideal = config;
      ideal.initial = InitialModelSpec{};
      const std::vector<MixedState> pure = config.initial.kind == InitialModelSpec::Kind::Ideal
                                               ? models
                                               : simulate(ideal, options.threads);
      std::vector<WitnessRow> rows;
      for (int k : config.k_list) {
        require_settings(steps, k);
        std::vector<WitnessSweepStep> sweep;
        for (std::size_t i = 0; i < steps.size(); ++i) {
          WitnessSweepStep st;
          st.t_ms = steps[i].t_ms;
          st.mixed_model = models[i];
          st.pure_model = pure[i];
          sweep.push_back(std::move(st));
        }
        WitnessSweepOptions wo;
        wo.sparsify = config.sparsify;
        wo.threads = options.threads;
        const WitnessSweepResult res = witness_sweep(sweep, k, wo);
        // Model rows come in pairs (pure, mixed) per step and group, in the
        // same order as the witnesses.
        const std::size_t groups = static_cast<std::size_t>(n - k + 1);
        std::vector<WitnessRow> data(res.witnesses.size());
        parallel_for(res.witnesses.size(), options.threads, [&](std::size_t w) {
          const std::size_t i = w / groups;
          const int start = static_cast<int>(w % groups);
          const std::vector<CountsTable>& marg = cache.get(i, start, k);
          WitnessOperator local = res.witnesses[w];
          local.group = local_sites(k);
          EvaluateOptions eo;
          eo.resamples = config.resamples;
          eo.seed = derive_seed(config.master_seed,
                                "witness/" + format_time(steps[i].t_ms) + "/" + group_tag(start, k));
          const GmnResult r = evaluate_witness(local, marg, eo);
          data[w] = {steps[i].t_ms, k, start, r.value, r.std_error.value_or(0.0), WitnessSource::Data};
        });
        for (std::size_t w = 0; w < res.witnesses.size(); ++w) {
          const std::size_t i = w / groups;
          const int start = static_cast<int>(w % groups);
          if (options.dump_marginals) dump_marginals(out, "gmn", steps[i].t_ms, start, k, cache.get(i, start, k));
          rows.push_back(data[w]);
          rows.push_back(res.rows[2 * w]);
          rows.push_back(res.rows[2 * w + 1]);
          const std::string name = "witnesses/t_" + format_time(steps[i].t_ms) + "ms_" + group_tag(start, k) + ".json";
          write_atomic(out / name, to_json(res.witnesses[w]).dump(2) + "\n");
          written.push_back(name);
        }
      }
      std::ostringstream csv;
      write_witness_csv(csv, rows);
      write_atomic(out / "witness.csv", csv.str());
      written.push_back("witness.csv");
    });
  }
}

// ---- manifest ----------------------------------------------------------------

int exit_code(StageError::Category c) {
  switch (c) {
    case StageError::Category::Config: return 2;
    case StageError::Category::Analysis: return 3;
    case StageError::Category::Solver: return 4;
  }
  return 3;
}

void write_manifest(const fs::path& out, const ExperimentConfig& config, const Manifest& m) {
  nlohmann::json j{{"schema", kManifestSchema},
                   {"tool_version", kToolVersion},
                   {"command", m.command},
                   {"config", config.to_json()},
                   {"config_hash", config_hash(config)},
                   {"master_seed", config.master_seed},
                   {"versions",
                    {{"gmecert", kToolVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                   {"outputs", m.outputs},
                   {"status", m.status}};
  if (m.status != "ok") {
    j["failed_stage"] = m.failed_stage;
    j["error"] = m.error;
    write_atomic(out / "FAILED", m.failed_stage + ": " + m.error + "\n");
  } else if (fs::exists(out / "FAILED")) {
    fs::remove(out / "FAILED");
  }
  write_atomic(out / "manifest.json", j.dump(2) + "\n");
}

}  // namespace gmecert::pipeline
