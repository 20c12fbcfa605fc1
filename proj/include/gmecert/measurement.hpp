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

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmecert/pauli.hpp"
#include "gmecert/state.hpp"
#include "gmecert/xy_model.hpp"

namespace gmecert {

using AxisLabel = std::array<Pauli, 3>;

// One Pauli axis per qubit, all measured in the same shot.
struct MeasurementSetting {
  std::vector<Pauli> axes;
  std::optional<AxisLabel> label;  // set for period-3 scheme settings

  int num_qubits() const { return static_cast<int>(axes.size()); }
  // "XYZ" for scheme settings, otherwise the full axis string.
  std::string name() const;
  bool operator==(const MeasurementSetting&) const = default;
};

// Setting whose axis on 0-based site i is label[i mod 3].
MeasurementSetting scheme_setting(int num_qubits, const AxisLabel& label);
// The 27 scheme settings, labels in lexicographic X < Y < Z order.
std::vector<MeasurementSetting> scheme_settings(int num_qubits);
std::vector<AxisLabel> all_axis_labels();

// Sparse outcome histogram. Bitstrings have qubit 0 leftmost.
struct CountsTable {
  MeasurementSetting setting;
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t shots = 0;

  void validate() const;
  bool operator==(const CountsTable&) const = default;
};

struct CorrelatorEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t shots_used = 0;
  std::vector<std::string> source_settings;
};

// Born distribution over the 2^N outcomes in the given setting.
RVector outcome_probabilities(const CVector& amplitudes, int num_qubits, const MeasurementSetting& setting);
RVector outcome_probabilities(const DensityMatrix& rho, const MeasurementSetting& setting);
RVector outcome_probabilities(const MixedState& state, const MeasurementSetting& setting);

// Draws `shots` outcomes from a probability vector (deterministic per seed).
CountsTable sample_distribution(const RVector& probabilities, const MeasurementSetting& setting,
                                std::uint64_t shots, std::uint64_t seed);
CountsTable sample(const PureState& psi, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed);
CountsTable sample(const DensityMatrix& rho, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed);
CountsTable sample(const MixedState& state, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed);

// Seed for a labelled sub-stream of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
double uniform01(std::uint64_t bits);

// Samples all 27 scheme settings with per-setting derived seeds.
std::vector<CountsTable> sample_scheme(const MixedState& state, std::uint64_t shots, std::uint64_t seed,
                                       const std::string& stream = "scheme");
std::vector<CountsTable> sample_scheme(const PureState& psi, std::uint64_t shots, std::uint64_t seed,
                                       const std::string& stream = "scheme");

// Restriction of a table to `sites` (in the given order).
CountsTable marginalize(const CountsTable& table, std::span<const int> sites);

// Frequency of `outcome` on `sites` (0-based); binomial standard error.
CorrelatorEstimate estimate_probability(const CountsTable& table, std::span<const int> sites,
                                        std::string_view outcome);

// True if the setting measures every non-identity factor of `ops`.
bool setting_compatible(const MeasurementSetting& setting, const PauliString& ops);

// Shot-weighted pooled estimate over all compatible tables.
CorrelatorEstimate estimate_correlator(std::span<const CountsTable> tables, const PauliString& ops);

// Covariance of the two pooled estimators from shots of shared settings.
double covariance(std::span<const CountsTable> tables, const PauliString& ops_a, const PauliString& ops_b);

// Covariance matrix of several pooled estimators, computed in one pass.
// Entry (a, b) equals covariance(tables, ops[a], ops[b]).
RMatrix covariance_matrix(std::span<const CountsTable> tables, std::span<const PauliString> ops);

struct BootstrapResult {
  double mean = 0.0;
  double std_error = 0.0;
};

using TableStatistic = std::function<double(std::span<const CountsTable>)>;

// Multinomial resampling of every table at its own shot count.
BootstrapResult bootstrap(std::span<const CountsTable> tables, const TableStatistic& statistic, int resamples,
                          std::uint64_t seed);

nlohmann::json to_json(const CountsTable& table);
CountsTable counts_table_from_json(const nlohmann::json& j, std::size_t line = 0);

// JSON Lines, one table per line.
void write_counts_jsonl(std::ostream& out, std::span<const CountsTable> tables);
std::vector<CountsTable> read_counts_jsonl(std::istream& in);

}  // namespace gmecert
