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

#include "gmecert/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_map>

namespace gmecert {

namespace {

// Rows are <e_0| and <e_1| of the measured axis, so the rotated amplitude
// index carries the measured bit directly.
Eigen::Matrix2cd readout_rotation(Pauli axis) {
  Eigen::Matrix2cd u;
  u.row(0) = axis_eigenvector(axis, 0).adjoint();
  u.row(1) = axis_eigenvector(axis, 1).adjoint();
  return u;
}

// Applies a single-qubit matrix to qubit q of every column of m.
void apply_local(CMatrix& m, int q, int n, const Eigen::Matrix2cd& u) {
  const Eigen::Index stride = Eigen::Index{1} << (n - 1 - q);
  const Eigen::Index dim = m.rows();
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    for (Eigen::Index base = 0; base < dim; base += 2 * stride) {
      for (Eigen::Index off = 0; off < stride; ++off) {
        const Eigen::Index i0 = base + off;
        const Eigen::Index i1 = i0 + stride;
        const cplx a = m(i0, col);
        const cplx b = m(i1, col);
        m(i0, col) = u(0, 0) * a + u(0, 1) * b;
        m(i1, col) = u(1, 0) * a + u(1, 1) * b;
      }
    }
  }
}

void check_setting(const MeasurementSetting& setting, int n) {
  if (setting.num_qubits() != n) throw AnalysisError("setting size does not match the state");
  for (Pauli p : setting.axes)
    if (p == Pauli::I) throw AnalysisError("measurement axes must be X, Y or Z");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string index_to_bits(std::uint64_t idx, int n) {
  std::string s(static_cast<std::size_t>(n), '0');
  for (int q = 0; q < n; ++q)
    if (bit_of(idx, q, n)) s[static_cast<std::size_t>(q)] = '1';
  return s;
}

// +1/-1 product of the measured bits on the support (bit 1 = +1).
int parity_sign(const std::string& bits, std::span<const int> support) {
  int sign = 1;
  for (int q : support)
    if (bits[static_cast<std::size_t>(q)] == '0') sign = -sign;
  return sign;
}

struct Pooled {
  std::int64_t sum = 0;
  std::uint64_t shots = 0;
  std::vector<std::string> sources;
};

Pooled pool(std::span<const CountsTable> tables, const PauliString& ops) {
  const std::vector<int> support = ops.support();
  Pooled p;
  for (const CountsTable& t : tables) {
    if (t.setting.num_qubits() != ops.size()) throw AnalysisError("operator size does not match the counts");
    if (!setting_compatible(t.setting, ops)) continue;
    for (const auto& [bits, c] : t.counts) p.sum += parity_sign(bits, support) * static_cast<std::int64_t>(c);
    p.shots += t.shots;
    p.sources.push_back(t.setting.name());
  }
  return p;
}

}  // namespace

std::string MeasurementSetting::name() const {
  std::string s;
  if (label) {
    for (Pauli p : *label) s.push_back(to_char(p));
  } else {
    for (Pauli p : axes) s.push_back(to_char(p));
  }
  return s;
}

MeasurementSetting scheme_setting(int num_qubits, const AxisLabel& label) {
  if (num_qubits < 1) throw ConfigError("setting needs at least one qubit");
  MeasurementSetting s;
  s.label = label;
  s.axes.resize(static_cast<std::size_t>(num_qubits));
  for (int i = 0; i < num_qubits; ++i) s.axes[static_cast<std::size_t>(i)] = label[static_cast<std::size_t>(i % 3)];
  return s;
}

std::vector<AxisLabel> all_axis_labels() {
  constexpr Pauli kAxes[] = {Pauli::X, Pauli::Y, Pauli::Z};
  std::vector<AxisLabel> out;
  for (Pauli a : kAxes)
    for (Pauli b : kAxes)
      for (Pauli c : kAxes) out.push_back({a, b, c});
  return out;
}

std::vector<MeasurementSetting> scheme_settings(int num_qubits) {
  if (num_qubits < 3) throw ConfigError("the period-3 scheme needs at least 3 qubits");
  std::vector<MeasurementSetting> out;
  for (const AxisLabel& l : all_axis_labels()) out.push_back(scheme_setting(num_qubits, l));
  return out;
}

void CountsTable::validate() const {
  std::uint64_t total = 0;
  for (const auto& [bits, c] : counts) {
    if (static_cast<int>(bits.size()) != setting.num_qubits())
      throw AnalysisError("outcome length does not match the setting");
    for (char ch : bits)
      if (ch != '0' && ch != '1') throw AnalysisError("outcome must be a bitstring");
    total += c;
  }
  if (total != shots) throw AnalysisError("counts do not sum to the shot total");
}

RVector outcome_probabilities(const CVector& amplitudes, int num_qubits, const MeasurementSetting& setting) {
  check_setting(setting, num_qubits);
  if (amplitudes.size() != static_cast<Eigen::Index>(dim_of(num_qubits)))
    throw AnalysisError("amplitude vector has the wrong dimension");
  CMatrix v = amplitudes;
  for (int q = 0; q < num_qubits; ++q)
    if (setting.axes[static_cast<std::size_t>(q)] != Pauli::Z)
      apply_local(v, q, num_qubits, readout_rotation(setting.axes[static_cast<std::size_t>(q)]));
  return v.col(0).cwiseAbs2();
}

RVector outcome_probabilities(const DensityMatrix& rho, const MeasurementSetting& setting) {
  const int n = rho.num_qubits();
  check_setting(setting, n);
  CMatrix m = rho.matrix();
  for (int q = 0; q < n; ++q) {
    const Pauli axis = setting.axes[static_cast<std::size_t>(q)];
    if (axis == Pauli::Z) continue;
    const Eigen::Matrix2cd u = readout_rotation(axis);
    apply_local(m, q, n, u);
    CMatrix adj = m.adjoint();
    apply_local(adj, q, n, u);
    m = adj.adjoint();
  }
  RVector p = m.diagonal().real().cwiseMax(0.0);
  return p / p.sum();
}

RVector outcome_probabilities(const MixedState& state, const MeasurementSetting& setting) {
  const int n = state.num_qubits();
  RVector p = RVector::Zero(static_cast<Eigen::Index>(dim_of(n)));
  for (std::size_t c = 0; c < state.components().size(); ++c)
    p += state.weights()[c] * outcome_probabilities(state.components()[c].to_dense(), n, setting);
  return p;
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

CountsTable sample_distribution(const RVector& probabilities, const MeasurementSetting& setting,
                                std::uint64_t shots, std::uint64_t seed) {
  if (shots == 0) throw ConfigError("shots must be positive");
  const int n = setting.num_qubits();
  if (probabilities.size() != static_cast<Eigen::Index>(dim_of(n)))
    throw AnalysisError("distribution size does not match the setting");
  std::vector<double> cdf(static_cast<std::size_t>(probabilities.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    acc += std::max(0.0, probabilities(i));
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  if (!(acc > 0.0)) throw AnalysisError("distribution has no mass");
  std::mt19937_64 rng(seed);
  std::unordered_map<std::uint64_t, std::uint64_t> hist;
  for (std::uint64_t s = 0; s < shots; ++s) {
    const double u = uniform01(rng()) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip zero-probability outcomes sharing the same cumulative value.
    auto idx = static_cast<std::uint64_t>(it - cdf.begin());
    while (probabilities(static_cast<Eigen::Index>(idx)) <= 0.0 && idx + 1 < cdf.size()) ++idx;
    ++hist[idx];
  }
  CountsTable t;
  t.setting = setting;
  t.shots = shots;
  for (const auto& [idx, c] : hist) t.counts[index_to_bits(idx, n)] = c;
  return t;
}

CountsTable sample(const PureState& psi, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed) {
  return sample_distribution(outcome_probabilities(psi.amplitudes(), psi.num_qubits(), setting), setting, shots,
                             seed);
}

CountsTable sample(const DensityMatrix& rho, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed) {
  return sample_distribution(outcome_probabilities(rho, setting), setting, shots, seed);
}

CountsTable sample(const MixedState& state, const MeasurementSetting& setting, std::uint64_t shots,
                   std::uint64_t seed) {
  return sample_distribution(outcome_probabilities(state, setting), setting, shots, seed);
}

std::vector<CountsTable> sample_scheme(const MixedState& state, std::uint64_t shots, std::uint64_t seed,
                                       const std::string& stream) {
  std::vector<CountsTable> out;
  for (const MeasurementSetting& s : scheme_settings(state.num_qubits()))
    out.push_back(sample(state, s, shots, derive_seed(seed, stream + "/" + s.name())));
  return out;
}

std::vector<CountsTable> sample_scheme(const PureState& psi, std::uint64_t shots, std::uint64_t seed,
                                       const std::string& stream) {
  std::vector<CountsTable> out;
  for (const MeasurementSetting& s : scheme_settings(psi.num_qubits()))
    out.push_back(sample(psi, s, shots, derive_seed(seed, stream + "/" + s.name())));
  return out;
}

CountsTable marginalize(const CountsTable& table, std::span<const int> sites) {
  CountsTable out;
  for (int s : sites) {
    if (s < 0 || s >= table.setting.num_qubits()) throw AnalysisError("site index out of range");
    out.setting.axes.push_back(table.setting.axes[static_cast<std::size_t>(s)]);
  }
  out.shots = table.shots;
  for (const auto& [bits, c] : table.counts) {
    std::string sub;
    for (int s : sites) sub.push_back(bits[static_cast<std::size_t>(s)]);
    out.counts[sub] += c;
  }
  return out;
}

CorrelatorEstimate estimate_probability(const CountsTable& table, std::span<const int> sites,
                                        std::string_view outcome) {
  if (table.shots == 0) throw AnalysisError("table has zero shots");
  if (outcome.size() != sites.size()) throw AnalysisError("outcome length must equal the number of sites");
  for (int s : sites)
    if (s < 0 || s >= table.setting.num_qubits()) throw AnalysisError("site index out of range");
  std::uint64_t hits = 0;
  for (const auto& [bits, c] : table.counts) {
    bool match = true;
    for (std::size_t k = 0; k < sites.size() && match; ++k)
      match = bits[static_cast<std::size_t>(sites[k])] == outcome[k];
    if (match) hits += c;
  }
  CorrelatorEstimate e;
  e.value = static_cast<double>(hits) / static_cast<double>(table.shots);
  e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(table.shots));
  e.shots_used = table.shots;
  e.source_settings = {table.setting.name()};
  return e;
}

bool setting_compatible(const MeasurementSetting& setting, const PauliString& ops) {
  if (setting.num_qubits() != ops.size()) return false;
  for (int q = 0; q < ops.size(); ++q)
    if (ops.op(q) != Pauli::I && ops.op(q) != setting.axes[static_cast<std::size_t>(q)]) return false;
  return true;
}

CorrelatorEstimate estimate_correlator(std::span<const CountsTable> tables, const PauliString& ops) {
  const Pooled p = pool(tables, ops);
  if (p.shots == 0) throw AnalysisError("no measured setting is compatible with " + ops.to_string());
  CorrelatorEstimate e;
  e.value = static_cast<double>(p.sum) / static_cast<double>(p.shots);
  // Per-shot values are +-1, so the sample variance is 1 - mean^2.
  e.std_error = std::sqrt(std::max(0.0, 1.0 - e.value * e.value) / static_cast<double>(p.shots));
  e.shots_used = p.shots;
  e.source_settings = p.sources;
  return e;
}

double covariance(std::span<const CountsTable> tables, const PauliString& ops_a, const PauliString& ops_b) {
  const Pooled pa = pool(tables, ops_a);
  const Pooled pb = pool(tables, ops_b);
  if (pa.shots == 0 || pb.shots == 0) throw AnalysisError("correlator has no compatible setting");
  const double ea = static_cast<double>(pa.sum) / static_cast<double>(pa.shots);
  const double eb = static_cast<double>(pb.sum) / static_cast<double>(pb.shots);
  const std::vector<int> sa = ops_a.support();
  const std::vector<int> sb = ops_b.support();
  double acc = 0.0;
  for (const CountsTable& t : tables) {
    if (!setting_compatible(t.setting, ops_a) || !setting_compatible(t.setting, ops_b)) continue;
    for (const auto& [bits, c] : t.counts)
      acc += static_cast<double>(c) * (parity_sign(bits, sa) - ea) * (parity_sign(bits, sb) - eb);
  }
  return acc / (static_cast<double>(pa.shots) * static_cast<double>(pb.shots));
}

RMatrix covariance_matrix(std::span<const CountsTable> tables, std::span<const PauliString> ops) {
  const auto m = static_cast<Eigen::Index>(ops.size());
  RVector mean(m);
  RVector shots(m);
  std::vector<std::vector<int>> supports;
  for (Eigen::Index a = 0; a < m; ++a) {
    const Pooled p = pool(tables, ops[static_cast<std::size_t>(a)]);
    if (p.shots == 0) throw AnalysisError("correlator has no compatible setting");
    mean(a) = static_cast<double>(p.sum) / static_cast<double>(p.shots);
    shots(a) = static_cast<double>(p.shots);
    supports.push_back(ops[static_cast<std::size_t>(a)].support());
  }
  RMatrix acc = RMatrix::Zero(m, m);
  std::vector<Eigen::Index> active;
  RVector dev(m);
  for (const CountsTable& t : tables) {
    active.clear();
    for (Eigen::Index a = 0; a < m; ++a)
      if (setting_compatible(t.setting, ops[static_cast<std::size_t>(a)])) active.push_back(a);
    for (const auto& [bits, c] : t.counts) {
      for (Eigen::Index a : active) dev(a) = parity_sign(bits, supports[static_cast<std::size_t>(a)]) - mean(a);
      for (Eigen::Index a : active)
        for (Eigen::Index b : active) acc(a, b) += static_cast<double>(c) * dev(a) * dev(b);
    }
  }
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) acc(a, b) /= shots(a) * shots(b);
  return acc;
}

BootstrapResult bootstrap(std::span<const CountsTable> tables, const TableStatistic& statistic, int resamples,
                          std::uint64_t seed) {
  if (resamples < 100) throw ConfigError("bootstrap needs at least 100 resamples");
  std::mt19937_64 rng(seed);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  std::vector<CountsTable> draw(tables.begin(), tables.end());
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t t = 0; t < tables.size(); ++t) {
      // Multinomial resample as a chain of conditional binomials.
      draw[t].counts.clear();
      std::uint64_t left = tables[t].shots;
      std::uint64_t mass = 0;
      for (const auto& [bits, c] : tables[t].counts) mass += c;
      for (const auto& [bits, c] : tables[t].counts) {
        if (left == 0) break;
        std::uint64_t k = left;
        if (c < mass) {
          std::binomial_distribution<std::uint64_t> bin(left, static_cast<double>(c) / static_cast<double>(mass));
          k = bin(rng);
        }
        if (k > 0) draw[t].counts[bits] = k;
        left -= k;
        mass -= c;
      }
    }
    values.push_back(statistic(draw));
  }
  BootstrapResult out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

nlohmann::json to_json(const CountsTable& table) {
  nlohmann::json j;
  if (table.setting.label) {
    j["label"] = nlohmann::json::array();
    for (Pauli p : *table.setting.label) j["label"].push_back(std::string(1, to_char(p)));
  } else {
    j["label"] = nullptr;
  }
  j["axes"] = nlohmann::json::array();
  for (Pauli p : table.setting.axes) j["axes"].push_back(std::string(1, to_char(p)));
  j["shots"] = table.shots;
  j["counts"] = nlohmann::json::object();
  for (const auto& [bits, c] : table.counts) j["counts"][bits] = c;
  return j;
}

namespace {

Pauli axis_from_json(const nlohmann::json& v, std::size_t line) {
  if (!v.is_string() || v.get<std::string>().size() != 1) throw SchemaError("axis must be a one-letter string", line);
  const char c = v.get<std::string>()[0];
  if (c != 'X' && c != 'Y' && c != 'Z') throw SchemaError("axis must be X, Y or Z", line);
  return pauli_from_char(c);
}

}  // namespace

CountsTable counts_table_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError("record must be an object", line);
  for (const char* key : {"axes", "shots", "counts"})
    if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'", line);
  CountsTable t;
  if (!j["axes"].is_array() || j["axes"].empty()) throw SchemaError("'axes' must be a nonempty array", line);
  for (const auto& a : j["axes"]) t.setting.axes.push_back(axis_from_json(a, line));
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_array() || j["label"].size() != 3) throw SchemaError("'label' must have three axes", line);
    AxisLabel l{};
    for (std::size_t k = 0; k < 3; ++k) l[k] = axis_from_json(j["label"][k], line);
    if (scheme_setting(t.setting.num_qubits(), l).axes != t.setting.axes)
      throw SchemaError("'axes' do not follow the period-3 rule for 'label'", line);
    t.setting.label = l;
  }
  if (!j["shots"].is_number_unsigned()) throw SchemaError("'shots' must be a nonnegative integer", line);
  t.shots = j["shots"].get<std::uint64_t>();
  if (!j["counts"].is_object()) throw SchemaError("'counts' must be an object", line);
  for (const auto& [bits, c] : j["counts"].items()) {
    if (!c.is_number_unsigned()) throw SchemaError("count for '" + bits + "' must be a nonnegative integer", line);
    t.counts[bits] = c.get<std::uint64_t>();
  }
  try {
    t.validate();
  } catch (const AnalysisError& e) {
    throw SchemaError(e.what(), line);
  }
  return t;
}

void write_counts_jsonl(std::ostream& out, std::span<const CountsTable> tables) {
  for (const CountsTable& t : tables) out << to_json(t).dump() << '\n';
}

std::vector<CountsTable> read_counts_jsonl(std::istream& in) {
  std::vector<CountsTable> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), line);
    }
    out.push_back(counts_table_from_json(j, line));
  }
  return out;
}

}  // namespace gmecert
