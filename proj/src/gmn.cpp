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

#include "gmecert/gmn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace gmecert {

namespace {

constexpr int kMaxWitnessQubits = 5;
// Eigenvalues of rho at or below this count as outside its support.
constexpr double kSupportThreshold = 1e-9;
constexpr double kFeasibilityTolerance = 1e-8;

std::string label_name(const AxisLabel& l) {
  return {to_char(l[0]), to_char(l[1]), to_char(l[2])};
}

std::string outcome_bits(std::uint64_t o, int k) {
  std::string s;
  for (int q = 0; q < k; ++q) s.push_back(bit_of(o, q, k) ? '1' : '0');
  return s;
}

double min_eigenvalue(const CMatrix& h) {
  return Eigen::SelfAdjointEigenSolver<CMatrix>(h, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

// The witness feasibility constraints shared by design and sparsification.
// Returns the R_A variables in Bipartition::all order.
std::vector<SdpVar> add_witness_constraints(SdpProblem& p, SdpVar c, const ProjectorBasis& basis,
                                            double coefficient_bound = 1.0) {
  const int d = static_cast<int>(dim_of(basis.k));
  const CMatrix id = CMatrix::Identity(d, d);
  std::vector<SdpVar> rs;
  for (const Bipartition& cut : Bipartition::all(basis.k)) {
    const SdpVar r = p.add_hermitian("R_" + cut.to_string(), d);
    rs.push_back(r);
    MatrixExpr slack(d);
    for (std::size_t n = 0; n < basis.size(); ++n) slack.add_scaled_outer(c, static_cast<int>(n), basis.elements[n].ket);
    slack.add(r, -1.0, cut.index_mask());
    p.add_lmi(slack);
    p.add_lmi(MatrixExpr(d).add(r));
    p.add_lmi(MatrixExpr(d).add(r, -1.0).add_constant(id));
  }
  p.add_bounds(c, -coefficient_bound, coefficient_bound);
  return rs;
}

void validate_probs(const RVector& probs, const ProjectorBasis& basis) {
  if (probs.size() != static_cast<Eigen::Index>(basis.size()))
    throw ConfigError("target probabilities do not match the projector basis");
  if ((probs.array() < -1e-12).any()) throw ConfigError("target probabilities must be nonnegative");
  const auto block = static_cast<Eigen::Index>(dim_of(basis.k));
  for (Eigen::Index s = 0; s < probs.size(); s += block)
    if (std::abs(probs.segment(s, block).sum() - 1.0) > 1e-9)
      throw ConfigError("target probabilities of setting " + label_name(basis.elements[static_cast<std::size_t>(s)].label) +
                        " do not sum to one");
}

std::vector<CMatrix> certificate_from(const SdpSolution& s, std::size_t first) {
  return {s.values.begin() + static_cast<std::ptrdiff_t>(first), s.values.end()};
}

nlohmann::json solver_meta(const SdpSolution& s) {
  return {{"status", to_string(s.status)}, {"iterations", s.iterations}, {"duality_gap", s.duality_gap}};
}

}  // namespace

// ---- projector basis ------------------------------------------------------

CMatrix ProjectorBasis::projector(std::size_t i) const {
  const CVector& v = elements.at(i).ket;
  return v * v.adjoint();
}

RVector ProjectorBasis::probabilities(const DensityMatrix& rho) const {
  if (rho.num_qubits() != k) throw ConfigError("state size does not match the projector basis");
  RVector p(static_cast<Eigen::Index>(elements.size()));
  for (std::size_t n = 0; n < elements.size(); ++n) {
    const CVector& v = elements[n].ket;
    p(static_cast<Eigen::Index>(n)) = std::max(0.0, v.dot(rho.matrix() * v).real());
  }
  return p;
}

CMatrix ProjectorBasis::assemble(const RVector& coefficients) const {
  if (coefficients.size() != static_cast<Eigen::Index>(elements.size()))
    throw ConfigError("coefficient count does not match the projector basis");
  const auto d = static_cast<Eigen::Index>(dim_of(k));
  CMatrix q = CMatrix::Zero(d, d);
  for (std::size_t n = 0; n < elements.size(); ++n) {
    const double c = coefficients(static_cast<Eigen::Index>(n));
    if (c != 0.0) q += c * elements[n].ket * elements[n].ket.adjoint();
  }
  return q;
}

ProjectorBasis projector_basis(int k, int phase) {
  if (k < 2 || k > kMaxWitnessQubits) throw ConfigError("projector basis supports 2 to 5 sites");
  if (phase < 0 || phase > 2) throw ConfigError("projector basis phase must be 0, 1 or 2");
  ProjectorBasis b{k, phase, {}};
  for (const AxisLabel& label : all_axis_labels()) {
    std::vector<Pauli> axes(static_cast<std::size_t>(k));
    for (int p = 0; p < k; ++p) axes[static_cast<std::size_t>(p)] = label[static_cast<std::size_t>((phase + p) % 3)];
    for (std::uint64_t o = 0; o < dim_of(k); ++o) {
      CVector v = CVector::Ones(1);
      for (int q = 0; q < k; ++q) {
        const Eigen::Vector2cd e = axis_eigenvector(axes[static_cast<std::size_t>(q)], bit_of(o, q, k));
        CVector next(v.size() * 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) next.segment(2 * i, 2) = v(i) * e;
        v = std::move(next);
      }
      b.elements.push_back({outcome_bits(o, k), label, axes, std::move(v)});
    }
  }
  return b;
}

std::size_t WitnessOperator::nonzero_count(double threshold) const {
  return static_cast<std::size_t>((coefficients.array().abs() > threshold).count());
}

const char* to_string(GmnMethod m) {
  switch (m) {
    case GmnMethod::PureFormula: return "pure_formula";
    case GmnMethod::Sdp: return "sdp";
    case GmnMethod::WitnessEvaluation: return "witness_evaluation";
  }
  return "unknown";
}

const char* to_string(WitnessSource s) {
  switch (s) {
    case WitnessSource::Data: return "data";
    case WitnessSource::PureModel: return "pure_model";
    case WitnessSource::MixedModel: return "mixed_model";
  }
  return "unknown";
}

// ---- negativity measure ---------------------------------------------------

GmnResult gmn_pure(const PureState& psi) {
  const int k = psi.num_qubits();
  if (k < 2 || k > 10) throw ConfigError("pure-state GMN supports 2 to 10 qubits");
  double best = std::numeric_limits<double>::infinity();
  for (const Bipartition& cut : Bipartition::all(k)) {
    std::vector<int> side = cut.side_a();
    if (side.size() * 2 > static_cast<std::size_t>(k)) side = cut.side_b();
    const DensityMatrix rho_a = reduce(psi, side);
    const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(rho_a.matrix(), Eigen::EigenvaluesOnly).eigenvalues();
    const double s = ev.cwiseMax(0.0).cwiseSqrt().sum();
    best = std::min(best, 0.5 * (s * s - 1.0));
  }
  return {std::max(best, 0.0), GmnMethod::PureFormula, std::nullopt, std::nullopt};
}

SdpProblem gmn_problem(const DensityMatrix& rho, const GmnSdpOptions& options) {
  const int k = rho.num_qubits();
  if (k < 2 || k > kMaxWitnessQubits) throw ConfigError("GMN SDP supports 2 to 5 qubits");
  const int d = static_cast<int>(dim_of(k));
  const CMatrix id = CMatrix::Identity(d, d);
  // A rank-deficient rho leaves the witness unbounded off its support and the
  // dual program without interior points. Only V^dag W V matters there, so the
  // witness constraint is compressed to the support V of rho.
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < d; ++i)
    if (es.eigenvalues()(i) > kSupportThreshold) support.push_back(i);
  const bool compress = !options.bounded_slack && static_cast<int>(support.size()) < d;
  SdpProblem p;
  if (!compress) {
    const SdpVar w = p.add_hermitian("W", d);
    p.set_objective(SdpSense::Maximize, ScalarExpr().add_trace(w, rho.matrix(), -1.0));
    for (const Bipartition& cut : Bipartition::all(k)) {
      const SdpVar r = p.add_hermitian("R_" + cut.to_string(), d);
      p.add_lmi(MatrixExpr(d).add(w).add(r, -1.0, cut.index_mask()));
      p.add_lmi(MatrixExpr(d).add(r));
      p.add_lmi(MatrixExpr(d).add(r, -1.0).add_constant(id));
      if (options.bounded_slack)
        p.add_lmi(MatrixExpr(d).add(w, -1.0).add(r, 1.0, cut.index_mask()).add_constant(id));
    }
    return p;
  }
  const int rank = static_cast<int>(support.size());
  CMatrix v(d, rank);
  CMatrix rho_support = CMatrix::Zero(rank, rank);
  for (int i = 0; i < rank; ++i) {
    v.col(i) = es.eigenvectors().col(support[static_cast<std::size_t>(i)]);
    rho_support(i, i) = es.eigenvalues()(support[static_cast<std::size_t>(i)]);
  }
  const SdpVar w = p.add_hermitian("W_support", rank);
  p.set_objective(SdpSense::Maximize, ScalarExpr().add_trace(w, rho_support, -1.0));
  for (const Bipartition& cut : Bipartition::all(k)) {
    const SdpVar r = p.add_hermitian("R_" + cut.to_string(), d);
    p.add_lmi(MatrixExpr(rank).add(w).add_compressed(r, v, -1.0, cut.index_mask()));
    p.add_lmi(MatrixExpr(d).add(r));
    p.add_lmi(MatrixExpr(d).add(r, -1.0).add_constant(id));
  }
  return p;
}

GmnResult gmn_sdp(const DensityMatrix& rho, const GmnSdpOptions& options) {
  const SdpSolution s = solve(gmn_problem(rho, options), options.solver);
  if (s.status != SdpStatus::Optimal)
    throw SolverError(std::string("GMN semidefinite program: ") + to_string(s.status));
  return {std::max(s.primal_value, 0.0), GmnMethod::Sdp, std::nullopt, std::nullopt};
}

// ---- accessible witnesses -------------------------------------------------

SdpProblem witness_design_problem(const RVector& target_probs, const ProjectorBasis& basis, double coefficient_bound) {
  validate_probs(target_probs, basis);
  if (!(coefficient_bound > 0.0)) throw ConfigError("coefficient bound must be positive");
  SdpProblem p;
  const SdpVar c = p.add_real("c", static_cast<int>(basis.size()));
  ScalarExpr obj;
  for (Eigen::Index n = 0; n < target_probs.size(); ++n)
    if (target_probs(n) != 0.0) obj.add(c, static_cast<int>(n), -target_probs(n));
  p.set_objective(SdpSense::Maximize, obj);
  add_witness_constraints(p, c, basis, coefficient_bound);
  return p;
}

WitnessOperator design_witness(const RVector& target_probs, const ProjectorBasis& basis,
                               const DesignOptions& options) {
  const SdpSolution s =
      solve(witness_design_problem(target_probs, basis, options.coefficient_bound), options.solver);
  if (s.status != SdpStatus::Optimal)
    throw SolverError(std::string("witness design: ") + to_string(s.status));
  WitnessOperator w;
  w.k = basis.k;
  w.phase = basis.phase;
  w.coefficients = s.values[0].col(0).real();
  w.bound_at_design = witness_value(w, target_probs);
  w.certificate = certificate_from(s, 1);
  w.design_meta = {{"design", solver_meta(s)}};
  return w;
}

WitnessOperator design_witness(const DensityMatrix& target, int phase, const DesignOptions& options) {
  const ProjectorBasis basis = projector_basis(target.num_qubits(), phase);
  return design_witness(basis.probabilities(target), basis, options);
}

double witness_value(const WitnessOperator& witness, const RVector& probs) {
  if (probs.size() != witness.coefficients.size()) throw ConfigError("probabilities do not match the witness");
  return -witness.coefficients.dot(probs);
}

WitnessOperator sparsify_witness(const WitnessOperator& witness, const RVector& target_probs,
                                 const SparsifyOptions& options) {
  if (!(options.epsilon > 0.0) || options.iterations < 0) throw ConfigError("invalid sparsification parameters");
  const ProjectorBasis basis = projector_basis(witness.k, witness.phase);
  validate_probs(target_probs, basis);
  const RVector c0 = witness.coefficients;
  const int n = static_cast<int>(c0.size());
  // Keep a hair of margin so rounding in the solver cannot overshoot epsilon.
  const double budget = options.epsilon * (1.0 - 1e-5);

  WitnessOperator current = witness;
  nlohmann::json history = nlohmann::json::array();
  for (int it = 0; it < options.iterations; ++it) {
    SdpProblem p;
    const SdpVar c = p.add_real("c", n);
    const SdpVar t = p.add_real("t", n);
    // Weights scaled to a largest value of one; the minimizer is unchanged and
    // the solver sees a well-scaled objective.
    const RVector weight = (current.coefficients.cwiseAbs().array() + options.epsilon).inverse().matrix();
    const RVector scaled = weight / weight.maxCoeff();
    ScalarExpr obj;
    for (int i = 0; i < n; ++i) obj.add(t, i, scaled(i));
    p.set_objective(SdpSense::Minimize, obj);
    for (int i = 0; i < n; ++i) {
      p.add_inequality(ScalarExpr().add(t, i).add(c, i, -1.0));
      p.add_inequality(ScalarExpr().add(t, i).add(c, i, 1.0));
    }
    ScalarExpr loss(budget + c0.dot(target_probs));
    for (int i = 0; i < n; ++i)
      if (target_probs(i) != 0.0) loss.add(c, i, -target_probs(i));
    p.add_inequality(loss);
    add_witness_constraints(p, c, basis);

    const SdpSolution s = solve(p, options.solver);
    nlohmann::json& entry = history.emplace_back(solver_meta(s));
    entry["accepted"] = false;
    // A stalled solve still yields a usable witness when its own constraints
    // hold; the duality gap only certifies the sparsity objective.
    const bool usable = s.status == SdpStatus::Optimal ||
                        ((s.status == SdpStatus::NumericalError || s.status == SdpStatus::MaxIterations) &&
                         s.max_violation <= kFeasibilityTolerance);
    if (!usable) break;
    WitnessOperator next = current;
    next.coefficients = s.values[0].col(0).real();
    entry["nonzero"] = next.nonzero_count(options.zero_threshold);
    if (next.nonzero_count(options.zero_threshold) > current.nonzero_count(options.zero_threshold)) break;
    entry["accepted"] = true;
    next.bound_at_design = witness_value(next, target_probs);
    next.certificate = certificate_from(s, 2);
    current = std::move(next);
  }
  current.design_meta["sparsify"] = {{"epsilon", options.epsilon},
                                     {"iterations", options.iterations},
                                     {"solves", history},
                                     {"nonzero_before", witness.nonzero_count(options.zero_threshold)},
                                     {"nonzero_after", current.nonzero_count(options.zero_threshold)}};
  return current;
}

WitnessCheck verify_witness(const WitnessOperator& witness, double tolerance) {
  const ProjectorBasis basis = projector_basis(witness.k, witness.phase);
  const CMatrix q = basis.assemble(witness.coefficients);
  const std::vector<Bipartition> cuts = Bipartition::all(witness.k);
  const auto d = static_cast<Eigen::Index>(dim_of(witness.k));
  const CMatrix id = CMatrix::Identity(d, d);
  WitnessCheck out;
  out.max_abs_coefficient = witness.coefficients.cwiseAbs().maxCoeff();
  double lmin = std::numeric_limits<double>::infinity();
  if (witness.certificate.size() == cuts.size()) {
    for (std::size_t a = 0; a < cuts.size(); ++a) {
      const CMatrix& r = witness.certificate[a];
      lmin = std::min({lmin, min_eigenvalue(q - partial_transpose(r, cuts[a])), min_eigenvalue(r),
                       min_eigenvalue(id - r)});
    }
  } else {
    // No stored certificate: find the best one per cut,
    // max t  s.t.  Q - R^{T_A} >= t 1,  0 <= R <= 1.
    for (const Bipartition& cut : cuts) {
      SdpProblem p;
      const SdpVar t = p.add_real("t", 1);
      const SdpVar r = p.add_hermitian("R", static_cast<int>(d));
      p.set_objective(SdpSense::Maximize, ScalarExpr().add(t, 0));
      p.add_lmi(MatrixExpr(static_cast<int>(d)).add_constant(q).add(r, -1.0, cut.index_mask()).add_scaled(t, 0, -id));
      p.add_lmi(MatrixExpr(static_cast<int>(d)).add(r));
      p.add_lmi(MatrixExpr(static_cast<int>(d)).add(r, -1.0).add_constant(id));
      const SdpSolution s = solve(p);
      if (s.status != SdpStatus::Optimal) throw SolverError(std::string("witness recertification: ") + to_string(s.status));
      lmin = std::min(lmin, s.primal_value);
    }
  }
  out.min_eigenvalue = lmin;
  out.ok = lmin >= -tolerance && out.max_abs_coefficient <= 1.0 + tolerance;
  return out;
}

GmnResult evaluate_witness(const WitnessOperator& witness, std::span<const CountsTable> tables,
                           const EvaluateOptions& options) {
  if (static_cast<int>(witness.group.size()) != witness.k) throw ConfigError("witness has no site group");
  if (tables.empty()) throw AnalysisError("no counts to evaluate the witness on");
  const ProjectorBasis basis = projector_basis(witness.k, witness.phase);
  std::vector<CountsTable> local;
  for (const CountsTable& t : tables) local.push_back(marginalize(t, witness.group));

  std::string group_name;
  for (int s : witness.group) group_name += (group_name.empty() ? "" : ",") + std::to_string(s + 1);
  const auto block = static_cast<std::size_t>(dim_of(witness.k));
  for (std::size_t n = 0; n < basis.size(); n += block) {
    const bool found = std::any_of(local.begin(), local.end(),
                                   [&](const CountsTable& t) { return t.setting.axes == basis.elements[n].axes; });
    if (!found)
      throw AnalysisError("group {" + group_name + "} lacks setting " + label_name(basis.elements[n].label));
  }

  const RVector& c = witness.coefficients;
  const auto statistic = [&](std::span<const CountsTable> draw) {
    std::map<std::vector<Pauli>, std::pair<std::map<std::string, double>, double>> pooled;
    for (const CountsTable& t : draw) {
      auto& [counts, shots] = pooled[t.setting.axes];
      for (const auto& [bits, cnt] : t.counts) counts[bits] += static_cast<double>(cnt);
      shots += static_cast<double>(t.shots);
    }
    double s = 0.0;
    for (std::size_t n = 0; n < basis.size(); ++n) {
      const double cn = c(static_cast<Eigen::Index>(n));
      if (cn == 0.0) continue;
      const auto& [counts, shots] = pooled.at(basis.elements[n].axes);
      if (shots <= 0.0) continue;
      const auto it = counts.find(basis.elements[n].outcome);
      if (it != counts.end()) s -= cn * it->second / shots;
    }
    return s;
  };
  const double value = statistic(local);
  double err = 0.0;
  if (options.resamples > 0) err = bootstrap(local, statistic, options.resamples, options.seed).std_error;
  return {value, GmnMethod::WitnessEvaluation, witness, err};
}

// ---- persistence ----------------------------------------------------------

nlohmann::json to_json(const WitnessOperator& w) {
  const ProjectorBasis basis = projector_basis(w.k, w.phase);
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t n = 0; n < basis.size(); ++n) {
    const double c = w.coefficients(static_cast<Eigen::Index>(n));
    if (c == 0.0) continue;
    coefs.push_back({{"s", basis.elements[n].outcome}, {"alpha", label_name(basis.elements[n].label)}, {"c", c}});
  }
  nlohmann::json group = nlohmann::json::array();
  for (int s : w.group) group.push_back(s + 1);
  return {{"schema", "gmecert.witness/1"},
          {"k", w.k},
          {"group", group},
          {"phase", w.phase},
          {"coefficients", coefs},
          {"bound_at_design", w.bound_at_design},
          {"design_meta", w.design_meta}};
}

WitnessOperator witness_from_json(const nlohmann::json& j) {
  try {
    WitnessOperator w;
    w.k = j.at("k").get<int>();
    w.phase = j.at("phase").get<int>();
    const ProjectorBasis basis = projector_basis(w.k, w.phase);
    for (const auto& s : j.at("group")) w.group.push_back(s.get<int>() - 1);
    if (!w.group.empty() && static_cast<int>(w.group.size()) != w.k) throw SchemaError("group size differs from k", 0);
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (std::size_t n = 0; n < basis.size(); ++n)
      index[{label_name(basis.elements[n].label), basis.elements[n].outcome}] = n;
    w.coefficients = RVector::Zero(static_cast<Eigen::Index>(basis.size()));
    for (const auto& e : j.at("coefficients")) {
      const auto it = index.find({e.at("alpha").get<std::string>(), e.at("s").get<std::string>()});
      if (it == index.end()) throw SchemaError("unknown projector in witness coefficients", 0);
      w.coefficients(static_cast<Eigen::Index>(it->second)) = e.at("c").get<double>();
    }
    w.bound_at_design = j.at("bound_at_design").get<double>();
    if (j.contains("design_meta")) w.design_meta = j.at("design_meta");
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("witness JSON: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("witness JSON: ") + e.what(), 0);
  }
}

// ---- sweeps ---------------------------------------------------------------

WitnessSweepResult witness_sweep(std::span<const WitnessSweepStep> steps, int k, const WitnessSweepOptions& options) {
  if (k < 2 || k > kMaxWitnessQubits) throw ConfigError("witness sweeps support k = 2 to 5");
  struct Task {
    std::size_t step;
    int start;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const WitnessSweepStep& st = steps[i];
    if (!st.mixed_model) throw ConfigError("witness sweep step lacks a design model");
    const int n = st.mixed_model->num_qubits();
    if (n < k) throw ConfigError("chain is shorter than the witness group");
    for (int s = 0; s + k <= n; ++s) tasks.push_back({i, s});
  }
  struct Output {
    std::vector<WitnessRow> rows;
    WitnessOperator witness;
  };
  std::vector<Output> outputs(tasks.size());

  const auto run = [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const WitnessSweepStep& st = steps[task.step];
    std::vector<int> group(static_cast<std::size_t>(k));
    for (int p = 0; p < k; ++p) group[static_cast<std::size_t>(p)] = task.start + p;
    const ProjectorBasis basis = projector_basis(k, task.start % 3);
    const RVector mixed_probs = basis.probabilities(st.mixed_model->reduce(group));
    WitnessOperator w = design_witness(mixed_probs, basis, options.design);
    if (options.sparsify) w = sparsify_witness(w, mixed_probs, options.sparsify_options);
    w.group = group;
    w.design_meta["t_ms"] = st.t_ms;
    Output& out = outputs[ti];
    if (!st.tables.empty()) {
      EvaluateOptions eo = options.evaluate;
      eo.seed = derive_seed(options.evaluate.seed,
                            "witness/" + std::to_string(st.t_ms) + "/" + std::to_string(k) + "/" + std::to_string(task.start));
      const GmnResult r = evaluate_witness(w, st.tables, eo);
      out.rows.push_back({st.t_ms, k, task.start, r.value, r.std_error.value_or(0.0), WitnessSource::Data});
    }
    if (st.pure_model) {
      const RVector pp = basis.probabilities(st.pure_model->reduce(group));
      out.rows.push_back({st.t_ms, k, task.start, witness_value(w, pp), 0.0, WitnessSource::PureModel});
    }
    out.rows.push_back({st.t_ms, k, task.start, witness_value(w, mixed_probs), 0.0, WitnessSource::MixedModel});
    out.witness = std::move(w);
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(tasks.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          try {
            run(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  WitnessSweepResult result;
  for (Output& o : outputs) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    result.witnesses.push_back(std::move(o.witness));
  }
  return result;
}

void write_witness_csv(std::ostream& out, std::span<const WitnessRow> rows) {
  out << "t_ms,k,group_start,S,std_error,source\n";
  out.precision(10);
  for (const WitnessRow& r : rows)
    out << r.t_ms << ',' << r.k << ',' << r.group_start + 1 << ',' << r.value << ',' << r.std_error << ','
        << to_string(r.source) << '\n';
}

}  // namespace gmecert
