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

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmecert/measurement.hpp"
#include "gmecert/sdp.hpp"
#include "gmecert/state.hpp"
#include "gmecert/xy_model.hpp"

namespace gmecert {

// Rank-one projector |s, axes> onto a product of single-qubit axis
// eigenstates. Outcome bit '1' selects the +1 eigenvector.
struct ProjectorElement {
  std::string outcome;
  AxisLabel label;
  std::vector<Pauli> axes;
  CVector ket;
};

// Projectors measurable on k consecutive sites with the period-3 scheme:
// 27 labels times 2^k outcomes. Site p of the group uses label[(phase+p) % 3].
struct ProjectorBasis {
  int k = 0;
  int phase = 0;
  std::vector<ProjectorElement> elements;

  std::size_t size() const { return elements.size(); }
  CMatrix projector(std::size_t i) const;
  // Tr(P_n rho) for every element.
  RVector probabilities(const DensityMatrix& rho) const;
  // sum_n c_n P_n
  CMatrix assemble(const RVector& coefficients) const;
};

ProjectorBasis projector_basis(int k, int phase);

struct WitnessOperator {
  int k = 0;
  std::vector<int> group;  // 0-based sites
  int phase = 0;
  RVector coefficients;
  double bound_at_design = 0.0;
  nlohmann::json design_meta = nlohmann::json::object();
  // One R_A per bipartition in Bipartition::all order; empty after loading
  // from JSON.
  std::vector<CMatrix> certificate;

  std::size_t nonzero_count(double threshold = 1e-6) const;
};

enum class GmnMethod { PureFormula, Sdp, WitnessEvaluation };

const char* to_string(GmnMethod m);

struct GmnResult {
  double value = 0.0;
  GmnMethod method = GmnMethod::PureFormula;
  std::optional<WitnessOperator> witness;
  std::optional<double> std_error;
};

// Minimum bipartite negativity over all cuts, from Schmidt coefficients.
GmnResult gmn_pure(const PureState& psi);

struct GmnSdpOptions {
  // Adds W - R_A^{T_A} <= 1, the older bounded variant of the measure.
  bool bounded_slack = false;
  SdpOptions solver;
};

// max -Tr(W rho)  s.t.  W - R_A^{T_A} >= 0,  0 <= R_A <= 1  for every cut.
// The slack K_A = W - R_A^{T_A} is eliminated.
SdpProblem gmn_problem(const DensityMatrix& rho, const GmnSdpOptions& options = {});
GmnResult gmn_sdp(const DensityMatrix& rho, const GmnSdpOptions& options = {});

struct DesignOptions {
  SdpOptions solver;
  // Box on the coefficients. The default 1 keeps every witness term
  // bounded; for near-pure targets the box can bind and the bound then falls
  // short of the GMN. Larger values trade that gap for bigger coefficients.
  double coefficient_bound = 1.0;
};

// max -sum c p  s.t.  sum c P - R_A^{T_A} >= 0,  0 <= R_A <= 1,  |c_n| <= coefficient_bound.
SdpProblem witness_design_problem(const RVector& target_probs, const ProjectorBasis& basis,
                                  double coefficient_bound = 1.0);
// Probabilities must come from a simulated model state, never from measured
// frequencies; the overload taking a state enforces that.
WitnessOperator design_witness(const RVector& target_probs, const ProjectorBasis& basis,
                               const DesignOptions& options = {});
WitnessOperator design_witness(const DensityMatrix& target, int phase, const DesignOptions& options = {});

struct SparsifyOptions {
  double epsilon = 5e-3;
  int iterations = 3;
  double zero_threshold = 1e-6;
  SdpOptions solver;
};

// Reweighted l1 minimization of the coefficients under the same feasibility
// constraints and a bound loss of at most epsilon against the input.
WitnessOperator sparsify_witness(const WitnessOperator& witness, const RVector& target_probs,
                                 const SparsifyOptions& options = {});

// -sum c p
double witness_value(const WitnessOperator& witness, const RVector& probs);

struct WitnessCheck {
  double min_eigenvalue = 0.0;  // smallest eigenvalue over all certificate constraints
  double max_abs_coefficient = 0.0;
  bool ok = false;
};

// Recomputes the feasibility constraints from the stored certificate.
WitnessCheck verify_witness(const WitnessOperator& witness, double tolerance = 1e-7);

struct EvaluateOptions {
  int resamples = 200;
  std::uint64_t seed = 1;
};

// S = -sum c p_hat from the group's marginal frequencies, with a bootstrap
// error over whole tables.
GmnResult evaluate_witness(const WitnessOperator& witness, std::span<const CountsTable> tables,
                           const EvaluateOptions& options = {});

nlohmann::json to_json(const WitnessOperator& w);
WitnessOperator witness_from_json(const nlohmann::json& j);

struct WitnessSweepStep {
  double t_ms = 0.0;
  std::vector<CountsTable> tables;  // may be empty for simulation-only sweeps
  std::optional<MixedState> mixed_model;
  std::optional<MixedState> pure_model;
};

enum class WitnessSource { Data, PureModel, MixedModel };

const char* to_string(WitnessSource s);

struct WitnessRow {
  double t_ms = 0.0;
  int k = 0;
  int group_start = 0;  // 0-based
  double value = 0.0;
  double std_error = 0.0;
  WitnessSource source = WitnessSource::Data;
};

struct WitnessSweepOptions {
  bool sparsify = true;
  SparsifyOptions sparsify_options;
  DesignOptions design;
  EvaluateOptions evaluate;
  int threads = 1;
};

struct WitnessSweepResult {
  std::vector<WitnessRow> rows;
  std::vector<WitnessOperator> witnesses;  // one per (step, group)
};

// Per step and neighbouring k-group: design on the mixed model, optionally
// sparsify, then evaluate on data and both model states.
WitnessSweepResult witness_sweep(std::span<const WitnessSweepStep> steps, int k,
                                 const WitnessSweepOptions& options = {});

// Columns t_ms, k, group_start (1-based), S, std_error, source.
void write_witness_csv(std::ostream& out, std::span<const WitnessRow> rows);

}  // namespace gmecert
