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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gmecert/types.hpp"

namespace gmecert {

// Handle to a decision variable of an SdpProblem.
struct SdpVar {
  int index = -1;
};

enum class SdpVarKind { Hermitian, Real };

// Real-linear functional of the variables plus a constant.
class ScalarExpr {
 public:
  struct Term {
    int var;
    int param;
    double coef;
  };

  ScalarExpr() = default;
  explicit ScalarExpr(double constant) : constant_(constant) {}

  // coef * x[index] for a real vector variable.
  ScalarExpr& add(SdpVar real_var, int index, double coef = 1.0);
  // coef * Re Tr(X h) for a Hermitian variable X and Hermitian h.
  ScalarExpr& add_trace(SdpVar hermitian_var, const CMatrix& h, double coef = 1.0);
  ScalarExpr& add_constant(double c);

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }

 private:
  friend class SdpProblem;
  std::vector<Term> terms_;
  double constant_ = 0.0;
  // Resolved lazily: hermitian trace terms need the variable dimension.
  struct TraceTerm {
    int var;
    CMatrix h;
    double coef;
  };
  std::vector<TraceTerm> trace_terms_;
};

// Affine Hermitian-matrix-valued expression of a fixed size.
class MatrixExpr {
 public:
  explicit MatrixExpr(int dim);

  int dim() const { return dim_; }

  // coef * X, or coef * X^{T_A} when `transpose_mask` selects amplitude-index
  // bits to swap between row and column.
  MatrixExpr& add(SdpVar hermitian_var, double coef = 1.0, std::uint64_t transpose_mask = 0);
  // coef * V^dagger X^{T_A} V with V of size d x dim(); X is d x d.
  MatrixExpr& add_compressed(SdpVar hermitian_var, const CMatrix& v, double coef = 1.0,
                             std::uint64_t transpose_mask = 0);
  // x[index] * h for a real vector variable.
  MatrixExpr& add_scaled(SdpVar real_var, int index, const CMatrix& h);
  // x[index] * weight * v v^dagger.
  MatrixExpr& add_scaled_outer(SdpVar real_var, int index, const CVector& v, double weight = 1.0);
  MatrixExpr& add_constant(const CMatrix& c);

 private:
  friend class SdpProblem;
  struct VarTerm {
    int var;
    double coef;
    std::uint64_t mask;
  };
  struct CompressedTerm {
    int var;
    double coef;
    std::uint64_t mask;
    CMatrix v;
  };
  struct ScaledTerm {
    int var;
    int param;
    CMatrix h;
  };
  struct OuterTerm {
    int var;
    int param;
    CVector v;
    double weight;
  };
  int dim_;
  std::vector<VarTerm> var_terms_;
  std::vector<CompressedTerm> compressed_terms_;
  std::vector<ScaledTerm> scaled_terms_;
  std::vector<OuterTerm> outer_terms_;
  CMatrix constant_;
};

enum class SdpSense { Minimize, Maximize };

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIterations, NumericalError };

const char* to_string(SdpStatus s);

struct SdpOptions {
  double tolerance = 1e-8;
  // Absolute bound on |primal - dual| required for an optimal verdict.
  double gap_tolerance = 1e-7;
  int max_iterations = 200;
  bool record_trace = false;
};

struct SdpIterate {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double step_primal = 0.0;  // step lengths taken after this iterate
  double step_dual = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::MaxIterations;
  // Objective at the returned variables, in the problem's own sense.
  double primal_value = 0.0;
  // Bound from the dual iterate: an upper bound when maximizing.
  double dual_value = 0.0;
  double duality_gap = 0.0;
  // Largest violation of any constraint at the returned variables.
  double max_violation = 0.0;
  int iterations = 0;
  // One entry per variable: d x d for Hermitian, n x 1 (imaginary part zero)
  // for real vector variables.
  std::vector<CMatrix> values;
  std::vector<SdpIterate> trace;
};

// Semidefinite program over Hermitian matrix and real vector variables.
// Constraints are LMIs (expr >= 0 in the Loewner order), scalar
// inequalities (expr >= 0) and scalar equalities (expr == 0).
class SdpProblem {
 public:
  // Default cap admits the five-qubit negativity problem.
  static constexpr std::int64_t kDefaultParameterCap = 40000;

  SdpVar add_hermitian(std::string name, int dim);
  SdpVar add_real(std::string name, int count);

  void set_objective(SdpSense sense, ScalarExpr objective);
  void add_lmi(const MatrixExpr& expr);
  void add_inequality(const ScalarExpr& expr);
  void add_equality(const ScalarExpr& expr);
  // lo <= x[i] <= hi for every entry of a real vector variable.
  void add_bounds(SdpVar real_var, double lo, double hi);

  int num_variables() const { return static_cast<int>(vars_.size()); }
  const std::string& variable_name(SdpVar v) const;
  SdpVarKind variable_kind(SdpVar v) const;
  int variable_dim(SdpVar v) const;
  // Real parameters of one variable: d^2 for Hermitian d x d, n for real.
  int variable_params(SdpVar v) const;
  std::int64_t total_params() const { return total_params_; }
  SdpSense sense() const { return sense_; }
  std::size_t num_lmis() const { return lmis_.size(); }
  std::size_t num_inequalities() const { return ineqs_.size(); }
  std::size_t num_equalities() const { return eqs_.size(); }

  std::int64_t parameter_cap = kDefaultParameterCap;

  // Internal compiled representation; public for the solver and exporter.
  struct Entry {
    int row;
    int col;
    double value;
  };
  // Contribution of one global parameter to one embedded LMI block: either
  // sparse entries (full symmetric listing) or a weighted low-rank factor.
  struct ParamBlock {
    int param;
    std::vector<Entry> sparse;
    RMatrix factor;       // columns l_a
    RVector weights;      // G = sum_a w_a l_a l_a^T
    // Same term before embedding, sum_a w_a v_a v_a^dag, when it is a pure
    // outer-product sum (empty otherwise).
    CMatrix outer_vectors;
    RVector outer_weights;
    bool low_rank() const { return factor.cols() > 0; }
  };
  // coef * X^{T_A} of a whole Hermitian variable; its parameters also appear
  // as sparse ParamBlocks.
  struct WholeTerm {
    int var;
    double coef;
    std::uint64_t mask;
  };
  struct Lmi {
    int dim;          // real embedded size, twice the Hermitian size
    RMatrix constant; // embedded constant term
    std::vector<ParamBlock> params;
    std::vector<WholeTerm> whole_terms;
  };
  struct Linear {
    std::vector<std::pair<int, double>> coefs;  // (global param, coef)
    double constant;
  };

  const std::vector<Lmi>& lmis() const { return lmis_; }
  const std::vector<Linear>& inequalities() const { return ineqs_; }
  const std::vector<Linear>& equalities() const { return eqs_; }
  const RVector& objective_vector() const { return objective_; }
  double objective_constant() const { return objective_constant_; }
  int param_offset(SdpVar v) const;
  int param_var(int global_param) const;

  // Expands a raw parameter vector into per-variable values.
  std::vector<CMatrix> unpack(const RVector& x) const;
  // Real parameters of a Hermitian matrix in this problem's layout.
  static RVector hermitian_params(const CMatrix& h);
  static CMatrix hermitian_from_params(const double* p, int d);

 private:
  struct VarInfo {
    std::string name;
    SdpVarKind kind;
    int dim;
    int params;
    int offset;
  };
  const VarInfo& info(SdpVar v) const;
  Linear compile(const ScalarExpr& e) const;

  std::vector<VarInfo> vars_;
  std::int64_t total_params_ = 0;
  SdpSense sense_ = SdpSense::Minimize;
  RVector objective_;
  double objective_constant_ = 0.0;
  std::vector<Lmi> lmis_;
  std::vector<Linear> ineqs_;
  std::vector<Linear> eqs_;
};

// Primal-dual interior-point method on the real symmetric embedding.
// Deterministic; single-threaded.
SdpSolution solve(const SdpProblem& problem, const SdpOptions& options = {});

// Sparse SDPA (.dat-s) text of the embedded problem in the form
//   minimize c^T x  s.t.  sum_i F_i x_i - F_0 >= 0.
// Scalar inequalities share one diagonal block; each equality becomes two
// opposite diagonal entries. A maximization is exported negated.
void export_sdpa(std::ostream& out, const SdpProblem& problem);
std::string export_sdpa(const SdpProblem& problem);

// Reads sparse SDPA text into a minimization over one real vector variable.
SdpProblem import_sdpa(std::istream& in);

}  // namespace gmecert
