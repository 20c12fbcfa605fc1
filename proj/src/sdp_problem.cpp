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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gmecert/sdp.hpp"

namespace gmecert {

namespace {

using CEntryMap = std::map<std::pair<int, int>, cplx>;

std::uint64_t swap_masked(std::uint64_t r, std::uint64_t c, std::uint64_t mask) {
  return (r & ~mask) | (c & mask);
}

// Nonzero entries of the Hermitian basis element for local parameter p.
void basis_entries(int p, int d, double coef, std::uint64_t mask, CEntryMap& out) {
  const int r = p / d;
  const int c = p % d;
  auto put = [&](int a, int b, cplx v) {
    const auto ua = static_cast<std::uint64_t>(a);
    const auto ub = static_cast<std::uint64_t>(b);
    const int ra = static_cast<int>(swap_masked(ua, ub, mask));
    const int cb = static_cast<int>(swap_masked(ub, ua, mask));
    out[{ra, cb}] += coef * v;
  };
  if (r == c) {
    put(r, r, 1.0);
  } else if (r < c) {
    put(r, c, 1.0);
    put(c, r, 1.0);
  } else {
    put(c, r, cplx(0.0, 1.0));
    put(r, c, cplx(0.0, -1.0));
  }
}

// [[Re, -Im], [Im, Re]]
RMatrix embed(const CMatrix& h) {
  const Eigen::Index d = h.rows();
  RMatrix e(2 * d, 2 * d);
  e.topLeftCorner(d, d) = h.real();
  e.bottomRightCorner(d, d) = h.real();
  e.bottomLeftCorner(d, d) = h.imag();
  e.topRightCorner(d, d) = -h.imag();
  return e;
}

std::vector<SdpProblem::Entry> embed_entries(const CEntryMap& m, int d) {
  std::map<std::pair<int, int>, double> acc;
  for (const auto& [rc, v] : m) {
    const auto [r, c] = rc;
    if (v.real() != 0.0) {
      acc[{r, c}] += v.real();
      acc[{d + r, d + c}] += v.real();
    }
    if (v.imag() != 0.0) {
      acc[{d + r, c}] += v.imag();
      acc[{r, d + c}] -= v.imag();
    }
  }
  std::vector<SdpProblem::Entry> out;
  for (const auto& [rc, v] : acc)
    if (v != 0.0) out.push_back({rc.first, rc.second, v});
  return out;
}

void check_hermitian(const CMatrix& h, int dim, const char* what) {
  if (h.rows() != dim || h.cols() != dim) throw ConfigError(std::string(what) + ": dimension mismatch");
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw ConfigError(std::string(what) + ": matrix is not Hermitian");
}

}  // namespace

// ---- expressions ----------------------------------------------------------

ScalarExpr& ScalarExpr::add(SdpVar real_var, int index, double coef) {
  terms_.push_back({real_var.index, index, coef});
  return *this;
}

ScalarExpr& ScalarExpr::add_trace(SdpVar hermitian_var, const CMatrix& h, double coef) {
  trace_terms_.push_back({hermitian_var.index, h, coef});
  return *this;
}

ScalarExpr& ScalarExpr::add_constant(double c) {
  constant_ += c;
  return *this;
}

MatrixExpr::MatrixExpr(int dim) : dim_(dim), constant_(CMatrix::Zero(dim, dim)) {
  if (dim < 1) throw ConfigError("matrix expression needs a positive dimension");
}

MatrixExpr& MatrixExpr::add(SdpVar hermitian_var, double coef, std::uint64_t transpose_mask) {
  const auto d = static_cast<std::uint64_t>(dim_);
  if (transpose_mask != 0 && ((d & (d - 1)) != 0 || transpose_mask >= d))
    throw ConfigError("transpose mask does not fit the matrix index range");
  var_terms_.push_back({hermitian_var.index, coef, transpose_mask});
  return *this;
}

MatrixExpr& MatrixExpr::add_compressed(SdpVar hermitian_var, const CMatrix& v, double coef,
                                       std::uint64_t transpose_mask) {
  if (v.cols() != dim_) throw ConfigError("compressed term: column count must match the expression");
  const auto d = static_cast<std::uint64_t>(v.rows());
  if (transpose_mask != 0 && ((d & (d - 1)) != 0 || transpose_mask >= d))
    throw ConfigError("transpose mask does not fit the matrix index range");
  compressed_terms_.push_back({hermitian_var.index, coef, transpose_mask, v});
  return *this;
}

MatrixExpr& MatrixExpr::add_scaled(SdpVar real_var, int index, const CMatrix& h) {
  check_hermitian(h, dim_, "scaled term");
  scaled_terms_.push_back({real_var.index, index, h});
  return *this;
}

MatrixExpr& MatrixExpr::add_scaled_outer(SdpVar real_var, int index, const CVector& v, double weight) {
  if (v.size() != dim_) throw ConfigError("outer-product term: dimension mismatch");
  outer_terms_.push_back({real_var.index, index, v, weight});
  return *this;
}

MatrixExpr& MatrixExpr::add_constant(const CMatrix& c) {
  check_hermitian(c, dim_, "constant term");
  constant_ += c;
  return *this;
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::MaxIterations: return "max_iterations";
    case SdpStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

// ---- problem --------------------------------------------------------------

SdpVar SdpProblem::add_hermitian(std::string name, int dim) {
  if (dim < 1) throw ConfigError("Hermitian variable needs a positive dimension");
  const std::int64_t p = static_cast<std::int64_t>(dim) * dim;
  if (total_params_ + p > parameter_cap) throw ConfigError("problem exceeds the parameter cap");
  vars_.push_back({std::move(name), SdpVarKind::Hermitian, dim, static_cast<int>(p), static_cast<int>(total_params_)});
  total_params_ += p;
  objective_.conservativeResize(total_params_);
  objective_.tail(p).setZero();
  return {static_cast<int>(vars_.size()) - 1};
}

SdpVar SdpProblem::add_real(std::string name, int count) {
  if (count < 1) throw ConfigError("real variable needs a positive size");
  if (total_params_ + count > parameter_cap) throw ConfigError("problem exceeds the parameter cap");
  vars_.push_back({std::move(name), SdpVarKind::Real, count, count, static_cast<int>(total_params_)});
  total_params_ += count;
  objective_.conservativeResize(total_params_);
  objective_.tail(count).setZero();
  return {static_cast<int>(vars_.size()) - 1};
}

const SdpProblem::VarInfo& SdpProblem::info(SdpVar v) const {
  if (v.index < 0 || v.index >= static_cast<int>(vars_.size())) throw ConfigError("unknown SDP variable");
  return vars_[static_cast<std::size_t>(v.index)];
}

const std::string& SdpProblem::variable_name(SdpVar v) const { return info(v).name; }
SdpVarKind SdpProblem::variable_kind(SdpVar v) const { return info(v).kind; }
int SdpProblem::variable_dim(SdpVar v) const { return info(v).dim; }
int SdpProblem::variable_params(SdpVar v) const { return info(v).params; }
int SdpProblem::param_offset(SdpVar v) const { return info(v).offset; }

int SdpProblem::param_var(int global_param) const {
  auto it = std::upper_bound(vars_.begin(), vars_.end(), global_param,
                             [](int p, const VarInfo& vi) { return p < vi.offset; });
  return static_cast<int>(it - vars_.begin()) - 1;
}

SdpProblem::Linear SdpProblem::compile(const ScalarExpr& e) const {
  std::map<int, double> acc;
  for (const ScalarExpr::Term& t : e.terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Real) throw ConfigError("scalar term on a Hermitian variable; use add_trace");
    if (t.param < 0 || t.param >= vi.params) throw ConfigError("scalar term index out of range");
    acc[vi.offset + t.param] += t.coef;
  }
  for (const ScalarExpr::TraceTerm& t : e.trace_terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Hermitian) throw ConfigError("trace term on a real variable");
    check_hermitian(t.h, vi.dim, "trace term");
    const RVector p = hermitian_params(t.h);
    const int d = vi.dim;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        // Diagonal params pair with h_rr; off-diagonal ones pick up a factor 2.
        const double w = (r == c ? 1.0 : 2.0) * p(r * d + c) * t.coef;
        if (w != 0.0) acc[vi.offset + r * d + c] += w;
      }
  }
  Linear out{{}, e.constant_};
  for (const auto& [p, v] : acc)
    if (v != 0.0) out.coefs.emplace_back(p, v);
  return out;
}

void SdpProblem::set_objective(SdpSense sense, ScalarExpr objective) {
  sense_ = sense;
  const Linear l = compile(objective);
  objective_.setZero(total_params_);
  for (const auto& [p, v] : l.coefs) objective_(p) = v;
  objective_constant_ = l.constant;
}

void SdpProblem::add_lmi(const MatrixExpr& expr) {
  const int d = expr.dim_;
  struct Acc {
    CEntryMap sparse;
    CMatrix dense;
    std::vector<std::pair<CVector, double>> outer;
  };
  std::map<int, Acc> acc;
  for (const MatrixExpr::VarTerm& t : expr.var_terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Hermitian || vi.dim != d)
      throw ConfigError("LMI term '" + vi.name + "' does not match the expression dimension");
    for (int p = 0; p < vi.params; ++p) basis_entries(p, d, t.coef, t.mask, acc[vi.offset + p].sparse);
  }
  for (const MatrixExpr::CompressedTerm& t : expr.compressed_terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Hermitian || vi.dim != t.v.rows())
      throw ConfigError("compressed LMI term '" + vi.name + "' does not match the variable dimension");
    // Each basis element is z e_a e_b^dag + conj(z) e_b e_a^dag (or a diagonal
    // e_a e_a^dag); with u = V^dag e_a, y = conj(z) V^dag e_b it compresses to
    // (u+y)(u+y)^dag/2 - (u-y)(u-y)^dag/2.
    for (int p = 0; p < vi.params; ++p) {
      CEntryMap m;
      basis_entries(p, vi.dim, t.coef, t.mask, m);
      auto& outer = acc[vi.offset + p].outer;
      for (const auto& [rc, z] : m) {
        const auto [a, b] = rc;
        if (a > b || z == cplx(0.0)) continue;
        const CVector u = t.v.row(a).adjoint();
        auto put = [&](CVector x, double w) {
          if (x.squaredNorm() > 0.0) outer.emplace_back(std::move(x), w);
        };
        if (a == b) {
          put(u, z.real());
          continue;
        }
        const CVector y = std::conj(z) * t.v.row(b).adjoint();
        put(u + y, 0.5);
        put(u - y, -0.5);
      }
    }
  }
  for (const MatrixExpr::ScaledTerm& t : expr.scaled_terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Real || t.param < 0 || t.param >= vi.params)
      throw ConfigError("scaled LMI term must index a real variable");
    Acc& a = acc[vi.offset + t.param];
    const Eigen::Index nnz = (t.h.array() != cplx(0.0)).count();
    if (nnz <= 2 * d) {
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          if (t.h(r, c) != cplx(0.0)) a.sparse[{r, c}] += t.h(r, c);
    } else {
      if (a.dense.size() == 0) a.dense = CMatrix::Zero(d, d);
      a.dense += t.h;
    }
  }
  for (const MatrixExpr::OuterTerm& t : expr.outer_terms_) {
    const VarInfo& vi = info({t.var});
    if (vi.kind != SdpVarKind::Real || t.param < 0 || t.param >= vi.params)
      throw ConfigError("outer-product LMI term must index a real variable");
    acc[vi.offset + t.param].outer.emplace_back(t.v, t.weight);
  }

  Lmi lmi{2 * d, embed(expr.constant_), {}, {}};
  for (const MatrixExpr::VarTerm& t : expr.var_terms_) {
    const bool compressed_too = std::any_of(expr.compressed_terms_.begin(), expr.compressed_terms_.end(),
                                            [&](const MatrixExpr::CompressedTerm& c) { return c.var == t.var; });
    if (!compressed_too) lmi.whole_terms.push_back({t.var, t.coef, t.mask});
  }
  for (auto& [param, a] : acc) {
    ParamBlock pb{param, {}, RMatrix(), RVector(), CMatrix(), RVector()};
    if (a.dense.size() == 0 && a.outer.empty()) {
      pb.sparse = embed_entries(a.sparse, d);
      if (pb.sparse.empty()) continue;
    } else if (a.dense.size() == 0 && a.sparse.empty()) {
      pb.factor.resize(2 * d, 2 * static_cast<Eigen::Index>(a.outer.size()));
      pb.weights.resize(pb.factor.cols());
      pb.outer_vectors.resize(d, static_cast<Eigen::Index>(a.outer.size()));
      pb.outer_weights.resize(static_cast<Eigen::Index>(a.outer.size()));
      for (std::size_t i = 0; i < a.outer.size(); ++i) {
        const auto& [v, w] = a.outer[i];
        const auto col = 2 * static_cast<Eigen::Index>(i);
        pb.factor.col(col) << v.real(), v.imag();
        pb.factor.col(col + 1) << -v.imag(), v.real();
        pb.weights(col) = w;
        pb.weights(col + 1) = w;
        pb.outer_vectors.col(static_cast<Eigen::Index>(i)) = v;
        pb.outer_weights(static_cast<Eigen::Index>(i)) = w;
      }
    } else {
      CMatrix h = a.dense.size() ? a.dense : CMatrix::Zero(d, d);
      for (const auto& [rc, v] : a.sparse) h(rc.first, rc.second) += v;
      for (const auto& [v, w] : a.outer) h += w * v * v.adjoint();
      const RMatrix e = embed(h);
      Eigen::SelfAdjointEigenSolver<RMatrix> es(e);
      const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < e.rows(); ++i)
        if (std::abs(es.eigenvalues()(i)) > 1e-13 * scale) keep.push_back(i);
      if (keep.empty()) continue;
      pb.factor.resize(e.rows(), static_cast<Eigen::Index>(keep.size()));
      pb.weights.resize(pb.factor.cols());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        pb.factor.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(keep[i]);
        pb.weights(static_cast<Eigen::Index>(i)) = es.eigenvalues()(keep[i]);
      }
    }
    lmi.params.push_back(std::move(pb));
  }
  lmis_.push_back(std::move(lmi));
}

void SdpProblem::add_inequality(const ScalarExpr& expr) { ineqs_.push_back(compile(expr)); }

void SdpProblem::add_equality(const ScalarExpr& expr) {
  Linear l = compile(expr);
  if (l.coefs.empty()) throw ConfigError("equality constraint has no variable terms");
  eqs_.push_back(std::move(l));
}

void SdpProblem::add_bounds(SdpVar real_var, double lo, double hi) {
  const VarInfo& vi = info(real_var);
  if (vi.kind != SdpVarKind::Real) throw ConfigError("bounds apply to real variables only");
  if (!(lo <= hi)) throw ConfigError("empty bound interval");
  for (int i = 0; i < vi.params; ++i) {
    add_inequality(ScalarExpr(-lo).add(real_var, i, 1.0));
    add_inequality(ScalarExpr(hi).add(real_var, i, -1.0));
  }
}

RVector SdpProblem::hermitian_params(const CMatrix& h) {
  const auto d = static_cast<int>(h.rows());
  RVector p(static_cast<Eigen::Index>(d) * d);
  for (int r = 0; r < d; ++r) {
    p(r * d + r) = h(r, r).real();
    for (int c = r + 1; c < d; ++c) {
      p(r * d + c) = h(r, c).real();
      p(c * d + r) = h(r, c).imag();
    }
  }
  return p;
}

CMatrix SdpProblem::hermitian_from_params(const double* p, int d) {
  CMatrix h(d, d);
  for (int r = 0; r < d; ++r) {
    h(r, r) = p[r * d + r];
    for (int c = r + 1; c < d; ++c) {
      h(r, c) = cplx(p[r * d + c], p[c * d + r]);
      h(c, r) = std::conj(h(r, c));
    }
  }
  return h;
}

std::vector<CMatrix> SdpProblem::unpack(const RVector& x) const {
  std::vector<CMatrix> out;
  for (const VarInfo& vi : vars_) {
    if (vi.kind == SdpVarKind::Hermitian) {
      out.push_back(hermitian_from_params(x.data() + vi.offset, vi.dim));
    } else {
      out.push_back(x.segment(vi.offset, vi.params).cast<cplx>());
    }
  }
  return out;
}

// ---- SDPA -----------------------------------------------------------------

void export_sdpa(std::ostream& out, const SdpProblem& problem) {
  const std::int64_t m = problem.total_params();
  const double sign = problem.sense() == SdpSense::Maximize ? -1.0 : 1.0;
  const auto& lmis = problem.lmis();
  const std::size_t lp_rows = problem.inequalities().size() + 2 * problem.equalities().size();
  const std::size_t nblocks = lmis.size() + (lp_rows > 0 ? 1 : 0);

  out << "\"gmecert real embedding: minimize c^T x s.t. sum F_i x_i - F_0 >= 0\n";
  if (sign < 0) out << "\"objective negated (source problem maximizes)\n";
  out << "\"objective constant " << std::setprecision(17) << sign * problem.objective_constant() << "\n";
  out << m << "\n" << nblocks << "\n";
  if (nblocks == 0) {
    out << "\n";
  } else {
    for (std::size_t b = 0; b < lmis.size(); ++b) out << lmis[b].dim << (b + 1 < nblocks ? " " : "");
    if (lp_rows > 0) out << "-" << lp_rows;
    out << "\n";
  }
  out << std::setprecision(17);
  for (std::int64_t i = 0; i < m; ++i) out << sign * problem.objective_vector()(i) << (i + 1 < m ? " " : "");
  out << "\n";

  struct Line {
    std::int64_t mat;
    std::size_t blk;
    int i;
    int j;
    double v;
  };
  std::vector<Line> lines;
  for (std::size_t b = 0; b < lmis.size(); ++b) {
    const SdpProblem::Lmi& l = lmis[b];
    for (int i = 0; i < l.dim; ++i)
      for (int j = i; j < l.dim; ++j)
        if (l.constant(i, j) != 0.0) lines.push_back({0, b + 1, i + 1, j + 1, -l.constant(i, j)});
    for (const SdpProblem::ParamBlock& pb : l.params) {
      if (pb.low_rank()) {
        const RMatrix g = pb.factor * pb.weights.asDiagonal() * pb.factor.transpose();
        const double tiny = 1e-15 * g.cwiseAbs().maxCoeff();
        for (int i = 0; i < l.dim; ++i)
          for (int j = i; j < l.dim; ++j)
            if (std::abs(g(i, j)) > tiny) lines.push_back({pb.param + 1, b + 1, i + 1, j + 1, g(i, j)});
      } else {
        for (const SdpProblem::Entry& e : pb.sparse)
          if (e.row <= e.col) lines.push_back({pb.param + 1, b + 1, e.row + 1, e.col + 1, e.value});
      }
    }
  }
  if (lp_rows > 0) {
    const std::size_t blk = lmis.size() + 1;
    int row = 1;
    auto emit = [&](const SdpProblem::Linear& l, double s) {
      if (l.constant != 0.0) lines.push_back({0, blk, row, row, -s * l.constant});
      for (const auto& [p, v] : l.coefs) lines.push_back({p + 1, blk, row, row, s * v});
      ++row;
    };
    for (const auto& l : problem.inequalities()) emit(l, 1.0);
    for (const auto& l : problem.equalities()) {
      emit(l, 1.0);
      emit(l, -1.0);
    }
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const Line& a, const Line& b) { return a.mat != b.mat ? a.mat < b.mat : a.blk < b.blk; });
  for (const Line& l : lines) out << l.mat << ' ' << l.blk << ' ' << l.i << ' ' << l.j << ' ' << l.v << '\n';
}

std::string export_sdpa(const SdpProblem& problem) {
  std::ostringstream s;
  export_sdpa(s, problem);
  return s.str();
}

SdpProblem import_sdpa(std::istream& in) {
  // Drop comments, then treat punctuation as whitespace.
  std::string body;
  double objective_constant = 0.0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) {
      const std::string key = "\"objective constant ";
      if (line.rfind(key, 0) == 0) objective_constant = std::stod(line.substr(key.size()));
      continue;
    }
    for (char& ch : line)
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    body += line;
    body += '\n';
  }
  std::istringstream s(body);
  long long m = 0;
  long long nblocks = 0;
  if (!(s >> m >> nblocks) || m < 0 || nblocks < 0) throw SchemaError("malformed SDPA header", 1);
  std::vector<long long> sizes(static_cast<std::size_t>(nblocks));
  for (auto& b : sizes)
    if (!(s >> b) || b == 0) throw SchemaError("malformed SDPA block structure", 1);
  RVector c(m);
  for (long long i = 0; i < m; ++i)
    if (!(s >> c(i))) throw SchemaError("malformed SDPA objective", 1);

  // F[mat][blk] as dense real symmetric matrices.
  std::vector<std::vector<RMatrix>> f(static_cast<std::size_t>(m + 1), std::vector<RMatrix>(sizes.size()));
  long long mat = 0;
  long long blk = 0;
  long long i = 0;
  long long j = 0;
  double v = 0.0;
  while (s >> mat >> blk >> i >> j >> v) {
    if (mat < 0 || mat > m || blk < 1 || blk > nblocks) throw SchemaError("SDPA entry out of range", 1);
    const long long n = std::llabs(sizes[static_cast<std::size_t>(blk - 1)]);
    if (i < 1 || j < 1 || i > n || j > n || (sizes[static_cast<std::size_t>(blk - 1)] < 0 && i != j))
      throw SchemaError("SDPA entry index out of range", 1);
    RMatrix& target = f[static_cast<std::size_t>(mat)][static_cast<std::size_t>(blk - 1)];
    if (target.size() == 0) target = RMatrix::Zero(n, n);
    target(i - 1, j - 1) = v;
    target(j - 1, i - 1) = v;
  }

  SdpProblem p;
  if (m == 0) {
    p.set_objective(SdpSense::Minimize, ScalarExpr(objective_constant));
    return p;
  }
  const SdpVar x = p.add_real("x", static_cast<int>(m));
  ScalarExpr obj(objective_constant);
  for (long long k = 0; k < m; ++k)
    if (c(k) != 0.0) obj.add(x, static_cast<int>(k), c(k));
  p.set_objective(SdpSense::Minimize, obj);
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    const long long n = std::llabs(sizes[b]);
    if (sizes[b] > 0) {
      MatrixExpr e(static_cast<int>(n));
      if (f[0][b].size()) e.add_constant(-f[0][b].cast<cplx>());
      for (long long k = 1; k <= m; ++k)
        if (f[static_cast<std::size_t>(k)][b].size()) e.add_scaled(x, static_cast<int>(k - 1), f[static_cast<std::size_t>(k)][b].cast<cplx>());
      p.add_lmi(e);
    } else {
      for (long long r = 0; r < n; ++r) {
        ScalarExpr e(f[0][b].size() ? -f[0][b](r, r) : 0.0);
        for (long long k = 1; k <= m; ++k) {
          const RMatrix& fk = f[static_cast<std::size_t>(k)][b];
          if (fk.size() && fk(r, r) != 0.0) e.add(x, static_cast<int>(k - 1), fk(r, r));
        }
        p.add_inequality(e);
      }
    }
  }
  return p;
}

}  // namespace gmecert
