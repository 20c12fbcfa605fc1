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
#include <array>
#include <cmath>
#include <limits>

#include "gmecert/sdp.hpp"

// Infeasible primal-dual path following with the HKM search direction and a
// Mehrotra predictor-corrector. The problem
//   minimize c^T x  s.t.  C_b + sum_i x_i G_i^b >= 0,  a_k^T x + c_k >= 0,  E x = g
// is handled as the dual of min <C, X> + g^T lambda over X >= 0, so the
// Newton system reduces to the Schur matrix M_ij = sum_b Tr(G_i X G_j S^-1).
// M is block-sparse at variable granularity and is factored with a block
// Cholesky in a minimum-degree order, which keeps the negativity problems
// (one matrix coupled to many per-cut matrices) at arrowhead cost.

namespace gmecert {

namespace {

using Entry = SdpProblem::Entry;

constexpr int kStagnationLimit = 10;

struct BlockPlan {
  int n = 0;
  RMatrix constant;
  std::vector<int> sp_param;
  std::vector<std::vector<Entry>> sp_entries;
  std::vector<int> lr_param;
  std::vector<Eigen::Index> lr_begin;  // size lr_param + 1
  RMatrix factor;
  RVector weights;
  // Complex form of the low-rank part when every low-rank parameter is an
  // outer-product sum.
  CMatrix outer_vectors;
  RVector outer_weights;
  std::vector<Eigen::Index> outer_begin;
  bool complex_low_rank = false;
  // Whole Hermitian variables; their parameter pairs bypass the generic
  // sparse kernel.
  struct Whole {
    int group;
    double coef;
    std::uint64_t mask;
  };
  std::vector<Whole> whole;
  std::vector<char> whole_group;
};

struct LpRow {
  std::vector<std::pair<int, double>> coefs;
  double constant;
};

struct Layout {
  int m = 0;
  int groups = 0;
  std::vector<int> group_of;
  std::vector<int> local_of;
  std::vector<int> group_size;
  std::vector<int> group_offset;
};

// Lower block storage of the Schur matrix in original group order.
struct SchurMatrix {
  std::vector<std::vector<RMatrix>> blk;
  std::vector<std::vector<char>> present;

  void reset(const Layout& lay) {
    blk.assign(static_cast<std::size_t>(lay.groups), std::vector<RMatrix>(static_cast<std::size_t>(lay.groups)));
    for (int u = 0; u < lay.groups; ++u)
      for (int v = 0; v <= u; ++v)
        if (present[u][v])
          blk[u][v] =
              RMatrix::Zero(lay.group_size[u], lay.group_size[v]);
  }
};

class SchurAccumulator {
 public:
  SchurAccumulator(const Layout& lay, SchurMatrix& m) : lay_(lay), m_(m) {}

  // Adds to the (i, j) entry when i's group does not precede j's.
  void add(int i, int j, double v) {
    const int gi = lay_.group_of[i];
    const int gj = lay_.group_of[j];
    if (gi < gj) return;
    m_.blk[gi][gj](lay_.local_of[i],
                                                                      lay_.local_of[j]) += v;
  }

 private:
  const Layout& lay_;
  SchurMatrix& m_;
};

class BlockCholesky {
 public:
  void analyze(const Layout& lay, std::vector<std::vector<char>> pattern) {
    const int g = lay.groups;
    sizes_ = lay.group_size;
    // Symmetric adjacency for the ordering.
    std::vector<std::vector<char>> adj(static_cast<std::size_t>(g), std::vector<char>(g, 0));
    for (int u = 0; u < g; ++u)
      for (int v = 0; v < u; ++v)
        if (pattern[u][v])
          adj[u][v] = adj[v][u] = 1;
    std::vector<char> done(static_cast<std::size_t>(g), 0);
    perm_.clear();
    for (int step = 0; step < g; ++step) {
      int best = -1;
      long long best_cost = std::numeric_limits<long long>::max();
      for (int u = 0; u < g; ++u) {
        if (done[u]) continue;
        long long cost = 0;
        for (int v = 0; v < g; ++v)
          if (!done[v] && adj[u][v])
            cost += sizes_[v];
        if (cost < best_cost) {
          best_cost = cost;
          best = u;
        }
      }
      done[best] = 1;
      perm_.push_back(best);
      std::vector<int> nb;
      for (int v = 0; v < g; ++v)
        if (!done[v] && adj[best][v]) nb.push_back(v);
      for (int a : nb)
        for (int b : nb)
          if (a != b) adj[a][b] = 1;
    }
    pos_.assign(static_cast<std::size_t>(g), 0);
    for (int i = 0; i < g; ++i) pos_[static_cast<std::size_t>(perm_[i])] = i;
    // Structure of L in elimination order, including fill.
    struct_.assign(static_cast<std::size_t>(g), std::vector<char>(g, 0));
    for (int u = 0; u < g; ++u)
      for (int v = 0; v <= u; ++v)
        if (pattern[u][v]) {
          const int a = std::max(pos_[u], pos_[v]);
          const int b = std::min(pos_[u], pos_[v]);
          struct_[a][b] = 1;
        }
    for (int j = 0; j < g; ++j) {
      struct_[j][j] = 1;
      for (int i = j + 1; i < g; ++i)
        if (struct_[i][j])
          for (int k = j + 1; k <= i; ++k)
            if (struct_[k][j]) struct_[i][k] = 1;
    }
  }

  // Takes ownership of the assembled blocks. Returns false if a pivot block
  // is not positive definite.
  bool factor(SchurMatrix& m, const RVector& scale, const Layout& lay, double shift) {
    const int g = static_cast<int>(perm_.size());
    l_.assign(static_cast<std::size_t>(g), std::vector<RMatrix>(static_cast<std::size_t>(g)));
    scale_ = scale;
    offsets_ = lay.group_offset;
    for (int i = 0; i < g; ++i)
      for (int j = 0; j <= i; ++j) {
        if (!struct_[i][j]) continue;
        const int gi = perm_[i];
        const int gj = perm_[j];
        RMatrix& dst = l_[i][j];
        const auto ni = sizes_[gi];
        const auto nj = sizes_[gj];
        if (gi >= gj && m.present[gi][gj]) {
          dst = std::move(m.blk[gi][gj]);
        } else if (gi < gj && m.present[gj][gi]) {
          dst = m.blk[gj][gi].transpose();
        } else {
          dst = RMatrix::Zero(ni, nj);
        }
        const auto si = scale.segment(lay.group_offset[gi], ni);
        const auto sj = scale.segment(lay.group_offset[gj], nj);
        dst.array().colwise() *= si.array();
        dst.array().rowwise() *= sj.transpose().array();
        if (i == j) dst.diagonal().array() += shift;
      }
    for (int j = 0; j < g; ++j) {
      RMatrix& d = l_[j][j];
      Eigen::LLT<Eigen::Ref<RMatrix>> llt(d);
      if (llt.info() != Eigen::Success) return false;
      d.triangularView<Eigen::StrictlyUpper>().setZero();
      for (int i = j + 1; i < g; ++i) {
        if (!struct_[i][j]) continue;
        RMatrix& a = l_[i][j];
        d.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(a);
      }
      for (int i = j + 1; i < g; ++i) {
        if (!struct_[i][j]) continue;
        const RMatrix& lij = l_[i][j];
        l_[i][i].selfadjointView<Eigen::Lower>().rankUpdate(lij, -1.0);
        for (int k = j + 1; k < i; ++k) {
          if (!struct_[k][j]) continue;
          l_[i][k].noalias() -= lij * l_[k][j].transpose();
        }
      }
    }
    return true;
  }

  RVector solve(const RVector& b) const {
    const int g = static_cast<int>(perm_.size());
    std::vector<RVector> z(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) {
      const int gi = perm_[i];
      const auto off = offsets_[gi];
      const auto n = sizes_[gi];
      z[i] = scale_.segment(off, n).cwiseProduct(b.segment(off, n));
    }
    for (int j = 0; j < g; ++j) {
      l_[j][j].triangularView<Eigen::Lower>().solveInPlace(z[j]);
      for (int i = j + 1; i < g; ++i)
        if (struct_[i][j])
          z[i].noalias() -= l_[i][j] * z[j];
    }
    for (int j = g - 1; j >= 0; --j) {
      for (int i = j + 1; i < g; ++i)
        if (struct_[i][j])
          z[j].noalias() -=
              l_[i][j].transpose() * z[i];
      l_[j][j].triangularView<Eigen::Lower>().transpose().solveInPlace(z[j]);
    }
    RVector x(b.size());
    for (int i = 0; i < g; ++i) {
      const int gi = perm_[i];
      const auto off = offsets_[gi];
      const auto n = sizes_[gi];
      x.segment(off, n) = scale_.segment(off, n).cwiseProduct(z[i]);
    }
    return x;
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<int> perm_;
  std::vector<int> pos_;
  std::vector<std::vector<char>> struct_;
  std::vector<std::vector<RMatrix>> l_;
  RVector scale_;
};

// sum_i y_i G_i on one block.
RMatrix apply_g(const BlockPlan& p, const RVector& y) {
  RMatrix out = RMatrix::Zero(p.n, p.n);
  for (std::size_t k = 0; k < p.sp_param.size(); ++k) {
    const double yi = y(p.sp_param[k]);
    if (yi == 0.0) continue;
    for (const Entry& e : p.sp_entries[k]) out(e.row, e.col) += yi * e.value;
  }
  if (!p.lr_param.empty()) {
    RVector w = p.weights;
    for (std::size_t k = 0; k < p.lr_param.size(); ++k)
      w.segment(p.lr_begin[k], p.lr_begin[k + 1] - p.lr_begin[k]) *= y(p.lr_param[k]);
    out.noalias() += p.factor * w.asDiagonal() * p.factor.transpose();
  }
  return out;
}

// out_i += <G_i, Y> on one block.
void add_g_adjoint(const BlockPlan& p, const RMatrix& y, RVector& out) {
  for (std::size_t k = 0; k < p.sp_param.size(); ++k) {
    double s = 0.0;
    for (const Entry& e : p.sp_entries[k]) s += e.value * y(e.row, e.col);
    out(p.sp_param[k]) += s;
  }
  if (!p.lr_param.empty()) {
    const RMatrix yl = y * p.factor;
    const RVector d = (p.factor.cwiseProduct(yl)).colwise().sum().transpose().cwiseProduct(p.weights);
    for (std::size_t k = 0; k < p.lr_param.size(); ++k)
      out(p.lr_param[k]) += d.segment(p.lr_begin[k], p.lr_begin[k + 1] - p.lr_begin[k]).sum();
  }
}

// Complex matrix A with embedding [[Re A, -Im A], [Im A, Re A]], read from
// both copies of an embedded block.
CMatrix unembed(const RMatrix& e) {
  const Eigen::Index h = e.rows() / 2;
  CMatrix out(h, h);
  out.real() = 0.5 * (e.topLeftCorner(h, h) + e.bottomRightCorner(h, h));
  out.imag() = 0.5 * (e.bottomLeftCorner(h, h) - e.topRightCorner(h, h));
  return out;
}

// Entries (a, b, value) of coef * B_p^{T_A} for every Hermitian basis
// parameter p of a dim x dim variable; at most two per parameter.
struct BasisEntries {
  std::vector<int> count;
  std::vector<std::array<int, 2>> row;
  std::vector<std::array<int, 2>> col;
  std::vector<std::array<double, 2>> re;
  std::vector<std::array<double, 2>> im;
};

BasisEntries whole_entries(int dim, double coef, std::uint64_t mask) {
  const int np = dim * dim;
  BasisEntries e;
  e.count.assign(static_cast<std::size_t>(np), 0);
  e.row.resize(static_cast<std::size_t>(np));
  e.col.resize(static_cast<std::size_t>(np));
  e.re.resize(static_cast<std::size_t>(np));
  e.im.resize(static_cast<std::size_t>(np));
  auto swap = [&](int a, int b) {
    const auto ua = static_cast<std::uint64_t>(a);
    const auto ub = static_cast<std::uint64_t>(b);
    return std::pair<int, int>(static_cast<int>((ua & ~mask) | (ub & mask)), static_cast<int>((ub & ~mask) | (ua & mask)));
  };
  for (int p = 0; p < np; ++p) {
    const int r = p / dim;
    const int c = p % dim;
    auto put = [&](int a, int b, double vr, double vi) {
      const auto [ra, cb] = swap(a, b);
      auto& n = e.count[static_cast<std::size_t>(p)];
      for (int k = 0; k < n; ++k)
        if (e.row[p][k] == ra && e.col[p][k] == cb) {
          e.re[p][k] += coef * vr;
          e.im[p][k] += coef * vi;
          return;
        }
      e.row[p][n] = ra;
      e.col[p][n] = cb;
      e.re[p][n] = coef * vr;
      e.im[p][n] = coef * vi;
      ++n;
    };
    if (r == c) {
      put(r, r, 1.0, 0.0);
    } else if (r < c) {
      put(r, c, 1.0, 0.0);
      put(c, r, 1.0, 0.0);
    } else {
      put(c, r, 0.0, 1.0);
      put(r, c, 0.0, -1.0);
    }
  }
  return e;
}

// Schur entries Tr(G_p X G_q S^-1) = 2 Re Tr(H_p X H_q Y) for pairs of whole
// Hermitian variables, written straight into the lower block storage. For a
// fixed q, Z = sum h Y[b, :]^T X[:, a]^T holds Tr(E_cd X H_q Y) at (c, d), so
// a whole column of the block is a partial transpose and a fold of Z.
void assemble_whole(const BlockPlan& p, const RMatrix& x, const RMatrix& sinv, SchurMatrix& schur) {
  if (p.whole.empty()) return;
  const int dim = p.n / 2;
  const CMatrix xc = unembed(x);
  const CMatrix yt = unembed(sinv).transpose();
  std::vector<BasisEntries> ents;
  for (const auto& w : p.whole) ents.push_back(whole_entries(dim, w.coef, w.mask));
  const int np = dim * dim;
  CMatrix z(dim, dim);
  for (std::size_t t = 0; t < p.whole.size(); ++t)
    for (std::size_t u = 0; u < p.whole.size(); ++u) {
      const int gt = p.whole[t].group;
      const int gu = p.whole[u].group;
      if (gt < gu) continue;
      RMatrix& dst = schur.blk[gt][gu];
      const BasisEntries& eu = ents[u];
      const std::uint64_t mask = p.whole[t].mask;
      const double scale = 2.0 * p.whole[t].coef;
      for (int q = 0; q < np; ++q) {
        z.setZero();
        for (int i = 0; i < eu.count[q]; ++i)
          z.noalias() += cplx(eu.re[q][i], eu.im[q][i]) * (yt.col(eu.col[q][i]) * xc.col(eu.row[q][i]).transpose());
        double* out = dst.col(q).data();
        // Parameter r*dim+c of the other term reads Z at its transposed
        // positions: diagonal Re Z_rr, r<c Re(Z_rc + Z_cr), r>c Im(Z_rc - Z_cr).
        for (int r = 0; r < dim; ++r)
          for (int c = 0; c < dim; ++c) {
            const auto ur = static_cast<std::uint64_t>(r);
            const auto uc = static_cast<std::uint64_t>(c);
            const auto r1 = static_cast<Eigen::Index>((ur & ~mask) | (uc & mask));
            const auto c1 = static_cast<Eigen::Index>((uc & ~mask) | (ur & mask));
            double v;
            if (r == c) v = z(r1, c1).real();
            else if (r < c) v = z(r1, c1).real() + z(c1, r1).real();
            else v = z(r1, c1).imag() - z(c1, r1).imag();
            out[r * dim + c] += scale * v;
          }
      }
    }
}

void assemble_block(const BlockPlan& p, const RMatrix& x, const RMatrix& sinv, SchurAccumulator& acc,
                    const Layout& lay) {
  // Sparse with sparse, except pairs of whole variables.
  const std::size_t ns = p.sp_param.size();
  for (std::size_t a = 0; a < ns; ++a) {
    const int pi = p.sp_param[a];
    const int gi = lay.group_of[pi];
    const bool wi = p.whole_group[gi] != 0;
    for (std::size_t b = 0; b < ns; ++b) {
      const int pj = p.sp_param[b];
      const int gj = lay.group_of[pj];
      if (gj > gi) break;
      if (wi && p.whole_group[gj]) continue;
      double s = 0.0;
      for (const Entry& e1 : p.sp_entries[a])
        for (const Entry& e2 : p.sp_entries[b]) s += e1.value * e2.value * x(e1.col, e2.row) * sinv(e2.col, e1.row);
      acc.add(pi, pj, s);
    }
  }
  if (p.lr_param.empty()) return;
  // Low rank with low rank.
  const RMatrix xl = x * p.factor;
  const RMatrix sl = sinv * p.factor;
  const std::size_t nl = p.lr_param.size();
  if (p.complex_low_rank) {
    // Tr(E(vv^dag) X E(ww^dag) Y) = 2 Re[(v^dag X w)(w^dag Y v)]
    const CMatrix xc = unembed(x);
    const CMatrix yc = unembed(sinv);
    const CMatrix xv = p.outer_vectors.adjoint() * (xc * p.outer_vectors);
    const CMatrix yv = p.outer_vectors.adjoint() * (yc * p.outer_vectors);
    RMatrix h = 2.0 * (xv.real().cwiseProduct(yv.real().transpose()) - xv.imag().cwiseProduct(yv.imag().transpose()));
    h = p.outer_weights.asDiagonal() * h * p.outer_weights.asDiagonal();
    for (std::size_t a = 0; a < nl; ++a)
      for (std::size_t b = 0; b < nl; ++b) {
        const double s = h.block(p.outer_begin[a], p.outer_begin[b], p.outer_begin[a + 1] - p.outer_begin[a],
                                 p.outer_begin[b + 1] - p.outer_begin[b])
                             .sum();
        acc.add(p.lr_param[a], p.lr_param[b], s);
      }
  } else {
    RMatrix h = (p.factor.transpose() * xl).cwiseProduct(p.factor.transpose() * sl);
    h = p.weights.asDiagonal() * h * p.weights.asDiagonal();
    for (std::size_t a = 0; a < nl; ++a)
      for (std::size_t b = 0; b < nl; ++b) {
        const double s = h.block(p.lr_begin[a], p.lr_begin[b], p.lr_begin[a + 1] - p.lr_begin[a],
                                 p.lr_begin[b + 1] - p.lr_begin[b])
                             .sum();
        acc.add(p.lr_param[a], p.lr_param[b], s);
      }
  }
  // Low rank with sparse.
  RVector z(p.factor.cols());
  for (std::size_t b = 0; b < ns; ++b) {
    z.setZero();
    for (const Entry& e : p.sp_entries[b]) z += e.value * sl.row(e.col).transpose().cwiseProduct(xl.row(e.row).transpose());
    z = z.cwiseProduct(p.weights);
    for (std::size_t a = 0; a < nl; ++a) {
      const double s = z.segment(p.lr_begin[a], p.lr_begin[a + 1] - p.lr_begin[a]).sum();
      acc.add(p.lr_param[a], p.sp_param[b], s);
      acc.add(p.sp_param[b], p.lr_param[a], s);
    }
  }
}

// Largest step a with m + a dm >= 0, capped at a large number.
double max_step(const RMatrix& m, const RMatrix& dm) {
  Eigen::LLT<RMatrix> llt(m);
  if (llt.info() != Eigen::Success) return 0.0;
  RMatrix t = llt.matrixL().solve(dm);
  t = llt.matrixL().solve(t.transpose().eval());
  t = 0.5 * (t + t.transpose()).eval();
  const double lmin = Eigen::SelfAdjointEigenSolver<RMatrix>(t, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return lmin >= 0.0 ? 1e30 : -1.0 / lmin;
}

double max_step_lp(const RVector& v, const RVector& dv) {
  double a = 1e30;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

RMatrix sym(const RMatrix& a) { return 0.5 * (a + a.transpose()); }

double min_eig(const RMatrix& a) {
  return Eigen::SelfAdjointEigenSolver<RMatrix>(sym(a), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SdpOptions& options) {
  // ---- layout and plans ----
  Layout lay;
  lay.m = static_cast<int>(problem.total_params());
  lay.groups = problem.num_variables();
  lay.group_of.resize(static_cast<std::size_t>(lay.m));
  lay.local_of.resize(static_cast<std::size_t>(lay.m));
  for (int v = 0; v < lay.groups; ++v) {
    const int off = problem.param_offset({v});
    const int n = problem.variable_params({v});
    lay.group_offset.push_back(off);
    lay.group_size.push_back(n);
    for (int i = 0; i < n; ++i) {
      lay.group_of[off + i] = v;
      lay.local_of[off + i] = i;
    }
  }
  const int m = lay.m;

  std::vector<BlockPlan> plans;
  for (const SdpProblem::Lmi& l : problem.lmis()) {
    BlockPlan p;
    p.n = l.dim;
    p.constant = l.constant;
    Eigen::Index cols = 0;
    Eigen::Index outer_cols = 0;
    p.complex_low_rank = true;
    for (const auto& pb : l.params) {
      cols += pb.factor.cols();
      if (pb.low_rank()) {
        outer_cols += pb.outer_vectors.cols();
        if (pb.outer_vectors.cols() == 0) p.complex_low_rank = false;
      }
    }
    p.factor.resize(l.dim, cols);
    p.weights.resize(cols);
    if (p.complex_low_rank) {
      p.outer_vectors.resize(l.dim / 2, outer_cols);
      p.outer_weights.resize(outer_cols);
      p.outer_begin.push_back(0);
    }
    p.whole_group.assign(static_cast<std::size_t>(lay.groups), 0);
    for (const auto& w : l.whole_terms) {
      p.whole.push_back({w.var, w.coef, w.mask});
      p.whole_group[static_cast<std::size_t>(w.var)] = 1;
    }
    p.lr_begin.push_back(0);
    for (const auto& pb : l.params) {
      if (pb.low_rank()) {
        const Eigen::Index c0 = p.lr_begin.back();
        p.factor.middleCols(c0, pb.factor.cols()) = pb.factor;
        p.weights.segment(c0, pb.factor.cols()) = pb.weights;
        p.lr_param.push_back(pb.param);
        p.lr_begin.push_back(c0 + pb.factor.cols());
        if (p.complex_low_rank) {
          const Eigen::Index o0 = p.outer_begin.back();
          p.outer_vectors.middleCols(o0, pb.outer_vectors.cols()) = pb.outer_vectors;
          p.outer_weights.segment(o0, pb.outer_vectors.cols()) = pb.outer_weights;
          p.outer_begin.push_back(o0 + pb.outer_vectors.cols());
        }
      } else {
        p.sp_param.push_back(pb.param);
        p.sp_entries.push_back(pb.sparse);
      }
    }
    plans.push_back(std::move(p));
  }
  std::vector<LpRow> lp;
  for (const auto& l : problem.inequalities()) lp.push_back({l.coefs, l.constant});
  const auto nlp = static_cast<Eigen::Index>(lp.size());
  const auto neq = static_cast<Eigen::Index>(problem.equalities().size());
  RMatrix e_mat = RMatrix::Zero(neq, m);
  RVector g_vec(neq);
  for (Eigen::Index k = 0; k < neq; ++k) {
    const auto& l = problem.equalities()[k];
    for (const auto& [p, v] : l.coefs) e_mat(k, p) += v;
    g_vec(k) = -l.constant;
  }
  const double sense = problem.sense() == SdpSense::Maximize ? -1.0 : 1.0;
  const RVector b = -sense * problem.objective_vector();

  SdpSolution sol;
  auto finish_values = [&](const RVector& y) {
    sol.values = problem.unpack(y);
    sol.primal_value = problem.objective_vector().dot(y) + problem.objective_constant();
    double viol = 0.0;
    for (const BlockPlan& p : plans) viol = std::max(viol, -min_eig(p.constant + apply_g(p, y)));
    for (const LpRow& r : lp) {
      double s = r.constant;
      for (const auto& [q, v] : r.coefs) s += v * y(q);
      viol = std::max(viol, -s);
    }
    if (neq > 0) viol = std::max(viol, (e_mat * y - g_vec).cwiseAbs().maxCoeff());
    sol.max_violation = viol;
  };

  if (m == 0) {
    sol.status = SdpStatus::Optimal;
    sol.primal_value = sol.dual_value = problem.objective_constant();
    finish_values(RVector());
    if (sol.max_violation > options.tolerance) sol.status = SdpStatus::Infeasible;
    return sol;
  }

  // ---- Schur pattern ----
  SchurMatrix schur;
  schur.present.assign(static_cast<std::size_t>(lay.groups), std::vector<char>(static_cast<std::size_t>(lay.groups), 0));
  auto mark = [&](const std::vector<int>& groups) {
    for (int u : groups)
      for (int v : groups)
        if (u >= v) schur.present[u][v] = 1;
  };
  for (int u = 0; u < lay.groups; ++u) schur.present[u][u] = 1;
  for (const BlockPlan& p : plans) {
    std::vector<int> gs;
    for (int q : p.sp_param) gs.push_back(lay.group_of[q]);
    for (int q : p.lr_param) gs.push_back(lay.group_of[q]);
    std::sort(gs.begin(), gs.end());
    gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
    mark(gs);
  }
  for (const LpRow& r : lp) {
    std::vector<int> gs;
    for (const auto& cv : r.coefs) gs.push_back(lay.group_of[cv.first]);
    std::sort(gs.begin(), gs.end());
    gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
    mark(gs);
  }
  BlockCholesky chol;
  chol.analyze(lay, schur.present);

  // ---- starting point ----
  const std::size_t nb = plans.size();
  std::vector<RMatrix> x(nb);
  std::vector<RMatrix> s(nb);
  double n_total = static_cast<double>(nlp);
  double norm_c = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const BlockPlan& p = plans[k];
    const double n = p.n;
    n_total += n;
    double max_ratio = 0.0;
    double max_norm = p.constant.norm();
    auto param_norm = [&](int q, double nrm) {
      max_ratio = std::max(max_ratio, (1.0 + std::abs(b(q))) / (1.0 + nrm));
      max_norm = std::max(max_norm, nrm);
    };
    for (std::size_t a = 0; a < p.sp_param.size(); ++a) {
      double nrm = 0.0;
      for (const Entry& e : p.sp_entries[a]) nrm += e.value * e.value;
      param_norm(p.sp_param[a], std::sqrt(nrm));
    }
    for (std::size_t a = 0; a < p.lr_param.size(); ++a) {
      double nrm = 0.0;
      for (Eigen::Index c = p.lr_begin[a]; c < p.lr_begin[a + 1]; ++c)
        nrm += std::abs(p.weights(c)) * p.factor.col(c).squaredNorm();
      param_norm(p.lr_param[a], nrm);
    }
    const double xi = std::max({10.0, std::sqrt(n), n * max_ratio});
    const double eta = std::max({10.0, std::sqrt(n), max_norm});
    x[k] = xi * RMatrix::Identity(p.n, p.n);
    s[k] = eta * RMatrix::Identity(p.n, p.n);
    norm_c += p.constant.squaredNorm();
  }
  RVector xlp(nlp);
  RVector slp(nlp);
  {
    double max_ratio = 0.0;
    double max_norm = 0.0;
    for (const LpRow& r : lp) {
      double nrm = 0.0;
      for (const auto& cv : r.coefs) nrm += cv.second * cv.second;
      nrm = std::sqrt(nrm);
      for (const auto& cv : r.coefs) max_ratio = std::max(max_ratio, (1.0 + std::abs(b(cv.first))) / (1.0 + nrm));
      max_norm = std::max({max_norm, nrm, std::abs(r.constant)});
      norm_c += r.constant * r.constant;
    }
    const double n = static_cast<double>(nlp);
    xlp.setConstant(std::max({10.0, std::sqrt(n), n * max_ratio}));
    slp.setConstant(std::max({10.0, std::sqrt(n), max_norm}));
  }
  norm_c = std::sqrt(norm_c);
  const double norm_b = b.norm();
  const double norm_g = g_vec.norm();
  RVector y = RVector::Zero(m);
  RVector lam = RVector::Zero(neq);

  auto lp_g = [&](const RVector& v) {
    RVector out(nlp);
    for (Eigen::Index k = 0; k < nlp; ++k) {
      double t = 0.0;
      for (const auto& [q, a] : lp[k].coefs) t += a * v(q);
      out(k) = t;
    }
    return out;
  };
  auto lp_adjoint = [&](const RVector& w, RVector& out) {
    for (Eigen::Index k = 0; k < nlp; ++k)
      for (const auto& [q, a] : lp[k].coefs) out(q) += a * w(k);
  };
  RVector lp_const(nlp);
  for (Eigen::Index k = 0; k < nlp; ++k) lp_const(k) = lp[k].constant;

  std::vector<RMatrix> sinv(nb);
  double shift = 1e-13;
  int stall = 0;
  // Stagnation: iterations since the merit max(relgap, pinf, dinf) last
  // dropped below 0.9 of its best value.
  double best_merit = std::numeric_limits<double>::infinity();
  int since_progress = 0;
  sol.status = SdpStatus::MaxIterations;
  RVector fallback_y = y;
  bool fallback_certified = false;
  double fallback_dual = 0.0;
  double fallback_gap = 0.0;

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    // Residuals and objectives.
    std::vector<RMatrix> rd(nb);
    RVector rp = b;
    double pobj = lp_const.dot(xlp);
    double comp = xlp.dot(slp);
    double rd_norm2 = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const RMatrix gy = apply_g(plans[k], y);
      rd[k] = plans[k].constant + gy - s[k];
      rd_norm2 += rd[k].squaredNorm();
      add_g_adjoint(plans[k], x[k], rp);
      pobj += plans[k].constant.cwiseProduct(x[k]).sum();
      comp += x[k].cwiseProduct(s[k]).sum();
    }
    const RVector rd_lp = lp_const + lp_g(y) - slp;
    rd_norm2 += rd_lp.squaredNorm();
    lp_adjoint(xlp, rp);
    if (neq > 0) {
      rp -= e_mat.transpose() * lam;
      pobj += g_vec.dot(lam);
    }
    const RVector re = neq > 0 ? RVector(g_vec - e_mat * y) : RVector();
    const double dobj = b.dot(y);
    const double mu = comp / n_total;
    const double pinf = rp.norm() / (1.0 + norm_b);
    const double dinf = std::max(std::sqrt(rd_norm2) / (1.0 + norm_c), neq > 0 ? re.norm() / (1.0 + norm_g) : 0.0);
    const double gap = std::abs(pobj - dobj);
    const double relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

    // Report in the problem's own sense: value = -sense * dobj.
    const double c0 = problem.objective_constant();
    if (options.record_trace)
      sol.trace.push_back({-sense * dobj + c0, -sense * pobj + c0, comp, pinf, dinf});
    sol.iterations = iter;
    sol.dual_value = -sense * pobj + c0;
    sol.duality_gap = gap;
    const double merit = std::max({relgap, pinf, dinf});
    const bool certified = gap <= options.gap_tolerance && pinf <= options.tolerance && dinf <= options.tolerance;
    // Fallback if progress stalls: the certified iterate with the smallest
    // gap, else the one with the best merit.
    if (certified ? !fallback_certified || gap < fallback_gap : !fallback_certified && merit < best_merit) {
      fallback_certified = certified;
      fallback_y = y;
      fallback_dual = sol.dual_value;
      fallback_gap = gap;
    }

    if (certified && relgap <= options.tolerance) {
      sol.status = SdpStatus::Optimal;
      break;
    }
    if (pobj < 0.0 && (b - rp).norm() < options.tolerance * -pobj && -pobj > 1e6) {
      sol.status = SdpStatus::Infeasible;
      break;
    }
    if (dobj > 1e6 && (std::sqrt(rd_norm2) + norm_c) < options.tolerance * dobj &&
        (neq == 0 || (g_vec - re).norm() < options.tolerance * dobj)) {
      sol.status = SdpStatus::Unbounded;
      break;
    }
    if (iter == options.max_iterations) break;
    if (merit < 0.9 * best_merit) since_progress = 0;
    else if (++since_progress >= kStagnationLimit) {
      // Near the optimum the Schur solves can lose accuracy and the
      // residuals creep back up; report the best iterate seen.
      sol.status = SdpStatus::NumericalError;
      break;
    }
    best_merit = std::min(best_merit, merit);

    // Schur matrix.
    for (std::size_t k = 0; k < nb; ++k) {
      Eigen::LLT<RMatrix> llt(s[k]);
      if (llt.info() != Eigen::Success) {
        sol.status = SdpStatus::NumericalError;
        break;
      }
      sinv[k] = llt.solve(RMatrix::Identity(plans[k].n, plans[k].n));
      sinv[k] = sym(sinv[k]);
    }
    if (sol.status == SdpStatus::NumericalError) break;
    const RVector dlp = xlp.cwiseQuotient(slp);

    auto assemble = [&]() {
      schur.reset(lay);
      SchurAccumulator acc(lay, schur);
      for (std::size_t k = 0; k < nb; ++k) {
        assemble_block(plans[k], x[k], sinv[k], acc, lay);
        assemble_whole(plans[k], x[k], sinv[k], schur);
      }
      for (Eigen::Index k = 0; k < nlp; ++k)
        for (const auto& [qi, ai] : lp[k].coefs)
          for (const auto& [qj, aj] : lp[k].coefs) acc.add(qi, qj, ai * aj * dlp(k));
    };
    assemble();
    RVector diag(m);
    for (int u = 0; u < lay.groups; ++u)
      diag.segment(lay.group_offset[u], lay.group_size[u]) =
          schur.blk[u][u].diagonal();
    RVector scale(m);
    for (int i = 0; i < m; ++i) scale(i) = diag(i) > 0.0 ? 1.0 / std::sqrt(diag(i)) : 1.0;
    bool ok = chol.factor(schur, scale, lay, shift);
    while (!ok && shift < 1e-5) {
      shift *= 100.0;
      assemble();
      ok = chol.factor(schur, scale, lay, shift);
    }
    if (!ok) {
      sol.status = SdpStatus::NumericalError;
      break;
    }

    // M v computed from the operator form, for iterative refinement.
    auto apply_m = [&](const RVector& v) {
      RVector out = RVector::Zero(m);
      for (std::size_t k = 0; k < nb; ++k) add_g_adjoint(plans[k], x[k] * apply_g(plans[k], v) * sinv[k], out);
      lp_adjoint(dlp.cwiseProduct(lp_g(v)), out);
      return out;
    };
    // Conjugate gradients on the operator form, preconditioned by the factor.
    auto refined_solve = [&](const RVector& rhs) {
      RVector v = chol.solve(rhs);
      RVector r = rhs - apply_m(v);
      const double target = 1e-15 * (1.0 + rhs.norm());
      if (r.norm() <= target) return v;
      RVector z = chol.solve(r);
      RVector p = z;
      double rz = r.dot(z);
      RVector best = v;
      double best_res = r.norm();
      for (int it = 0; it < 50 && rz > 0.0; ++it) {
        const RVector mp = apply_m(p);
        const double pmp = p.dot(mp);
        if (!(pmp > 0.0)) break;
        const double alpha = rz / pmp;
        v += alpha * p;
        r -= alpha * mp;
        const double rn = r.norm();
        if (rn < best_res) {
          best_res = rn;
          best = v;
        }
        if (rn <= target) break;
        z = chol.solve(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
      }
      return best;
    };
    RMatrix me;      // M^-1 E^T
    Eigen::LDLT<RMatrix> kkt;
    if (neq > 0) {
      me.resize(m, neq);
      for (Eigen::Index k = 0; k < neq; ++k) me.col(k) = refined_solve(e_mat.row(k).transpose());
      kkt.compute(e_mat * me);
    }

    // Direction for a given complementarity target psi (blocks and LP).
    struct Direction {
      RVector dy;
      RVector dlam;
      std::vector<RMatrix> dx;
      std::vector<RMatrix> ds;
      RVector dxlp;
      RVector dslp;
    };
    auto direction = [&](const std::vector<RMatrix>& psi, const RVector& psi_lp) {
      Direction d;
      RVector h = rp;
      for (std::size_t k = 0; k < nb; ++k) add_g_adjoint(plans[k], sym(psi[k]), h);
      lp_adjoint(psi_lp, h);
      if (neq > 0) {
        const RVector mh = refined_solve(h);
        d.dlam = kkt.solve(e_mat * mh - re);
        d.dy = mh - me * d.dlam;
      } else {
        d.dy = refined_solve(h);
        d.dlam = RVector();
      }
      d.dx.resize(nb);
      d.ds.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        const RMatrix gdy = apply_g(plans[k], d.dy);
        d.ds[k] = rd[k] + gdy;
        d.dx[k] = sym(psi[k] - x[k] * gdy * sinv[k]);
      }
      const RVector gdy_lp = lp_g(d.dy);
      d.dslp = rd_lp + gdy_lp;
      d.dxlp = psi_lp - xlp.cwiseProduct(gdy_lp).cwiseQuotient(slp);
      return d;
    };
    auto steps = [&](const Direction& d) {
      double ap = max_step_lp(xlp, d.dxlp);
      double ad = max_step_lp(slp, d.dslp);
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(x[k], d.dx[k]));
        ad = std::min(ad, max_step(s[k], d.ds[k]));
      }
      return std::pair<double, double>(ap, ad);
    };

    // Predictor.
    std::vector<RMatrix> psi(nb);
    for (std::size_t k = 0; k < nb; ++k) psi[k] = -x[k] - x[k] * rd[k] * sinv[k];
    RVector psi_lp = -xlp - xlp.cwiseProduct(rd_lp).cwiseQuotient(slp);
    const Direction pred = direction(psi, psi_lp);
    auto [ap_a, ad_a] = steps(pred);
    ap_a = std::min(1.0, ap_a);
    ad_a = std::min(1.0, ad_a);
    double comp_a = (xlp + ap_a * pred.dxlp).dot(slp + ad_a * pred.dslp);
    for (std::size_t k = 0; k < nb; ++k) comp_a += (x[k] + ap_a * pred.dx[k]).cwiseProduct(s[k] + ad_a * pred.ds[k]).sum();
    const double mu_a = comp_a / n_total;
    double sigma = mu > 0.0 ? std::pow(std::max(0.0, mu_a / mu), 3) : 0.0;
    sigma = std::min(1.0, sigma);

    // Corrector.
    for (std::size_t k = 0; k < nb; ++k)
      psi[k] = sigma * mu * sinv[k] - x[k] - x[k] * rd[k] * sinv[k] - pred.dx[k] * pred.ds[k] * sinv[k];
    psi_lp = (sigma * mu * slp.cwiseInverse()) - xlp - xlp.cwiseProduct(rd_lp).cwiseQuotient(slp) -
             pred.dxlp.cwiseProduct(pred.dslp).cwiseQuotient(slp);
    const Direction corr = direction(psi, psi_lp);
    auto [ap, ad] = steps(corr);
    const double gamma = 0.9 + 0.09 * std::min(ap_a, ad_a);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    for (std::size_t k = 0; k < nb; ++k) {
      x[k] = sym(x[k] + ap * corr.dx[k]);
      s[k] = sym(s[k] + ad * corr.ds[k]);
    }
    if (options.record_trace) {
      sol.trace.back().step_primal = ap;
      sol.trace.back().step_dual = ad;
    }
    xlp += ap * corr.dxlp;
    slp += ad * corr.dslp;
    y += ad * corr.dy;
    if (neq > 0) lam += ap * corr.dlam;

    stall = (ap < 1e-8 && ad < 1e-8) ? stall + 1 : 0;
    if (stall >= 3) {
      sol.status = SdpStatus::NumericalError;
      break;
    }
  }
  if (sol.status == SdpStatus::NumericalError || (sol.status == SdpStatus::MaxIterations && fallback_certified)) {
    y = fallback_y;
    sol.dual_value = fallback_dual;
    sol.duality_gap = fallback_gap;
    if (fallback_certified) sol.status = SdpStatus::Optimal;
  }
  finish_values(y);
  return sol;
}

}  // namespace gmecert
