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

#include "gmecert/tomography.hpp"

#include <cmath>
#include <map>
#include <ostream>

namespace gmecert {

namespace {

CMatrix product_projector(const std::vector<Pauli>& axes, std::uint64_t outcome) {
  const int k = static_cast<int>(axes.size());
  CVector v = CVector::Ones(1);
  for (int q = 0; q < k; ++q) {
    const Eigen::Vector2cd e = axis_eigenvector(axes[static_cast<std::size_t>(q)], bit_of(outcome, q, k));
    CVector next(v.size() * 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) next.segment(2 * i, 2) = v(i) * e;
    v = std::move(next);
  }
  return v * v.adjoint();
}

std::uint64_t bits_to_index(const std::string& bits) {
  std::uint64_t idx = 0;
  for (char c : bits) idx = (idx << 1) | static_cast<std::uint64_t>(c == '1');
  return idx;
}

struct Term {
  CMatrix projector;
  double f;
};

double log_likelihood(const std::vector<Term>& terms, const CMatrix& rho) {
  double l = 0.0;
  for (const Term& t : terms) {
    if (t.f == 0.0) continue;
    const double p = std::max((t.projector.cwiseProduct(rho.transpose())).sum().real(), 1e-300);
    l += t.f * std::log(p);
  }
  return l;
}

}  // namespace

std::vector<LocalBasisData> collect_local_bases(std::span<const CountsTable> tables, std::span<const int> sites) {
  const int k = static_cast<int>(sites.size());
  if (k < 1) throw ConfigError("tomography needs at least one site");
  if (k > kMaxTomographyQubits)
    throw ConfigError("tomography is limited to 3 qubits; use the multipartite witness for larger groups");
  std::map<std::vector<Pauli>, RVector> pooled;
  for (const CountsTable& t : tables) {
    const CountsTable m = marginalize(t, sites);
    RVector& w = pooled.try_emplace(m.setting.axes, RVector::Zero(static_cast<Eigen::Index>(dim_of(k)))).first->second;
    for (const auto& [bits, c] : m.counts) w(static_cast<Eigen::Index>(bits_to_index(bits))) += static_cast<double>(c);
  }
  std::size_t expected = 1;
  for (int q = 0; q < k; ++q) expected *= 3;
  if (pooled.size() != expected)
    throw AnalysisError("counts are not informationally complete on the requested sites");
  std::vector<LocalBasisData> out;
  for (auto& [axes, w] : pooled) out.push_back({axes, std::move(w)});
  return out;
}

MleResult mle_reconstruct(std::span<const LocalBasisData> data, MleOptions options) {
  if (data.empty()) throw AnalysisError("no tomography data");
  const int k = static_cast<int>(data.front().axes.size());
  const auto d = static_cast<Eigen::Index>(dim_of(k));
  double total = 0.0;
  for (const LocalBasisData& b : data) {
    if (static_cast<int>(b.axes.size()) != k || b.weights.size() != d)
      throw AnalysisError("inconsistent tomography data");
    if ((b.weights.array() < 0.0).any()) throw AnalysisError("negative tomography weight");
    total += b.weights.sum();
  }
  if (!(total > 0.0)) throw AnalysisError("tomography data has no counts");

  std::vector<Term> terms;
  for (const LocalBasisData& b : data)
    for (Eigen::Index o = 0; o < d; ++o)
      terms.push_back({product_projector(b.axes, static_cast<std::uint64_t>(o)), b.weights(o) / total});

  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix rho = id / static_cast<double>(d);
  double l = log_likelihood(terms, rho);
  MleResult result{DensityMatrix::maximally_mixed(k), 0, false, l, {}};
  if (options.record_trace) result.trace.push_back(l);

  double eps = options.dilution;
  for (int it = 0; it < options.max_iterations; ++it) {
    CMatrix r = CMatrix::Zero(d, d);
    for (const Term& t : terms) {
      if (t.f == 0.0) continue;
      const double p = std::max((t.projector.cwiseProduct(rho.transpose())).sum().real(), 1e-300);
      r += (t.f / p) * t.projector;
    }
    bool accepted = false;
    double l_new = l;
    CMatrix next;
    for (int tries = 0; tries < 60; ++tries) {
      const CMatrix a = id + eps * r;
      next = a * rho * a;
      next = 0.5 * (next + next.adjoint()).eval();
      next /= next.trace().real();
      l_new = log_likelihood(terms, next);
      if (l_new >= l) {
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    result.iterations = it + 1;
    if (!accepted) {
      // No ascent direction left at floating-point resolution.
      result.converged = true;
      break;
    }
    const double gain = l_new - l;
    rho = std::move(next);
    l = l_new;
    if (options.record_trace) result.trace.push_back(l);
    if (gain < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.rho = DensityMatrix::trusted(rho, k);
  result.log_likelihood = l;
  return result;
}

MleResult mle_reconstruct(std::span<const CountsTable> tables, std::span<const int> sites, MleOptions options) {
  const std::vector<LocalBasisData> data = collect_local_bases(tables, sites);
  return mle_reconstruct(data, options);
}

std::vector<PairNegativityRow> pair_negativity_sweep(std::span<const TimeStepCounts> steps,
                                                     NegativitySweepOptions options) {
  std::vector<PairNegativityRow> rows;
  const Bipartition cut(0b01, 2);
  const int local[] = {0, 1};
  for (const TimeStepCounts& step : steps) {
    if (step.tables.empty()) throw AnalysisError("time step without counts");
    const int n = step.tables.front().setting.num_qubits();
    for (int i = 0; i + 1 < n; ++i) {
      const int sites[] = {i, i + 1};
      std::vector<CountsTable> marg;
      for (const CountsTable& t : step.tables) marg.push_back(marginalize(t, sites));
      const MleResult fit = mle_reconstruct(marg, local, options.mle);
      const auto stat = [&](std::span<const CountsTable> draw) {
        return negativity(mle_reconstruct(draw, local, options.mle).rho, cut);
      };
      const std::uint64_t seed =
          derive_seed(options.seed, "negativity/" + std::to_string(step.t_ms) + "/" + std::to_string(i));
      const BootstrapResult boot = bootstrap(marg, stat, options.resamples, seed);
      rows.push_back({step.t_ms, i, i + 1, negativity(fit.rho, cut), boot.std_error, fit.converged});
    }
  }
  return rows;
}

void write_pair_negativity_csv(std::ostream& out, std::span<const PairNegativityRow> rows) {
  out << "t_ms,site_i,site_j,negativity,std_error\n";
  out.precision(10);
  for (const PairNegativityRow& r : rows)
    out << r.t_ms << ',' << r.site_i + 1 << ',' << r.site_j + 1 << ',' << r.negativity << ',' << r.std_error << '\n';
}

}  // namespace gmecert
