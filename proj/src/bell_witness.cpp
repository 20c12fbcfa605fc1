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

#include "gmecert/bell_witness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

namespace gmecert {

namespace {

constexpr Pauli kAxes[3] = {Pauli::X, Pauli::Y, Pauli::Z};

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0.0, std::sin(a), std::cos(a), 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Matrix3d rot_y(double b) {
  Eigen::Matrix3d r;
  r << std::cos(b), 0.0, std::sin(b), 0.0, 1.0, 0.0, -std::sin(b), 0.0, std::cos(b);
  return r;
}

// Sum over the listed pairs of |rotated correlators|, with error bars.
FidelityValue fidelity_sum(const GroupCorrelations& c, const LocalRotationSet& rot,
                           const std::vector<std::pair<int, int>>& pairs) {
  if (rot.size() != c.k) throw AnalysisError("rotation set size does not match the group");
  const double norm = 4.0 * static_cast<double>(pairs.size());
  const bool with_errors = c.covariance.size() > 0 && c.covariance.cwiseAbs().maxCoeff() > 0.0;
  const Eigen::Index m = 9 * static_cast<Eigen::Index>(c.num_pairs());
  RVector gradient = RVector::Zero(with_errors ? m : 0);
  double total = static_cast<double>(pairs.size());
  double linear_error = 0.0;
  for (const auto& [i, j] : pairs) {
    const int pi = GroupCorrelations::pair_index(i, j, c.k);
    const Eigen::Matrix3d ri = rot.frame(i);
    const Eigen::Matrix3d rj = rot.frame(j);
    for (int a = 0; a < 3; ++a) {
      // Coefficients of the raw correlators in <A~_i A~_j>.
      const Eigen::Matrix3d w = ri.row(a).transpose() * rj.row(a);
      double v = 0.0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
          if (std::abs(w(p, q)) < 1e-15) continue;
          if (!c.present[static_cast<std::size_t>(pi)](p, q))
            throw AnalysisError("missing correlator for pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
          v += w(p, q) * c.values[static_cast<std::size_t>(pi)](p, q);
        }
      total += std::abs(v);
      if (!with_errors) continue;
      RVector wf = RVector::Zero(m);
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) wf(9 * pi + 3 * p + q) = w(p, q);
      const double sigma = std::sqrt(std::max(0.0, wf.dot(c.covariance * wf)));
      if (std::abs(v) <= sigma) {
        linear_error += sigma / norm;
      } else {
        gradient += (v > 0 ? 1.0 : -1.0) / norm * wf;
      }
    }
  }
  FidelityValue out;
  out.value = total / norm;
  if (with_errors) out.std_error = std::sqrt(std::max(0.0, gradient.dot(c.covariance * gradient))) + linear_error;
  return out;
}

std::vector<std::pair<int, int>> all_pairs(int k) {
  std::vector<std::pair<int, int>> p;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) p.emplace_back(i, j);
  return p;
}

std::vector<std::pair<int, int>> neighbour_pairs(int k) {
  std::vector<std::pair<int, int>> p;
  for (int i = 0; i + 1 < k; ++i) p.emplace_back(i, i + 1);
  return p;
}

LocalRotationSet from_params(const RVector& x, int k, bool su2) {
  LocalRotationSet r = LocalRotationSet::identity(k);
  if (su2) {
    r.euler = std::vector<double>(x.data(), x.data() + x.size());
  } else {
    for (int i = 0; i < k; ++i) r.thetas[static_cast<std::size_t>(i)] = x(i);
  }
  return r;
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0 ? a + two_pi : a;
}

// Nelder-Mead maximization; returns the best point found.
template <typename F>
RVector nelder_mead_max(F&& f, RVector x0, double step, int max_evals, double& best) {
  const Eigen::Index n = x0.size();
  std::vector<RVector> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  int evals = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    val[i] = f(pts[i]);
    ++evals;
  }
  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    const std::size_t hi = order.front();
    const std::size_t lo = order.back();
    const std::size_t second_lo = order[order.size() - 2];
    double spread = 0.0;
    for (const RVector& p : pts) spread = std::max(spread, (p - pts[hi]).cwiseAbs().maxCoeff());
    if (val[hi] - val[lo] < 1e-13 && spread < 1e-9) break;
    RVector centroid = RVector::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != lo) centroid += pts[i];
    centroid /= static_cast<double>(n);
    const RVector xr = centroid + (centroid - pts[lo]);
    const double fr = f(xr);
    ++evals;
    if (fr > val[hi]) {
      const RVector xe = centroid + 2.0 * (centroid - pts[lo]);
      const double fe = f(xe);
      ++evals;
      if (fe > fr) {
        pts[lo] = xe;
        val[lo] = fe;
      } else {
        pts[lo] = xr;
        val[lo] = fr;
      }
    } else if (fr > val[second_lo]) {
      pts[lo] = xr;
      val[lo] = fr;
    } else {
      const RVector xc = centroid + 0.5 * (pts[lo] - centroid);
      const double fc = f(xc);
      ++evals;
      if (fc > val[lo]) {
        pts[lo] = xc;
        val[lo] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == hi) continue;
          pts[i] = pts[hi] + 0.5 * (pts[i] - pts[hi]);
          val[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  const auto it = std::max_element(val.begin(), val.end());
  best = *it;
  return pts[static_cast<std::size_t>(it - val.begin())];
}

}  // namespace

LocalRotationSet LocalRotationSet::identity(int k) {
  LocalRotationSet r;
  r.thetas.assign(static_cast<std::size_t>(k), 0.0);
  return r;
}

Eigen::Matrix3d LocalRotationSet::frame(int qubit) const {
  if (euler) {
    const auto& e = *euler;
    const std::size_t b = 3 * static_cast<std::size_t>(qubit);
    return rot_z(e.at(b)) * rot_y(e.at(b + 1)) * rot_z(e.at(b + 2));
  }
  return rot_z(thetas.at(static_cast<std::size_t>(qubit)));
}

int GroupCorrelations::pair_index(int i, int j, int k) {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= k || i == j) throw AnalysisError("invalid pair index");
  // Pairs before row i, then the offset within row i.
  return i * k - i * (i + 1) / 2 + (j - i - 1);
}

GroupCorrelations correlations_from_state(const DensityMatrix& rho) {
  GroupCorrelations c;
  c.k = rho.num_qubits();
  if (c.k < 2) throw AnalysisError("correlations need at least two qubits");
  for (const auto& [i, j] : all_pairs(c.k)) {
    Eigen::Matrix3d v;
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) v(p, q) = rho.expectation(PauliString::two_site(c.k, i, kAxes[p], j, kAxes[q]));
    c.values.push_back(v);
    c.present.push_back(Eigen::Matrix<bool, 3, 3>::Constant(true));
  }
  c.covariance = RMatrix::Zero(9 * c.num_pairs(), 9 * c.num_pairs());
  return c;
}

GroupCorrelations correlations_from_counts(std::span<const CountsTable> tables, std::span<const int> sites) {
  if (tables.empty()) throw AnalysisError("no counts");
  const int n = tables.front().setting.num_qubits();
  GroupCorrelations c;
  c.k = static_cast<int>(sites.size());
  if (c.k < 2) throw AnalysisError("correlations need at least two qubits");
  std::vector<PauliString> ops;
  std::vector<Eigen::Index> slot;
  for (const auto& [i, j] : all_pairs(c.k)) {
    Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
    Eigen::Matrix<bool, 3, 3> have = Eigen::Matrix<bool, 3, 3>::Constant(false);
    const int pi = GroupCorrelations::pair_index(i, j, c.k);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        const PauliString ps =
            PauliString::two_site(n, sites[static_cast<std::size_t>(i)], kAxes[p], sites[static_cast<std::size_t>(j)], kAxes[q]);
        const bool ok = std::any_of(tables.begin(), tables.end(),
                                    [&](const CountsTable& t) { return setting_compatible(t.setting, ps); });
        if (!ok) continue;
        v(p, q) = estimate_correlator(tables, ps).value;
        have(p, q) = true;
        ops.push_back(ps);
        slot.push_back(9 * pi + 3 * p + q);
      }
    c.values.push_back(v);
    c.present.push_back(have);
  }
  const RMatrix cov = covariance_matrix(tables, ops);
  c.covariance = RMatrix::Zero(9 * c.num_pairs(), 9 * c.num_pairs());
  for (std::size_t a = 0; a < slot.size(); ++a)
    for (std::size_t b = 0; b < slot.size(); ++b)
      c.covariance(slot[a], slot[b]) = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return c;
}

FidelityValue symmetric_bell_fidelity(const GroupCorrelations& c, const LocalRotationSet& rot) {
  return fidelity_sum(c, rot, all_pairs(c.k));
}

FidelityValue nn_bell_fidelity(const GroupCorrelations& c, const LocalRotationSet& rot) {
  return fidelity_sum(c, rot, neighbour_pairs(c.k));
}

double threshold(ThresholdKind kind, int k) {
  if (k < 2) throw ConfigError("thresholds are defined for groups of at least 2 qubits");
  const double s3 = std::sqrt(3.0);
  const double s2 = std::sqrt(2.0);
  switch (kind) {
    case ThresholdKind::SymmetricBisep:
      if (k == 2) return 0.5;
      if (k == 3) return (3.0 + std::sqrt(15.0)) / 12.0;
      return (1.0 + s3) / 4.0 - (s3 - 1.0) / (2.0 * k);
    case ThresholdKind::SymmetricMax:
      return k == 2 ? 1.0 : (1.0 + s3) / 4.0;
    case ThresholdKind::NnBisep:
      if (k == 2) return 0.5;
      if (k == 3) return (1.0 + s3) / 4.0;
      throw ConfigError("the nearest-neighbour biseparability bound is only available for k <= 3");
    case ThresholdKind::NnMax:
      if (k % 2 == 1) return (2.0 + 3.0 * s2) / 8.0;
      return ((k - 1) + 3.0 * (k - 2) * s2 / 2.0 + 3.0) / (4.0 * (k - 1));
  }
  throw ConfigError("unknown threshold kind");
}

RotationResult optimize_rotations(const GroupCorrelations& c, RotationOptions options) {
  const int k = c.k;
  for (const auto& have : c.present)
    if (!have.all()) throw AnalysisError("rotation optimization needs all 9 correlators of every pair");
  const int g = options.grid_points > 0 ? options.grid_points : (k <= 3 ? 16 : 8);
  const double step = 2.0 * std::numbers::pi / g;
  const auto value_xy = [&](const RVector& x) { return symmetric_bell_fidelity(c, from_params(x, k, false)).value; };

  // Grid over the X-Y plane angles; strict improvement keeps theta = 0 on ties.
  RVector best_x = RVector::Zero(k);
  double best = value_xy(best_x);
  const double at_zero = best;
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  RVector x(k);
  while (true) {
    int pos = 0;
    while (pos < k && ++idx[static_cast<std::size_t>(pos)] == g) idx[static_cast<std::size_t>(pos++)] = 0;
    if (pos == k) break;
    for (int i = 0; i < k; ++i) x(i) = step * idx[static_cast<std::size_t>(i)];
    const double v = value_xy(x);
    if (v > best + 1e-14) {
      best = v;
      best_x = x;
    }
  }

  RotationResult out;
  if (!options.full_su2) {
    double refined = best;
    RVector xr = nelder_mead_max(value_xy, best_x, 0.5 * step, options.max_evaluations, refined);
    if (refined > best + 1e-14) {
      best = refined;
      best_x = xr;
    }
    for (Eigen::Index i = 0; i < best_x.size(); ++i) best_x(i) = wrap_angle(best_x(i));
    out.rotations = from_params(best_x, k, false);
  } else {
    RVector e = RVector::Zero(3 * k);
    for (int i = 0; i < k; ++i) e(3 * i) = best_x(i);
    const auto value_su2 = [&](const RVector& y) { return symmetric_bell_fidelity(c, from_params(y, k, true)).value; };
    double refined = best;
    RVector er = nelder_mead_max(value_su2, e, 0.5 * step, options.max_evaluations, refined);
    if (refined > best + 1e-14) {
      best = refined;
      e = er;
    }
    out.rotations = from_params(e, k, true);
    out.rotations.thetas.assign(static_cast<std::size_t>(k), 0.0);
  }
  out.value = std::max(best, at_zero);
  if (at_zero >= best) out.rotations = LocalRotationSet::identity(k);
  return out;
}

double FidelityVerdict::significance() const {
  const double margin = value - threshold;
  if (std_error > 0.0) return margin / std_error;
  if (margin == 0.0) return 0.0;
  return margin > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

FidelityVerdict evaluate_group(const GroupCorrelations& c, std::vector<int> group, RotationOptions options) {
  const RotationResult opt = optimize_rotations(c, options);
  const FidelityValue f = symmetric_bell_fidelity(c, opt.rotations);
  FidelityVerdict v;
  v.k = c.k;
  v.group = std::move(group);
  v.value = f.value;
  v.std_error = f.std_error;
  v.threshold = threshold(ThresholdKind::SymmetricBisep, c.k);
  v.detected = v.value - v.threshold > 0.0;
  v.rotations = opt.rotations;
  return v;
}

std::vector<FidelityRow> fidelity_sweep(std::span<const TimeStepCounts> steps, int k, RotationOptions options) {
  if (k != 2 && k != 3) throw ConfigError("fidelity sweeps support k = 2 or 3");
  std::vector<FidelityRow> rows;
  for (const TimeStepCounts& step : steps) {
    if (step.tables.empty()) throw AnalysisError("time step without counts");
    const int n = step.tables.front().setting.num_qubits();
    for (int start = 0; start + k <= n; ++start) {
      std::vector<int> group(static_cast<std::size_t>(k));
      std::iota(group.begin(), group.end(), start);
      const GroupCorrelations c = correlations_from_counts(step.tables, group);
      rows.push_back({step.t_ms, evaluate_group(c, group, options)});
    }
  }
  return rows;
}

void write_fidelity_csv(std::ostream& out, std::span<const FidelityRow> rows) {
  out << "t_ms,k,group_start,value,std_error,threshold,detected\n";
  out.precision(10);
  for (const FidelityRow& r : rows)
    out << r.t_ms << ',' << r.verdict.k << ',' << r.verdict.group.front() + 1 << ',' << r.verdict.value << ','
        << r.verdict.std_error << ',' << r.verdict.threshold << ',' << (r.verdict.detected ? 1 : 0) << '\n';
}

RandomSearchResult random_search_symmetric(int k, int samples, std::uint64_t seed, RotationOptions options) {
  if (k < 2 || k > kMaxDenseQubits) throw ConfigError("random search supports 2..12 qubits");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  RandomSearchResult best;
  const auto d = static_cast<Eigen::Index>(dim_of(k));
  for (int s = 0; s < samples; ++s) {
    CVector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = cplx(gauss(rng), gauss(rng));
    v.normalize();
    const PureState psi(v, k);
    const double f = optimize_rotations(correlations_from_state(DensityMatrix::from_pure(psi)), options).value;
    if (s == 0 || f > best.best_value) {
      best.best_value = f;
      best.best_state = v;
    }
  }
  return best;
}

}  // namespace gmecert
