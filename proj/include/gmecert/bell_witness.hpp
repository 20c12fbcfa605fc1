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
#include <vector>

#include "gmecert/measurement.hpp"
#include "gmecert/state.hpp"
#include "gmecert/tomography.hpp"

namespace gmecert {

// Per-qubit measurement frame. In the default X-Y plane mode,
//   X~ = cos(t) X - sin(t) Y,  Y~ = sin(t) X + cos(t) Y,  Z~ = Z.
// When `euler` is set (three angles per qubit, z-y-z order) the frame is a
// general rotation and `thetas` is ignored.
struct LocalRotationSet {
  std::vector<double> thetas;
  std::optional<std::vector<double>> euler;

  static LocalRotationSet identity(int k);
  int size() const { return static_cast<int>(thetas.size()); }
  // Row a holds the X/Y/Z coefficients of the rotated operator a.
  Eigen::Matrix3d frame(int qubit) const;
};

// Two-point correlators <s_p s_q> of a k-qubit group. Pairs are indexed
// i < j in lexicographic order; the covariance is over the flattened index
// 9 * pair + 3 * p + q (zero for exact data).
struct GroupCorrelations {
  int k = 0;
  std::vector<Eigen::Matrix3d> values;
  std::vector<Eigen::Matrix<bool, 3, 3>> present;
  RMatrix covariance;

  static int pair_index(int i, int j, int k);
  int num_pairs() const { return k * (k - 1) / 2; }
};

GroupCorrelations correlations_from_state(const DensityMatrix& rho);
// Estimates every correlator the tables support on `sites` (0-based).
GroupCorrelations correlations_from_counts(std::span<const CountsTable> tables, std::span<const int> sites);

struct FidelityValue {
  double value = 0.0;
  double std_error = 0.0;
};

// (b_k + sum_{i<j} sum_a |<A~_i A~_j>|) / (4 b_k), b_k = k(k-1)/2.
// Errors are propagated linearly with the observed signs; a rotated
// correlator within one standard error of zero adds its error linearly.
FidelityValue symmetric_bell_fidelity(const GroupCorrelations& c, const LocalRotationSet& rot);
// ((k-1) + sum_i sum_a |<A~_i A~_{i+1}>|) / (4 (k-1)).
FidelityValue nn_bell_fidelity(const GroupCorrelations& c, const LocalRotationSet& rot);

enum class ThresholdKind { SymmetricBisep, SymmetricMax, NnBisep, NnMax };

double threshold(ThresholdKind kind, int k);

struct RotationOptions {
  bool full_su2 = false;
  int grid_points = 0;  // 0 selects 16 for k <= 3 and 8 otherwise
  int max_evaluations = 4000;
};

struct RotationResult {
  LocalRotationSet rotations;
  double value = 0.0;
};

// Maximizes the symmetric fidelity: grid search, then Nelder-Mead from the
// best grid point. Ties go to theta = 0.
RotationResult optimize_rotations(const GroupCorrelations& c, RotationOptions options = {});

struct FidelityVerdict {
  int k = 0;
  std::vector<int> group;  // 0-based sites
  double value = 0.0;
  double std_error = 0.0;
  double threshold = 0.0;
  bool detected = false;
  LocalRotationSet rotations;

  // (value - threshold) / std_error; infinite for exact data.
  double significance() const;
};

// Optimized symmetric fidelity of one group against its biseparability bound.
FidelityVerdict evaluate_group(const GroupCorrelations& c, std::vector<int> group, RotationOptions options = {});

struct FidelityRow {
  double t_ms = 0.0;
  FidelityVerdict verdict;
};

// All neighbouring k-groups (k = 2 or 3) at every time step.
std::vector<FidelityRow> fidelity_sweep(std::span<const TimeStepCounts> steps, int k, RotationOptions options = {});

// Columns t_ms, k, group_start (1-based), value, std_error, threshold, detected.
void write_fidelity_csv(std::ostream& out, std::span<const FidelityRow> rows);

struct RandomSearchResult {
  double best_value = 0.0;
  CVector best_state;
};

// Largest optimized symmetric fidelity over random pure k-qubit states.
RandomSearchResult random_search_symmetric(int k, int samples, std::uint64_t seed, RotationOptions options = {});

}  // namespace gmecert
