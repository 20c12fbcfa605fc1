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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmecert/pauli.hpp"
#include "gmecert/types.hpp"

namespace gmecert {

// Normalized state vector of N qubits. Amplitude index follows the
// qubit-0-is-most-significant convention; bit 1 denotes |1>.
class PureState {
 public:
  PureState(CVector amplitudes, int num_qubits);

  static PureState from_bitstring(std::string_view bits);

  int num_qubits() const { return num_qubits_; }
  Eigen::Index dim() const { return amplitudes_.size(); }
  const CVector& amplitudes() const { return amplitudes_; }
  double expectation(const PauliString& p) const;

 private:
  CVector amplitudes_;
  int num_qubits_;
};

// Hermitian, unit-trace, positive semidefinite matrix on k qubits.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigenFloor = -1e-9;

  DensityMatrix(CMatrix matrix, int num_qubits);

  static DensityMatrix from_pure(const PureState& psi);
  static DensityMatrix maximally_mixed(int num_qubits);
  // Skips the eigenvalue check; the matrix is still Hermitian-symmetrized.
  // For hot paths whose construction already guarantees positivity.
  static DensityMatrix trusted(CMatrix matrix, int num_qubits);

  int num_qubits() const { return num_qubits_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  const CMatrix& matrix() const { return matrix_; }
  double expectation(const PauliString& p) const;
  double purity() const;

 private:
  struct Trusted {};
  DensityMatrix(CMatrix matrix, int num_qubits, Trusted);

  CMatrix matrix_;
  int num_qubits_;
};

// Split of k qubits into A and its complement. Stored canonically with
// qubit 0 in A, so there are 2^(k-1) - 1 distinct values for k qubits.
class Bipartition {
 public:
  Bipartition(std::uint32_t side_a_mask, int num_qubits);

  static std::vector<Bipartition> all(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  // Bit q set <=> qubit q in A.
  std::uint32_t side_a_mask() const { return mask_; }
  std::vector<int> side_a() const;
  std::vector<int> side_b() const;
  // Mask over amplitude-index bits selecting A's qubits.
  std::uint64_t index_mask() const;
  std::string to_string() const;

 private:
  std::uint32_t mask_;
  int num_qubits_;
};

// Generalized Bloch form of a two-qubit state:
// rho = (1 + a.sigma x 1 + 1 x b.sigma + sum_ij t_ij sigma_i x sigma_j) / 4.
struct BlochDecomposition {
  Eigen::Vector3d bloch_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d bloch_b = Eigen::Vector3d::Zero();
  Eigen::Matrix3d corr = Eigen::Matrix3d::Zero();

  CMatrix to_matrix() const;
  // (1 + |a|^2 + |b|^2 + sum t^2) / 4, equal to Tr(rho^2).
  double purity() const;
};

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

PureState ghz_state(int k);
PureState w_state(int k);
PureState dicke_state(int k, int excitations);
PureState bell_state(BellKind kind);
// |1,0,1,0,...>
PureState neel_state(int k);

// Partial trace onto `sites` (0-based, distinct); the output qubit order
// follows the order of `sites`.
DensityMatrix reduce(const PureState& psi, std::span<const int> sites);
DensityMatrix reduce(const DensityMatrix& rho, std::span<const int> sites);
// Same contraction on a raw amplitude vector of n qubits.
CMatrix reduce_amplitudes(const CVector& amplitudes, int n, std::span<const int> sites);

// Partial transpose on side A. Applies to any square matrix of matching size.
CMatrix partial_transpose(const CMatrix& m, const Bipartition& part);

// Sum of |negative eigenvalues| of rho^{T_A}.
double negativity(const DensityMatrix& rho, const Bipartition& part);
// (||rho^{T_A}||_1 - 1) / 2 via singular values; agrees with negativity().
double negativity_trace_norm(const DensityMatrix& rho, const Bipartition& part);

// <psi|rho|psi>
double uhlmann_fidelity(const DensityMatrix& rho, const PureState& psi);

BlochDecomposition bloch_decompose(const DensityMatrix& rho);

// True if every pair of operators anticommutes (within tol in max-norm).
bool pairwise_anticommute(std::span<const CMatrix> ops, double tol = 1e-12);
// Sum of squared expectation values of the given Hermitian operators.
double squared_expectation_sum(const DensityMatrix& rho, std::span<const CMatrix> ops);

nlohmann::json to_json(const DensityMatrix& rho);
DensityMatrix density_matrix_from_json(const nlohmann::json& j);

}  // namespace gmecert
