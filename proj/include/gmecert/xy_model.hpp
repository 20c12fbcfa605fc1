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

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "gmecert/pauli.hpp"
#include "gmecert/state.hpp"

namespace gmecert {

// Long-range XY chain
//   H = sum_{i<j} J_ij (s+_i s-_j + s-_i s+_j) + B sum_j Z_j,
//   J_ij = j0 g_i g_j / |i - j|^alpha.
// Times are in ms and couplings in rad/ms (hbar = 1).
struct CouplingModel {
  int num_qubits = 0;
  double alpha = 1.1;
  double j0 = 1.0;
  std::vector<double> envelope;  // g_i > 0; empty means uniform
  double b_field = 0.0;

  static CouplingModel uniform(int n, double alpha, double j0, double b_field = 0.0);

  double g(int i) const;
  void validate() const;
};

// Envelope g_i = exp(-eta (i - c)^2) centred on the chain, with eta chosen
// so the centre-pair coupling exceeds the edge-pair coupling by the given
// ratio (1.25 means 25% larger).
std::vector<double> gaussian_envelope(int n, double centre_edge_ratio);

RMatrix coupling_matrix(const CouplingModel& model);

// Bitstrings of n qubits with m ones, in lexicographic (= ascending
// numeric, qubit 0 most significant) order.
class SectorBasis {
 public:
  SectorBasis(int num_qubits, int excitations);

  int num_qubits() const { return n_; }
  int excitations() const { return m_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(states_.size()); }
  std::uint64_t state(Eigen::Index i) const { return states_[static_cast<std::size_t>(i)]; }
  const std::vector<std::uint64_t>& states() const { return states_; }
  // Rank of `bits` in the basis; bits must have exactly m ones.
  Eigen::Index index_of(std::uint64_t bits) const;

 private:
  int n_;
  int m_;
  std::vector<std::uint64_t> states_;
  std::vector<std::vector<std::uint64_t>> binom_;
};

// State confined to one excitation manifold.
class SectorState {
 public:
  SectorState(std::shared_ptr<const SectorBasis> basis, CVector amplitudes);

  static SectorState from_bitstring(const std::string& bits);

  const SectorBasis& basis() const { return *basis_; }
  std::shared_ptr<const SectorBasis> basis_ptr() const { return basis_; }
  const CVector& amplitudes() const { return amplitudes_; }
  int num_qubits() const { return basis_->num_qubits(); }
  // Full 2^N amplitude vector (N <= 24).
  CVector to_dense() const;

 private:
  std::shared_ptr<const SectorBasis> basis_;
  CVector amplitudes_;
};

class XyHamiltonian {
 public:
  explicit XyHamiltonian(const CouplingModel& model);

  const CouplingModel& model() const { return model_; }
  const RMatrix& couplings() const { return j_; }

  // H|psi>; the result is left unnormalized.
  CVector apply(const SectorState& psi) const;
  CVector apply(const PureState& psi) const;

  // Real symmetric sector block; cached per basis by the callers.
  Eigen::SparseMatrix<double, Eigen::RowMajor> sector_matrix(const SectorBasis& basis) const;
  RMatrix dense_matrix() const;
  // Upper bound on the spectral norm.
  double norm_bound() const;

 private:
  CouplingModel model_;
  RMatrix j_;
};

struct KrylovOptions {
  int subspace = 30;
  double tolerance = 1e-9;
  double max_norm_step = 10.0;  // ||H|| dt per step
  int max_halvings = 40;
};

// Exact propagation through the full 2^N eigendecomposition.
class DensePropagator {
 public:
  explicit DensePropagator(const CouplingModel& model);
  PureState evolve(const PureState& psi, double t_ms) const;

 private:
  int n_;
  RVector energies_;
  RMatrix vectors_;
};

// Lanczos propagation within the excitation sector of the input.
class SectorPropagator {
 public:
  SectorPropagator(const CouplingModel& model, std::shared_ptr<const SectorBasis> basis,
                   KrylovOptions options = {});
  SectorState evolve(const SectorState& psi, double t_ms) const;

 private:
  std::shared_ptr<const SectorBasis> basis_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> h_;
  double norm_bound_;
  KrylovOptions options_;
};

PureState evolve(const CouplingModel& model, const PureState& psi, double t_ms);
SectorState evolve(const CouplingModel& model, const SectorState& psi, double t_ms,
                   KrylovOptions options = {});

std::vector<double> magnetization(const PureState& psi);
std::vector<double> magnetization(const SectorState& psi);

// Reduced density matrix of a sector state without expanding to 2^N.
CMatrix reduce_sector(const SectorState& psi, std::span<const int> sites);

// Classical mixture of Z-basis product states.
struct InitialStateModel {
  std::vector<std::pair<std::string, double>> components;

  static InitialStateModel ideal(const std::string& bits);
  // Weight f_ideal on the Neel state, f_single spread evenly over the n
  // single flips, f_multi spread evenly over the n-1 adjacent double flips.
  static InitialStateModel flip_model(int n, double f_ideal, double f_single, double f_multi);

  int num_qubits() const;
  void validate() const;
};

// Evolved mixture; every component stays in its own excitation sector.
class MixedState {
 public:
  MixedState(std::vector<double> weights, std::vector<SectorState> components);

  int num_qubits() const { return components_.front().num_qubits(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<SectorState>& components() const { return components_; }

  DensityMatrix reduce(std::span<const int> sites) const;
  std::vector<double> magnetization() const;

 private:
  std::vector<double> weights_;
  std::vector<SectorState> components_;
};

MixedState evolve_mixture(const CouplingModel& model, const InitialStateModel& init, double t_ms,
                          KrylovOptions options = {}, std::size_t max_components = 256);

}  // namespace gmecert
