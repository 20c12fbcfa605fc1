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

#include "gmecert/state.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

namespace gmecert {

namespace {

void check_qubits(int n, const char* who) {
  if (n < 1 || n > kMaxDenseQubits)
    throw std::length_error(std::string(who) + ": qubit count " + std::to_string(n) +
                            " outside [1, " + std::to_string(kMaxDenseQubits) + "]");
}

void check_sites(std::span<const int> sites, int n) {
  if (sites.empty()) throw std::invalid_argument("reduce: empty site list");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int s : sites) {
    if (s < 0 || s >= n)
      throw std::out_of_range("reduce: site " + std::to_string(s) + " out of range");
    if (seen[static_cast<std::size_t>(s)]++)
      throw std::invalid_argument("reduce: repeated site " + std::to_string(s));
  }
}

// Splits every n-qubit index into (index over `sites` in the given order,
// index over the remaining qubits in ascending order).
struct SiteSplit {
  std::vector<std::uint64_t> sub;
  std::vector<std::uint64_t> env;
  int sub_qubits;
  int env_qubits;
};

SiteSplit split_indices(int n, std::span<const int> sites) {
  std::vector<int> rest;
  for (int q = 0; q < n; ++q)
    if (std::find(sites.begin(), sites.end(), q) == sites.end()) rest.push_back(q);
  const std::uint64_t dim = dim_of(n);
  SiteSplit s{std::vector<std::uint64_t>(dim), std::vector<std::uint64_t>(dim),
              static_cast<int>(sites.size()), static_cast<int>(rest.size())};
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    std::uint64_t a = 0;
    for (int q : sites) a = (a << 1) | static_cast<std::uint64_t>(bit_of(idx, q, n));
    std::uint64_t e = 0;
    for (int q : rest) e = (e << 1) | static_cast<std::uint64_t>(bit_of(idx, q, n));
    s.sub[idx] = a;
    s.env[idx] = e;
  }
  return s;
}

CMatrix hermitian_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(CVector amplitudes, int num_qubits)
    : amplitudes_(std::move(amplitudes)), num_qubits_(num_qubits) {
  check_qubits(num_qubits, "PureState");
  if (static_cast<std::uint64_t>(amplitudes_.size()) != dim_of(num_qubits))
    throw std::invalid_argument("PureState: amplitude count does not match 2^N");
  if (std::abs(amplitudes_.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("PureState: vector is not normalized");
}

PureState PureState::from_bitstring(std::string_view bits) {
  const int n = static_cast<int>(bits.size());
  check_qubits(n, "PureState::from_bitstring");
  std::uint64_t idx = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("bitstring must contain only 0/1");
    idx = (idx << 1) | static_cast<std::uint64_t>(c == '1');
  }
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim_of(n)));
  v(static_cast<Eigen::Index>(idx)) = 1.0;
  return PureState(std::move(v), n);
}

double PureState::expectation(const PauliString& p) const {
  if (p.size() != num_qubits_) throw std::invalid_argument("expectation: size mismatch");
  // Apply the string to the vector site by site.
  CVector out = amplitudes_;
  const std::uint64_t dim = dim_of(num_qubits_);
  const cplx i1(0.0, 1.0);
  for (int q = 0; q < num_qubits_; ++q) {
    const Pauli op = p.op(q);
    if (op == Pauli::I) continue;
    const std::uint64_t bit = std::uint64_t{1} << (num_qubits_ - 1 - q);
    if (op == Pauli::Z) {
      for (std::uint64_t k = 0; k < dim; ++k)
        if (!(k & bit)) out(static_cast<Eigen::Index>(k)) = -out(static_cast<Eigen::Index>(k));
      continue;
    }
    for (std::uint64_t k = 0; k < dim; ++k) {
      if (k & bit) continue;
      const auto k0 = static_cast<Eigen::Index>(k);
      const auto k1 = static_cast<Eigen::Index>(k | bit);
      const cplx a0 = out(k0), a1 = out(k1);
      if (op == Pauli::X) {
        out(k0) = a1;
        out(k1) = a0;
      } else {  // Y = [[0,-i],[i,0]]
        out(k0) = -i1 * a1;
        out(k1) = i1 * a0;
      }
    }
  }
  return p.coefficient() * amplitudes_.dot(out).real();
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(CMatrix matrix, int num_qubits, Trusted)
    : matrix_(hermitian_part(matrix)), num_qubits_(num_qubits) {}

DensityMatrix::DensityMatrix(CMatrix matrix, int num_qubits) : num_qubits_(num_qubits) {
  check_qubits(num_qubits, "DensityMatrix");
  if (matrix.rows() != matrix.cols() ||
      static_cast<std::uint64_t>(matrix.rows()) != dim_of(num_qubits))
    throw std::invalid_argument("DensityMatrix: shape does not match 2^k");
  if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
    throw std::invalid_argument("DensityMatrix: matrix is not Hermitian");
  if (std::abs(matrix.trace() - cplx(1.0)) > kTraceTol)
    throw std::invalid_argument("DensityMatrix: trace differs from 1");
  matrix_ = hermitian_part(matrix);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigenFloor)
    throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                std::to_string(es.eigenvalues().minCoeff()));
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint(), psi.num_qubits(),
                       Trusted{});
}

DensityMatrix DensityMatrix::maximally_mixed(int num_qubits) {
  check_qubits(num_qubits, "DensityMatrix::maximally_mixed");
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  return DensityMatrix(CMatrix::Identity(d, d) / static_cast<double>(d), num_qubits, Trusted{});
}

DensityMatrix DensityMatrix::trusted(CMatrix matrix, int num_qubits) {
  check_qubits(num_qubits, "DensityMatrix::trusted");
  if (static_cast<std::uint64_t>(matrix.rows()) != dim_of(num_qubits))
    throw std::invalid_argument("DensityMatrix: shape does not match 2^k");
  return DensityMatrix(std::move(matrix), num_qubits, Trusted{});
}

double DensityMatrix::expectation(const PauliString& p) const {
  if (p.size() != num_qubits_) throw std::invalid_argument("expectation: size mismatch");
  return (matrix_ * pauli_string_matrix(p)).trace().real();
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

// ---------------------------------------------------------------------------
// Bipartition

Bipartition::Bipartition(std::uint32_t side_a_mask, int num_qubits)
    : mask_(side_a_mask), num_qubits_(num_qubits) {
  if (num_qubits < 2 || num_qubits > 31) throw std::invalid_argument("Bipartition: need >= 2 qubits");
  const std::uint32_t full = (std::uint32_t{1} << num_qubits) - 1;
  if ((mask_ & ~full) != 0 || mask_ == 0 || mask_ == full)
    throw std::invalid_argument("Bipartition: side A must be a non-empty proper subset");
  if (!(mask_ & 1u)) mask_ = full & ~mask_;  // canonical: qubit 0 in A
}

std::vector<Bipartition> Bipartition::all(int num_qubits) {
  std::vector<Bipartition> out;
  const std::uint32_t count = std::uint32_t{1} << (num_qubits - 1);
  // Masks with qubit 0 set; the full set is excluded.
  for (std::uint32_t rest = 0; rest + 1 < count; ++rest)
    out.emplace_back((rest << 1) | 1u, num_qubits);
  return out;
}

std::vector<int> Bipartition::side_a() const {
  std::vector<int> s;
  for (int q = 0; q < num_qubits_; ++q)
    if (mask_ & (1u << q)) s.push_back(q);
  return s;
}

std::vector<int> Bipartition::side_b() const {
  std::vector<int> s;
  for (int q = 0; q < num_qubits_; ++q)
    if (!(mask_ & (1u << q))) s.push_back(q);
  return s;
}

std::uint64_t Bipartition::index_mask() const {
  std::uint64_t m = 0;
  for (int q = 0; q < num_qubits_; ++q)
    if (mask_ & (1u << q)) m |= std::uint64_t{1} << (num_qubits_ - 1 - q);
  return m;
}

std::string Bipartition::to_string() const {
  std::string s;
  for (int q : side_a()) s += std::to_string(q + 1);
  s += "|";
  for (int q : side_b()) s += std::to_string(q + 1);
  return s;
}

// ---------------------------------------------------------------------------
// Bloch decomposition

CMatrix BlochDecomposition::to_matrix() const {
  const Pauli axes[3] = {Pauli::X, Pauli::Y, Pauli::Z};
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Identity();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix2cd si = pauli_matrix(axes[i]);
    m += bloch_a(i) * Eigen::Matrix4cd(Eigen::kroneckerProduct(si, id));
    m += bloch_b(i) * Eigen::Matrix4cd(Eigen::kroneckerProduct(id, si));
    for (int j = 0; j < 3; ++j)
      m += corr(i, j) * Eigen::Matrix4cd(Eigen::kroneckerProduct(si, pauli_matrix(axes[j])));
  }
  return m / 4.0;
}

double BlochDecomposition::purity() const {
  return (1.0 + bloch_a.squaredNorm() + bloch_b.squaredNorm() + corr.squaredNorm()) / 4.0;
}

BlochDecomposition bloch_decompose(const DensityMatrix& rho) {
  if (rho.num_qubits() != 2) throw std::invalid_argument("bloch_decompose: need 2 qubits");
  const Pauli axes[3] = {Pauli::X, Pauli::Y, Pauli::Z};
  BlochDecomposition b;
  for (int i = 0; i < 3; ++i) {
    b.bloch_a(i) = rho.expectation(PauliString({axes[i], Pauli::I}));
    b.bloch_b(i) = rho.expectation(PauliString({Pauli::I, axes[i]}));
    for (int j = 0; j < 3; ++j) b.corr(i, j) = rho.expectation(PauliString({axes[i], axes[j]}));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Named states

PureState ghz_state(int k) {
  check_qubits(k, "ghz_state");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim_of(k)));
  v(0) = v(v.size() - 1) = 1.0 / std::sqrt(2.0);
  return PureState(std::move(v), k);
}

PureState dicke_state(int k, int excitations) {
  check_qubits(k, "dicke_state");
  if (excitations < 0 || excitations > k)
    throw std::invalid_argument("dicke_state: excitation count out of range");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim_of(k)));
  for (std::uint64_t idx = 0; idx < dim_of(k); ++idx)
    if (std::popcount(idx) == excitations) v(static_cast<Eigen::Index>(idx)) = 1.0;
  v /= v.norm();
  return PureState(std::move(v), k);
}

PureState w_state(int k) { return dicke_state(k, 1); }

PureState bell_state(BellKind kind) {
  const double r = 1.0 / std::sqrt(2.0);
  CVector v = CVector::Zero(4);
  switch (kind) {
    case BellKind::PhiPlus: v(0) = r; v(3) = r; break;
    case BellKind::PhiMinus: v(0) = r; v(3) = -r; break;
    case BellKind::PsiPlus: v(1) = r; v(2) = r; break;
    case BellKind::PsiMinus: v(1) = r; v(2) = -r; break;
  }
  return PureState(std::move(v), 2);
}

PureState neel_state(int k) {
  std::string bits;
  for (int q = 0; q < k; ++q) bits.push_back(q % 2 == 0 ? '1' : '0');
  return PureState::from_bitstring(bits);
}

// ---------------------------------------------------------------------------
// Reductions and partial transposition

CMatrix reduce_amplitudes(const CVector& amplitudes, int n, std::span<const int> sites) {
  check_sites(sites, n);
  const SiteSplit s = split_indices(n, sites);
  const auto rows = static_cast<Eigen::Index>(dim_of(s.sub_qubits));
  const auto cols = static_cast<Eigen::Index>(dim_of(s.env_qubits));
  CMatrix psi = CMatrix::Zero(rows, cols);
  for (std::uint64_t idx = 0; idx < dim_of(n); ++idx)
    psi(static_cast<Eigen::Index>(s.sub[idx]), static_cast<Eigen::Index>(s.env[idx])) =
        amplitudes(static_cast<Eigen::Index>(idx));
  return psi * psi.adjoint();
}

DensityMatrix reduce(const PureState& psi, std::span<const int> sites) {
  return DensityMatrix::trusted(reduce_amplitudes(psi.amplitudes(), psi.num_qubits(), sites),
                                static_cast<int>(sites.size()));
}

DensityMatrix reduce(const DensityMatrix& rho, std::span<const int> sites) {
  const int n = rho.num_qubits();
  check_sites(sites, n);
  const SiteSplit s = split_indices(n, sites);
  const auto d = static_cast<Eigen::Index>(dim_of(s.sub_qubits));
  CMatrix out = CMatrix::Zero(d, d);
  const std::uint64_t dim = dim_of(n);
  for (std::uint64_t r = 0; r < dim; ++r)
    for (std::uint64_t c = 0; c < dim; ++c)
      if (s.env[r] == s.env[c])
        out(static_cast<Eigen::Index>(s.sub[r]), static_cast<Eigen::Index>(s.sub[c])) +=
            rho.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return DensityMatrix::trusted(std::move(out), s.sub_qubits);
}

CMatrix partial_transpose(const CMatrix& m, const Bipartition& part) {
  if (static_cast<std::uint64_t>(m.rows()) != dim_of(part.num_qubits()) || m.rows() != m.cols())
    throw std::invalid_argument("partial_transpose: shape mismatch");
  const std::uint64_t mask = part.index_mask();
  CMatrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto ur = static_cast<std::uint64_t>(r), uc = static_cast<std::uint64_t>(c);
      const std::uint64_t r2 = (ur & ~mask) | (uc & mask);
      const std::uint64_t c2 = (uc & ~mask) | (ur & mask);
      out(static_cast<Eigen::Index>(r2), static_cast<Eigen::Index>(c2)) = m(r, c);
    }
  }
  return out;
}

double negativity(const DensityMatrix& rho, const Bipartition& part) {
  if (rho.num_qubits() != part.num_qubits())
    throw std::invalid_argument("negativity: bipartition size mismatch");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(partial_transpose(rho.matrix(), part),
                                            Eigen::EigenvaluesOnly);
  double neg = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) < 0.0) neg -= es.eigenvalues()(i);
  return neg;
}

double negativity_trace_norm(const DensityMatrix& rho, const Bipartition& part) {
  if (rho.num_qubits() != part.num_qubits())
    throw std::invalid_argument("negativity: bipartition size mismatch");
  Eigen::JacobiSVD<CMatrix> svd(partial_transpose(rho.matrix(), part));
  return std::max(0.0, (svd.singularValues().sum() - 1.0) / 2.0);
}

double uhlmann_fidelity(const DensityMatrix& rho, const PureState& psi) {
  if (rho.dim() != psi.dim()) throw std::invalid_argument("uhlmann_fidelity: dimension mismatch");
  return psi.amplitudes().dot(rho.matrix() * psi.amplitudes()).real();
}

bool pairwise_anticommute(std::span<const CMatrix> ops, double tol) {
  for (std::size_t a = 0; a < ops.size(); ++a)
    for (std::size_t b = a + 1; b < ops.size(); ++b)
      if ((ops[a] * ops[b] + ops[b] * ops[a]).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

double squared_expectation_sum(const DensityMatrix& rho, std::span<const CMatrix> ops) {
  double s = 0.0;
  for (const CMatrix& op : ops) {
    const double e = (rho.matrix() * op).trace().real();
    s += e * e;
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const DensityMatrix& rho) {
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index r = 0; r < rho.dim(); ++r)
    for (Eigen::Index c = 0; c < rho.dim(); ++c)
      entries.push_back({rho.matrix()(r, c).real(), rho.matrix()(r, c).imag()});
  return {{"num_qubits", rho.num_qubits()}, {"matrix", std::move(entries)}};
}

DensityMatrix density_matrix_from_json(const nlohmann::json& j) {
  const int k = j.at("num_qubits").get<int>();
  check_qubits(k, "density_matrix_from_json");
  const auto d = static_cast<Eigen::Index>(dim_of(k));
  const auto& entries = j.at("matrix");
  if (static_cast<Eigen::Index>(entries.size()) != d * d)
    throw std::invalid_argument("density matrix JSON: wrong entry count");
  CMatrix m(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto& e = entries[static_cast<std::size_t>(r * d + c)];
      m(r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
    }
  return DensityMatrix(std::move(m), k);
}

}  // namespace gmecert
