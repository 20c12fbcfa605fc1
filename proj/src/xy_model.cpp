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

#include "gmecert/xy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace gmecert {

namespace {

constexpr int kMaxSectorQubits = 24;

std::uint64_t bitstring_to_index(const std::string& bits) {
  std::uint64_t idx = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ConfigError("bitstring must contain only 0 and 1: " + bits);
    idx = (idx << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return idx;
}

// Adds J_ij hopping and the field term for one basis state.
template <typename Emit>
void for_each_hop(std::uint64_t s, int n, const RMatrix& j, Emit&& emit) {
  for (int a = 0; a < n; ++a) {
    const std::uint64_t ba = std::uint64_t{1} << (n - 1 - a);
    for (int b = a + 1; b < n; ++b) {
      const std::uint64_t bb = std::uint64_t{1} << (n - 1 - b);
      if (((s & ba) != 0) != ((s & bb) != 0)) emit(s ^ (ba | bb), j(a, b));
    }
  }
}

double field_energy(std::uint64_t s, int n, double b_field) {
  return b_field * (2.0 * std::popcount(s) - n);
}

}  // namespace

CouplingModel CouplingModel::uniform(int n, double alpha, double j0, double b_field) {
  CouplingModel m;
  m.num_qubits = n;
  m.alpha = alpha;
  m.j0 = j0;
  m.b_field = b_field;
  return m;
}

double CouplingModel::g(int i) const {
  return envelope.empty() ? 1.0 : envelope[static_cast<std::size_t>(i)];
}

void CouplingModel::validate() const {
  if (num_qubits < 1) throw ConfigError("coupling model needs at least one qubit");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(j0 > 0.0)) throw ConfigError("j0 must be positive");
  if (!std::isfinite(b_field)) throw ConfigError("b_field must be finite");
  if (!envelope.empty()) {
    if (static_cast<int>(envelope.size()) != num_qubits)
      throw ConfigError("envelope length must equal num_qubits");
    for (double g : envelope)
      if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("envelope entries must be positive");
  }
}

std::vector<double> gaussian_envelope(int n, double centre_edge_ratio) {
  if (n < 1) throw ConfigError("envelope needs at least one site");
  if (!(centre_edge_ratio >= 1.0)) throw ConfigError("centre/edge ratio must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(n), 1.0);
  if (n < 4) return g;
  // With 1-based sites and centre c = (n+1)/2, the centre pair (n/2, n/2+1)
  // for even n has g_i g_j = exp(-eta/2) and the edge pair (1,2) has
  // exp(-eta((n-1)^2 + (n-3)^2)/4). Odd n uses the same formula with the
  // pair straddling the middle site.
  const double c = 0.5 * (n + 1);
  const int i0 = n / 2;
  const double centre = (i0 - c) * (i0 - c) + (i0 + 1 - c) * (i0 + 1 - c);
  const double edge = (1 - c) * (1 - c) + (2 - c) * (2 - c);
  const double eta = std::log(centre_edge_ratio) / (edge - centre);
  for (int i = 1; i <= n; ++i) g[static_cast<std::size_t>(i - 1)] = std::exp(-eta * (i - c) * (i - c));
  return g;
}

RMatrix coupling_matrix(const CouplingModel& model) {
  model.validate();
  const int n = model.num_qubits;
  RMatrix j = RMatrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const double v = model.j0 * model.g(a) * model.g(b) / std::pow(static_cast<double>(b - a), model.alpha);
      j(a, b) = v;
      j(b, a) = v;
    }
  return j;
}

SectorBasis::SectorBasis(int num_qubits, int excitations) : n_(num_qubits), m_(excitations) {
  if (n_ < 1 || n_ > kMaxSectorQubits) throw ConfigError("sector basis supports 1..24 qubits");
  if (m_ < 0 || m_ > n_) throw ConfigError("excitation number out of range");
  binom_.assign(static_cast<std::size_t>(n_ + 1), std::vector<std::uint64_t>(static_cast<std::size_t>(n_ + 1), 0));
  for (int a = 0; a <= n_; ++a) {
    binom_[a][0] = 1;
    for (int b = 1; b <= a; ++b) binom_[a][b] = binom_[a - 1][b - 1] + (b <= a - 1 ? binom_[a - 1][b] : 0);
  }
  states_.reserve(binom_[n_][m_]);
  if (m_ == 0) {
    states_.push_back(0);
    return;
  }
  // Gosper's hack enumerates m-subsets in increasing numeric order.
  std::uint64_t s = (std::uint64_t{1} << m_) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n_;
  while (s < limit) {
    states_.push_back(s);
    const std::uint64_t c = s & (~s + 1);
    const std::uint64_t r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
}

Eigen::Index SectorBasis::index_of(std::uint64_t bits) const {
  if (std::popcount(bits) != m_ || (n_ < 64 && (bits >> n_) != 0))
    throw AnalysisError("bitstring is not in this excitation sector");
  // Count sector members numerically below `bits`: for every set bit, the
  // strings that share the prefix and have 0 there.
  std::uint64_t rank = 0;
  int remaining = m_;
  for (int q = 0; q < n_ && remaining > 0; ++q) {
    const int pos = n_ - 1 - q;
    if ((bits >> pos) & 1u) {
      rank += binom_[pos][remaining];
      --remaining;
    }
  }
  return static_cast<Eigen::Index>(rank);
}

SectorState::SectorState(std::shared_ptr<const SectorBasis> basis, CVector amplitudes)
    : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
  if (!basis_) throw AnalysisError("sector state needs a basis");
  if (amplitudes_.size() != basis_->size()) throw AnalysisError("sector amplitude length mismatch");
  if (std::abs(amplitudes_.norm() - 1.0) > 1e-10) throw AnalysisError("sector state is not normalized");
}

SectorState SectorState::from_bitstring(const std::string& bits) {
  const int n = static_cast<int>(bits.size());
  const std::uint64_t idx = bitstring_to_index(bits);
  auto basis = std::make_shared<const SectorBasis>(n, std::popcount(idx));
  CVector amps = CVector::Zero(basis->size());
  amps(basis->index_of(idx)) = 1.0;
  return SectorState(std::move(basis), std::move(amps));
}

CVector SectorState::to_dense() const {
  CVector out = CVector::Zero(static_cast<Eigen::Index>(dim_of(num_qubits())));
  for (Eigen::Index i = 0; i < amplitudes_.size(); ++i)
    out(static_cast<Eigen::Index>(basis_->state(i))) = amplitudes_(i);
  return out;
}

XyHamiltonian::XyHamiltonian(const CouplingModel& model) : model_(model), j_(coupling_matrix(model)) {}

CVector XyHamiltonian::apply(const SectorState& psi) const {
  if (psi.num_qubits() != model_.num_qubits) throw AnalysisError("state size does not match the model");
  const SectorBasis& basis = psi.basis();
  const int n = model_.num_qubits;
  CVector out = CVector::Zero(basis.size());
  for (Eigen::Index i = 0; i < basis.size(); ++i) {
    const cplx a = psi.amplitudes()(i);
    const std::uint64_t s = basis.state(i);
    out(i) += field_energy(s, n, model_.b_field) * a;
    for_each_hop(s, n, j_, [&](std::uint64_t t, double w) { out(basis.index_of(t)) += w * a; });
  }
  return out;
}

CVector XyHamiltonian::apply(const PureState& psi) const {
  if (psi.num_qubits() != model_.num_qubits) throw AnalysisError("state size does not match the model");
  const int n = model_.num_qubits;
  CVector out = CVector::Zero(psi.dim());
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    const cplx a = psi.amplitudes()(i);
    const auto s = static_cast<std::uint64_t>(i);
    out(i) += field_energy(s, n, model_.b_field) * a;
    for_each_hop(s, n, j_, [&](std::uint64_t t, double w) { out(static_cast<Eigen::Index>(t)) += w * a; });
  }
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> XyHamiltonian::sector_matrix(const SectorBasis& basis) const {
  if (basis.num_qubits() != model_.num_qubits) throw AnalysisError("basis size does not match the model");
  const int n = model_.num_qubits;
  const int m = basis.excitations();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(basis.size()) * static_cast<std::size_t>(m * (n - m) + 1));
  for (Eigen::Index i = 0; i < basis.size(); ++i) {
    const std::uint64_t s = basis.state(i);
    const double e = field_energy(s, n, model_.b_field);
    if (e != 0.0) trip.emplace_back(i, i, e);
    for_each_hop(s, n, j_, [&](std::uint64_t t, double w) { trip.emplace_back(i, basis.index_of(t), w); });
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> h(basis.size(), basis.size());
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

RMatrix XyHamiltonian::dense_matrix() const {
  const int n = model_.num_qubits;
  if (n > kMaxDenseQubits) throw std::length_error("dense Hamiltonian limited to 12 qubits");
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  RMatrix h = RMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto s = static_cast<std::uint64_t>(i);
    h(i, i) = field_energy(s, n, model_.b_field);
    for_each_hop(s, n, j_, [&](std::uint64_t t, double w) { h(static_cast<Eigen::Index>(t), i) += w; });
  }
  return h;
}

double XyHamiltonian::norm_bound() const {
  double hop = 0.0;
  for (int a = 0; a < model_.num_qubits; ++a)
    for (int b = a + 1; b < model_.num_qubits; ++b) hop += std::abs(j_(a, b));
  return hop + model_.num_qubits * std::abs(model_.b_field);
}

DensePropagator::DensePropagator(const CouplingModel& model) : n_(model.num_qubits) {
  const XyHamiltonian h(model);
  Eigen::SelfAdjointEigenSolver<RMatrix> es(h.dense_matrix());
  if (es.info() != Eigen::Success) throw SolverError("Hamiltonian diagonalization failed");
  energies_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

PureState DensePropagator::evolve(const PureState& psi, double t_ms) const {
  if (psi.num_qubits() != n_) throw AnalysisError("state size does not match the model");
  if (!(t_ms >= 0.0)) throw ConfigError("evolution time must be nonnegative");
  if (t_ms == 0.0) return psi;
  CVector c = vectors_.transpose().cast<cplx>() * psi.amplitudes();
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::exp(cplx(0.0, -energies_(i) * t_ms));
  CVector out = vectors_.cast<cplx>() * c;
  out /= out.norm();
  return PureState(std::move(out), n_);
}

SectorPropagator::SectorPropagator(const CouplingModel& model, std::shared_ptr<const SectorBasis> basis,
                                   KrylovOptions options)
    : basis_(std::move(basis)), options_(options) {
  if (options_.subspace < 2) throw ConfigError("Krylov subspace must have at least 2 vectors");
  const XyHamiltonian h(model);
  h_ = h.sector_matrix(*basis_);
  norm_bound_ = h.norm_bound();
}

SectorState SectorPropagator::evolve(const SectorState& psi, double t_ms) const {
  if (psi.basis().num_qubits() != basis_->num_qubits() || psi.basis().excitations() != basis_->excitations())
    throw AnalysisError("state is not in the propagator's sector");
  if (!(t_ms >= 0.0)) throw ConfigError("evolution time must be nonnegative");
  if (t_ms == 0.0) return psi;

  const Eigen::Index dim = basis_->size();
  const int mmax = static_cast<int>(std::min<Eigen::Index>(options_.subspace, dim));
  CVector v = psi.amplitudes();
  double remaining = t_ms;
  double dt = norm_bound_ > 0.0 ? std::min(t_ms, options_.max_norm_step / norm_bound_) : t_ms;
  int halvings = 0;

  CMatrix basis_vecs(dim, mmax);
  while (remaining > 0.0) {
    const double step = std::min(dt, remaining);
    const double beta0 = v.norm();
    basis_vecs.col(0) = v / beta0;
    RVector alpha(mmax), beta(mmax);
    int used = 0;
    CVector y;
    bool converged = false;
    for (int j = 0; j < mmax; ++j) {
      CVector w = h_ * basis_vecs.col(j);
      alpha(j) = basis_vecs.col(j).dot(w).real();
      // Full reorthogonalization, applied twice for stability.
      for (int pass = 0; pass < 2; ++pass)
        w -= basis_vecs.leftCols(j + 1) * (basis_vecs.leftCols(j + 1).adjoint() * w);
      beta(j) = w.norm();
      used = j + 1;

      RMatrix t = RMatrix::Zero(used, used);
      for (int a = 0; a < used; ++a) {
        t(a, a) = alpha(a);
        if (a + 1 < used) t(a, a + 1) = t(a + 1, a) = beta(a);
      }
      Eigen::SelfAdjointEigenSolver<RMatrix> es(t);
      CVector phase(used);
      for (int a = 0; a < used; ++a) phase(a) = std::exp(cplx(0.0, -es.eigenvalues()(a) * step));
      const RVector e1 = es.eigenvectors().row(0).transpose();
      y = es.eigenvectors().cast<cplx>() * phase.cwiseProduct(e1.cast<cplx>());
      const bool invariant = beta(j) < 1e-13 * std::max(1.0, norm_bound_);
      const double err = invariant ? 0.0 : beta(j) * std::abs(y(used - 1));
      if (err <= options_.tolerance || invariant || used == dim) {
        converged = true;
        break;
      }
      if (j + 1 < mmax) basis_vecs.col(j + 1) = w / beta(j);
    }
    if (!converged) {
      if (++halvings > options_.max_halvings)
        throw SolverError("Krylov propagation did not converge at the configured subspace size");
      dt = 0.5 * step;
      continue;
    }
    v = beta0 * (basis_vecs.leftCols(used) * y);
    remaining -= step;
  }
  v /= v.norm();
  return SectorState(basis_, std::move(v));
}

PureState evolve(const CouplingModel& model, const PureState& psi, double t_ms) {
  return DensePropagator(model).evolve(psi, t_ms);
}

SectorState evolve(const CouplingModel& model, const SectorState& psi, double t_ms, KrylovOptions options) {
  return SectorPropagator(model, psi.basis_ptr(), options).evolve(psi, t_ms);
}

std::vector<double> magnetization(const PureState& psi) {
  const int n = psi.num_qubits();
  std::vector<double> z(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    const double p = std::norm(psi.amplitudes()(i));
    for (int q = 0; q < n; ++q) z[q] += bit_of(static_cast<std::uint64_t>(i), q, n) ? p : -p;
  }
  return z;
}

std::vector<double> magnetization(const SectorState& psi) {
  const int n = psi.num_qubits();
  std::vector<double> z(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) {
    const double p = std::norm(psi.amplitudes()(i));
    const std::uint64_t s = psi.basis().state(i);
    for (int q = 0; q < n; ++q) z[q] += bit_of(s, q, n) ? p : -p;
  }
  return z;
}

CMatrix reduce_sector(const SectorState& psi, std::span<const int> sites) {
  const int n = psi.num_qubits();
  const int k = static_cast<int>(sites.size());
  std::uint64_t site_mask = 0;
  for (int s : sites) {
    if (s < 0 || s >= n) throw AnalysisError("site index out of range");
    const std::uint64_t b = std::uint64_t{1} << (n - 1 - s);
    if (site_mask & b) throw AnalysisError("duplicate site index");
    site_mask |= b;
  }
  // Group amplitudes by the environment bits; each group contributes an
  // outer product on the kept sites.
  std::unordered_map<std::uint64_t, std::vector<std::pair<Eigen::Index, cplx>>> groups;
  for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) {
    const cplx a = psi.amplitudes()(i);
    if (a == cplx(0.0)) continue;
    const std::uint64_t s = psi.basis().state(i);
    std::uint64_t sub = 0;
    for (int site : sites) sub = (sub << 1) | static_cast<std::uint64_t>(bit_of(s, site, n));
    groups[s & ~site_mask].emplace_back(static_cast<Eigen::Index>(sub), a);
  }
  const auto d = static_cast<Eigen::Index>(dim_of(k));
  CMatrix rho = CMatrix::Zero(d, d);
  for (const auto& [env, members] : groups)
    for (const auto& [ra, aa] : members)
      for (const auto& [rb, ab] : members) rho(ra, rb) += aa * std::conj(ab);
  return rho;
}

InitialStateModel InitialStateModel::ideal(const std::string& bits) {
  InitialStateModel m;
  m.components.emplace_back(bits, 1.0);
  m.validate();
  return m;
}

InitialStateModel InitialStateModel::flip_model(int n, double f_ideal, double f_single, double f_multi) {
  if (n < 2) throw ConfigError("flip model needs at least two qubits");
  const std::string neel = [&] {
    std::string s(static_cast<std::size_t>(n), '0');
    for (int i = 0; i < n; i += 2) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }();
  auto flip = [](std::string s, int i) {
    s[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] == '1' ? '0' : '1';
    return s;
  };
  std::map<std::string, double> w;
  w[neel] += f_ideal;
  for (int i = 0; i < n; ++i) w[flip(neel, i)] += f_single / n;
  for (int i = 0; i + 1 < n; ++i) w[flip(flip(neel, i), i + 1)] += f_multi / (n - 1);
  InitialStateModel m;
  for (const auto& [bits, f] : w)
    if (f > 0.0) m.components.emplace_back(bits, f);
  m.validate();
  return m;
}

int InitialStateModel::num_qubits() const {
  return components.empty() ? 0 : static_cast<int>(components.front().first.size());
}

void InitialStateModel::validate() const {
  if (components.empty()) throw ConfigError("initial-state model has no components");
  const std::size_t n = components.front().first.size();
  double total = 0.0;
  for (const auto& [bits, f] : components) {
    if (bits.size() != n) throw ConfigError("initial-state components differ in length");
    bitstring_to_index(bits);
    if (!(f >= 0.0)) throw ConfigError("initial-state weights must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("initial-state weights must sum to 1");
}

MixedState::MixedState(std::vector<double> weights, std::vector<SectorState> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty() || weights_.size() != components_.size())
    throw AnalysisError("mixture needs matching nonempty weights and components");
}

DensityMatrix MixedState::reduce(std::span<const int> sites) const {
  const auto d = static_cast<Eigen::Index>(dim_of(static_cast<int>(sites.size())));
  CMatrix rho = CMatrix::Zero(d, d);
  for (std::size_t c = 0; c < components_.size(); ++c) rho += weights_[c] * reduce_sector(components_[c], sites);
  return DensityMatrix::trusted(std::move(rho), static_cast<int>(sites.size()));
}

std::vector<double> MixedState::magnetization() const {
  std::vector<double> z(static_cast<std::size_t>(num_qubits()), 0.0);
  for (std::size_t c = 0; c < components_.size(); ++c) {
    const auto zc = gmecert::magnetization(components_[c]);
    for (std::size_t q = 0; q < z.size(); ++q) z[q] += weights_[c] * zc[q];
  }
  return z;
}

MixedState evolve_mixture(const CouplingModel& model, const InitialStateModel& init, double t_ms,
                          KrylovOptions options, std::size_t max_components) {
  init.validate();
  if (init.components.size() > max_components)
    throw ConfigError("initial-state model exceeds the component cap");
  if (init.num_qubits() != model.num_qubits) throw ConfigError("initial-state length does not match the model");
  // One propagator per excitation sector, shared by its components.
  std::map<int, SectorPropagator> props;
  std::map<int, std::shared_ptr<const SectorBasis>> bases;
  std::vector<double> weights;
  std::vector<SectorState> states;
  for (const auto& [bits, f] : init.components) {
    const int m = static_cast<int>(std::count(bits.begin(), bits.end(), '1'));
    if (!bases.count(m)) {
      bases[m] = std::make_shared<const SectorBasis>(model.num_qubits, m);
      props.emplace(m, SectorPropagator(model, bases[m], options));
    }
    CVector amps = CVector::Zero(bases[m]->size());
    amps(bases[m]->index_of(bitstring_to_index(bits))) = 1.0;
    states.push_back(props.at(m).evolve(SectorState(bases[m], std::move(amps)), t_ms));
    weights.push_back(f);
  }
  return MixedState(std::move(weights), std::move(states));
}

}  // namespace gmecert
