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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "gmecert/xy_model.hpp"
#include "test_helpers.hpp"

using namespace gmecert;

namespace {

// Builds the full Hamiltonian from Kronecker products of Pauli matrices:
// s+s- + s-s+ = (XX + YY) / 2.
CMatrix pauli_hamiltonian(const CouplingModel& model) {
  const int n = model.num_qubits;
  const RMatrix j = coupling_matrix(model);
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  CMatrix h = CMatrix::Zero(d, d);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const PauliString xx = PauliString::two_site(n, a, Pauli::X, b, Pauli::X);
      const PauliString yy = PauliString::two_site(n, a, Pauli::Y, b, Pauli::Y);
      h += 0.5 * j(a, b) * (pauli_string_matrix(xx) + pauli_string_matrix(yy));
    }
    std::string z(static_cast<std::size_t>(n), 'I');
    z[static_cast<std::size_t>(a)] = 'Z';
    h += model.b_field * pauli_string_matrix(PauliString::parse(z));
  }
  return h;
}

SectorState random_sector_state(std::mt19937_64& rng, int n, int m) {
  auto basis = std::make_shared<const SectorBasis>(n, m);
  return SectorState(basis, gmecert::testing::random_vector(rng, basis->size()));
}

double overlap(const CVector& a, const CVector& b) { return std::abs(a.dot(b)); }

}  // namespace

TEST_CASE("coupling matrix follows the power law") {
  const RMatrix j2 = coupling_matrix(CouplingModel::uniform(2, 1.1, 1.0));
  CHECK(j2(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  const RMatrix j3 = coupling_matrix(CouplingModel::uniform(3, 1.1, 1.0));
  CHECK(j3(0, 2) == doctest::Approx(std::exp(-1.1 * std::log(2.0))).epsilon(1e-14));
  CHECK(j3(0, 2) == doctest::Approx(0.4665).epsilon(1e-4));
  CHECK((j3 - j3.transpose()).norm() == 0.0);
  CHECK(j3.diagonal().norm() == 0.0);

  CouplingModel bad = CouplingModel::uniform(3, 0.0, 1.0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = CouplingModel::uniform(3, 1.0, 1.0);
  bad.envelope = {1.0, -1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gaussian envelope gives the requested centre/edge ratio") {
  for (int n : {6, 8, 20}) {
    CouplingModel m = CouplingModel::uniform(n, 1.1, 1.0);
    m.envelope = gaussian_envelope(n, 1.25);
    const RMatrix j = coupling_matrix(m);
    const int c = n / 2 - 1;
    CHECK(j(c, c + 1) / j(0, 1) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(j(n - 2, n - 1) == doctest::Approx(j(0, 1)).epsilon(1e-12));
  }
}

TEST_CASE("sector basis ordering and ranking") {
  const SectorBasis b(6, 3);
  CHECK(b.size() == 20);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    CHECK(std::popcount(b.state(i)) == 3);
    CHECK(b.index_of(b.state(i)) == i);
    if (i > 0) CHECK(b.state(i - 1) < b.state(i));
  }
  CHECK_THROWS_AS(b.index_of(0b1000011ull), AnalysisError);
  CHECK(SectorBasis(20, 10).size() == 184756);
  CHECK(SectorBasis(5, 0).size() == 1);
}

TEST_CASE("Hamiltonian action matches the Pauli-sum oracle") {
  std::mt19937_64 rng(11);
  CouplingModel m = CouplingModel::uniform(5, 1.3, 0.7, 0.4);
  m.envelope = gaussian_envelope(5, 1.25);
  const XyHamiltonian h(m);
  const CMatrix oracle = pauli_hamiltonian(m);
  CHECK((h.dense_matrix().cast<cplx>() - oracle).cwiseAbs().maxCoeff() < 1e-13);

  const PureState psi = gmecert::testing::random_pure(rng, 5);
  CHECK((h.apply(psi) - oracle * psi.amplitudes()).norm() < 1e-12);

  for (int trial = 0; trial < 1000; ++trial) {
    const int mm = static_cast<int>(rng() % 6);
    const SectorState s = random_sector_state(rng, 5, mm);
    const CVector hs = h.apply(s);
    // Expanding the output back to 2^N must agree with the oracle, which
    // implies the excitation number is preserved.
    CVector full = CVector::Zero(32);
    for (Eigen::Index i = 0; i < hs.size(); ++i) full(static_cast<Eigen::Index>(s.basis().state(i))) = hs(i);
    REQUIRE((full - oracle * s.to_dense()).norm() < 1e-12);
  }

  const CouplingModel m4 = CouplingModel::uniform(4, 1.1, 1.0, 0.3);
  const CVector vac = XyHamiltonian(m4).apply(PureState::from_bitstring("0000"));
  CHECK(vac(0).real() == doctest::Approx(-4 * 0.3));
  CHECK(vac.tail(15).norm() == 0.0);

  const CouplingModel m2 = CouplingModel::uniform(2, 1.1, 1.0, 0.3);
  const CVector h10 = XyHamiltonian(m2).apply(PureState::from_bitstring("10"));
  CHECK(std::abs(h10(1) - cplx(1.0)) < 1e-15);  // |01>
  CHECK(std::abs(h10(2)) < 1e-15);              // |10>, Z sum is 0
}

TEST_CASE("two-qubit evolution is a Rabi swap") {
  const double j0 = 0.8;
  for (double b : {0.0, 1.7}) {
    const CouplingModel m = CouplingModel::uniform(2, 1.1, j0, b);
    const DensePropagator prop(m);
    for (double t : {0.0, 0.3, 1.1, 2.9}) {
      const PureState out = prop.evolve(PureState::from_bitstring("10"), t);
      CVector expect = CVector::Zero(4);
      expect(2) = std::cos(j0 * t);
      expect(1) = cplx(0.0, -std::sin(j0 * t));
      CHECK(overlap(out.amplitudes(), expect) == doctest::Approx(1.0).epsilon(1e-12));
      const SectorState s = evolve(m, SectorState::from_bitstring("10"), t);
      CHECK(overlap(s.to_dense(), expect) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const PureState quarter = prop.evolve(PureState::from_bitstring("10"), std::numbers::pi / 4 / j0);
    CHECK(std::abs(magnetization(quarter)[0]) < 1e-12);
  }
}

TEST_CASE("dense propagation matches the matrix exponential oracle") {
  std::mt19937_64 rng(5);
  CouplingModel m = CouplingModel::uniform(4, 1.1, 1.3, 0.5);
  const CMatrix h = pauli_hamiltonian(m);
  const PureState psi = gmecert::testing::random_pure(rng, 4);
  const double t = 0.77;
  const CMatrix u = (cplx(0.0, -t) * h).exp();
  const PureState out = DensePropagator(m).evolve(psi, t);
  CHECK((out.amplitudes() - u * psi.amplitudes()).norm() < 1e-11);
}

TEST_CASE("unitarity, identity at t=0 and the group property") {
  std::mt19937_64 rng(7);
  const CouplingModel m = CouplingModel::uniform(8, 1.1, 1.0, 0.2);
  const SectorState s0 = random_sector_state(rng, 8, 4);
  const SectorPropagator prop(m, s0.basis_ptr());
  CHECK(prop.evolve(s0, 0.0).amplitudes() == s0.amplitudes());
  for (double t = 0.0; t <= 4.0; t += 0.25)
    CHECK(std::abs(prop.evolve(s0, t).amplitudes().norm() - 1.0) < 1e-9);
  const SectorState a = prop.evolve(prop.evolve(s0, 0.9), 1.4);
  const SectorState b = prop.evolve(s0, 2.3);
  CHECK((a.amplitudes() - b.amplitudes()).norm() < 1e-8);

  const DensePropagator dense(m);
  const PureState p0 = gmecert::testing::random_pure(rng, 8);
  const PureState pa = dense.evolve(dense.evolve(p0, 0.9), 1.4);
  CHECK((pa.amplitudes() - dense.evolve(p0, 2.3).amplitudes()).norm() < 1e-8);
  CHECK_THROWS_AS(prop.evolve(s0, -1.0), ConfigError);
}

TEST_CASE("Krylov sector propagation agrees with dense propagation") {
  std::mt19937_64 rng(3);
  CouplingModel m = CouplingModel::uniform(10, 1.1, 1.0, 0.3);
  m.envelope = gaussian_envelope(10, 1.25);
  const DensePropagator dense(m);
  const SectorState s0 = random_sector_state(rng, 10, 5);
  const PureState p0(s0.to_dense(), 10);
  for (double t : {0.5, 2.0, 6.0}) {
    const SectorState ks = evolve(m, s0, t);
    const PureState ds = dense.evolve(p0, t);
    CHECK(overlap(ks.to_dense(), ds.amplitudes()) >= 1.0 - 1e-7);
    CHECK((ks.to_dense() - ds.amplitudes()).norm() < 1e-7);
  }
}

TEST_CASE("Krylov reports failure when the subspace cannot converge") {
  const CouplingModel m = CouplingModel::uniform(10, 1.1, 1.0);
  KrylovOptions opts;
  opts.subspace = 2;
  opts.tolerance = 1e-300;
  opts.max_halvings = 3;
  CHECK_THROWS_AS(evolve(m, SectorState::from_bitstring("1010101010"), 5.0, opts), SolverError);
}

TEST_CASE("sector-diagonal observables do not depend on the field") {
  std::mt19937_64 rng(9);
  const SectorState s0 = random_sector_state(rng, 6, 3);
  const CouplingModel m0 = CouplingModel::uniform(6, 1.1, 1.0, 0.0);
  const double jmax = coupling_matrix(m0).maxCoeff();
  const CouplingModel mb = CouplingModel::uniform(6, 1.1, 1.0, 10.0 * jmax);
  for (double t : {0.4, 1.9}) {
    const SectorState a = evolve(m0, s0, t);
    const SectorState b = evolve(mb, s0, t);
    const auto za = magnetization(a);
    const auto zb = magnetization(b);
    for (int q = 0; q < 6; ++q) CHECK(std::abs(za[q] - zb[q]) < 1e-9);
    const int sites[] = {1, 4};
    const DensityMatrix ra(reduce_sector(a, sites), 2);
    const DensityMatrix rb(reduce_sector(b, sites), 2);
    for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z})
      for (Pauli q : {Pauli::X, Pauli::Y, Pauli::Z}) {
        const PauliString ps = PauliString::two_site(2, 0, p, 1, q);
        CHECK(std::abs(ra.expectation(ps) - rb.expectation(ps)) < 1e-9);
      }
  }
}

TEST_CASE("magnetization conventions and conservation") {
  const auto z = magnetization(SectorState::from_bitstring("1010"));
  CHECK(z == std::vector<double>{1.0, -1.0, 1.0, -1.0});
  CHECK(magnetization(neel_state(4)) == z);
  const CouplingModel m = CouplingModel::uniform(8, 1.1, 1.0);
  const SectorState s0 = SectorState::from_bitstring("10101010");
  const SectorPropagator prop(m, s0.basis_ptr());
  for (double t : {0.3, 1.0, 3.0}) {
    const auto zt = magnetization(prop.evolve(s0, t));
    double total = 0.0;
    for (double v : zt) {
      CHECK(v >= -1.0 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
      total += v;
    }
    CHECK(std::abs(total) < 1e-10);
  }
}

TEST_CASE("edge qubits depart from the Neel pattern later than centre qubits") {
  const CouplingModel m = CouplingModel::uniform(8, 1.1, 1.0);
  const SectorState s0 = SectorState::from_bitstring("10101010");
  const SectorPropagator prop(m, s0.basis_ptr());
  std::vector<double> first(8, -1.0);
  for (int step = 1; step <= 400; ++step) {
    const double t = 0.01 * step;
    const auto z = magnetization(prop.evolve(s0, t));
    for (int q = 0; q < 8; ++q)
      if (first[q] < 0.0 && std::abs(z[q]) <= 0.5) first[q] = t;
  }
  for (double f : first) REQUIRE(f > 0.0);
  CHECK(first[0] > first[3]);
  CHECK(first[0] > first[4]);
  CHECK(first[7] > first[3]);
  CHECK(first[7] > first[4]);
}

TEST_CASE("reduced states of sector vectors match the dense reduction") {
  std::mt19937_64 rng(21);
  const SectorState s = random_sector_state(rng, 7, 3);
  const std::vector<std::vector<int>> site_sets = {{0}, {2, 5}, {6, 1, 3}, {0, 1, 2, 3}};
  for (const auto& sites : site_sets) {
    const CMatrix a = reduce_sector(s, sites);
    const CMatrix b = reduce_amplitudes(s.to_dense(), 7, sites);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("initial-state models") {
  const InitialStateModel fm = InitialStateModel::flip_model(8, 0.829, 0.146, 0.025);
  CHECK(fm.components.size() == 1 + 8 + 7);
  double total = 0.0;
  for (const auto& [bits, f] : fm.components) total += f;
  CHECK(std::abs(total - 1.0) < 1e-12);
  for (const auto& [bits, f] : fm.components)
    if (bits == "10101010") CHECK(f == doctest::Approx(0.829));

  InitialStateModel bad;
  bad.components = {{"10", 0.6}, {"01", 0.3}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.components = {{"10", 1.2}, {"01", -0.2}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const CouplingModel m = CouplingModel::uniform(8, 1.1, 1.0);
  CHECK_THROWS_AS(evolve_mixture(m, fm, 1.0, {}, 4), ConfigError);
}

TEST_CASE("mixture reduction is linear and matches the pure pipeline") {
  const CouplingModel m = CouplingModel::uniform(6, 1.1, 1.0, 0.1);
  const double t = 1.3;
  const int sites[] = {1, 2, 3};

  const MixedState single = evolve_mixture(m, InitialStateModel::ideal("101010"), t);
  const PureState pure = DensePropagator(m).evolve(neel_state(6), t);
  CHECK((single.reduce(sites).matrix() - reduce(pure, sites).matrix()).cwiseAbs().maxCoeff() < 1e-9);

  const InitialStateModel fm = InitialStateModel::flip_model(6, 0.829, 0.146, 0.025);
  const MixedState mix = evolve_mixture(m, fm, t);
  CMatrix manual = CMatrix::Zero(8, 8);
  for (const auto& [bits, f] : fm.components) {
    const SectorState s = evolve(m, SectorState::from_bitstring(bits), t);
    manual += f * reduce_sector(s, sites);
  }
  const DensityMatrix rho = mix.reduce(sites);
  CHECK((rho.matrix() - manual).cwiseAbs().maxCoeff() < 1e-12);
  // Satisfies the full density-matrix checks.
  CHECK_NOTHROW(DensityMatrix(rho.matrix(), 3));
  CHECK(rho.purity() < 1.0);
}
