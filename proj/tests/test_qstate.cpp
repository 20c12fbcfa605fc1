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
#include <random>

#include "gmecert/state.hpp"
#include "test_helpers.hpp"

using namespace gmecert;
using gmecert::testing::random_mixed;
using gmecert::testing::random_pure;

namespace {

// Independent partial-trace oracle: explicit sums over environment bits.
CMatrix brute_force_reduce(const CMatrix& rho, int n, const std::vector<int>& keep) {
  const int k = static_cast<int>(keep.size());
  const Eigen::Index d = Eigen::Index{1} << k;
  CMatrix out = CMatrix::Zero(d, d);
  const Eigen::Index full = Eigen::Index{1} << n;
  for (Eigen::Index r = 0; r < full; ++r) {
    for (Eigen::Index c = 0; c < full; ++c) {
      bool env_equal = true;
      for (int q = 0; q < n && env_equal; ++q) {
        if (std::find(keep.begin(), keep.end(), q) != keep.end()) continue;
        env_equal = ((r >> (n - 1 - q)) & 1) == ((c >> (n - 1 - q)) & 1);
      }
      if (!env_equal) continue;
      Eigen::Index a = 0, b = 0;
      for (int q : keep) {
        a = 2 * a + ((r >> (n - 1 - q)) & 1);
        b = 2 * b + ((c >> (n - 1 - q)) & 1);
      }
      out(a, b) += rho(r, c);
    }
  }
  return out;
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("pauli matrices follow the inverted Z convention") {
  const CMatrix z = pauli_string_matrix(PauliString::parse("Z"));
  CHECK(z(0, 0).real() == -1.0);
  CHECK(z(1, 1).real() == 1.0);
  CHECK(std::abs(z(0, 1)) == 0.0);

  const CMatrix id = pauli_string_matrix(PauliString::parse("II"));
  CHECK(max_abs(id - CMatrix::Identity(4, 4)) == 0.0);

  CHECK(PureState::from_bitstring("00").expectation(PauliString::parse("XX")) == doctest::Approx(0.0));

  for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) {
    const Eigen::Matrix2cd m = pauli_matrix(p);
    CHECK(max_abs(m * m - Eigen::Matrix2cd::Identity()) < 1e-15);
    CHECK(std::abs(m.trace()) < 1e-15);
  }
  CHECK_THROWS_AS(pauli_string_matrix(PauliString(std::vector<Pauli>(13, Pauli::X))),
                  std::length_error);
}

TEST_CASE("axis eigenvectors carry eigenvalue +1 for bit 1") {
  for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z})
    for (int bit : {0, 1}) {
      const Eigen::Vector2cd v = axis_eigenvector(p, bit);
      const Eigen::Vector2cd mv = pauli_matrix(p) * v;
      CHECK((mv - (bit ? 1.0 : -1.0) * v).norm() < 1e-15);
    }
}

TEST_CASE("pure state expectation matches dense matrix route") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const PureState psi = random_pure(rng, 3);
    std::uniform_int_distribution<int> op(0, 3);
    std::vector<Pauli> ops;
    for (int q = 0; q < 3; ++q) ops.push_back(static_cast<Pauli>(op(rng)));
    const PauliString p(ops);
    const double dense =
        psi.amplitudes().dot(pauli_string_matrix(p) * psi.amplitudes()).real();
    CHECK(psi.expectation(p) == doctest::Approx(dense).epsilon(1e-12));
  }
}

TEST_CASE("reduce") {
  const DensityMatrix half = reduce(bell_state(BellKind::PhiPlus), std::vector<int>{0});
  CHECK(max_abs(half.matrix() - 0.5 * CMatrix::Identity(2, 2)) < 1e-15);

  const DensityMatrix zero = reduce(PureState::from_bitstring("10"), std::vector<int>{1});
  CHECK(zero.matrix()(0, 0).real() == doctest::Approx(1.0));
  CHECK(std::abs(zero.matrix()(1, 1)) < 1e-15);

  // Neel |1010>, sites 2 and 3 (1-based) -> |0><0| x |1><1|.
  const PureState neel = neel_state(4);
  const std::vector<int> sites{1, 2};
  const DensityMatrix r = reduce(neel, sites);
  const CMatrix oracle = brute_force_reduce(DensityMatrix::from_pure(neel).matrix(), 4, sites);
  CHECK(max_abs(r.matrix() - oracle) < 1e-15);
  CHECK(r.matrix()(1, 1).real() == doctest::Approx(1.0));

  SUBCASE("site order is respected and matches the brute-force oracle") {
    std::mt19937_64 rng(11);
    const DensityMatrix rho = random_mixed(rng, 4);
    const std::vector<int> order{3, 0, 2};
    CHECK(max_abs(reduce(rho, order).matrix() - brute_force_reduce(rho.matrix(), 4, order)) <
          1e-14);
    const PureState psi = random_pure(rng, 4);
    CHECK(max_abs(reduce(psi, order).matrix() -
                  brute_force_reduce(DensityMatrix::from_pure(psi).matrix(), 4, order)) < 1e-14);
  }

  CHECK_THROWS_AS(reduce(neel, std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(reduce(neel, std::vector<int>{4}), std::out_of_range);
  CHECK_THROWS_AS(reduce(neel, std::vector<int>{1, 1}), std::invalid_argument);
}

TEST_CASE("bipartitions") {
  CHECK(Bipartition::all(3).size() == 3);
  CHECK(Bipartition::all(4).size() == 7);
  CHECK(Bipartition::all(5).size() == 15);
  for (const Bipartition& b : Bipartition::all(5)) CHECK((b.side_a_mask() & 1u) == 1u);
  // Complement is canonicalized.
  CHECK(Bipartition(0b110, 3).side_a_mask() == 0b001);
  CHECK_THROWS(Bipartition(0b111, 3));
  CHECK_THROWS(Bipartition(0, 3));
}

TEST_CASE("partial transpose") {
  std::mt19937_64 rng(3);
  const Bipartition cut(0b01, 2);

  CMatrix diag = CMatrix::Zero(4, 4);
  diag.diagonal() << 0.1, 0.2, 0.3, 0.4;
  CHECK(max_abs(partial_transpose(diag, cut) - diag) == 0.0);

  for (int k = 2; k <= 4; ++k)
    for (const Bipartition& b : Bipartition::all(k)) {
      const DensityMatrix rho = random_mixed(rng, k);
      CHECK(partial_transpose(partial_transpose(rho.matrix(), b), b) == rho.matrix());
      const CMatrix pt = partial_transpose(rho.matrix(), b);
      CHECK(max_abs(pt - pt.adjoint()) < 1e-15);
      CHECK(std::abs(pt.trace() - cplx(1.0)) < 1e-12);
    }

  // Oracle: eigenvalues of the 4x4 partial transpose of |phi+><phi+|.
  const CMatrix pt =
      partial_transpose(DensityMatrix::from_pure(bell_state(BellKind::PhiPlus)).matrix(), cut);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(pt);
  CHECK(es.eigenvalues()(0) == doctest::Approx(-0.5));
  for (int i = 1; i < 4; ++i) CHECK(es.eigenvalues()(i) == doctest::Approx(0.5));
}

TEST_CASE("negativity") {
  const DensityMatrix phi = DensityMatrix::from_pure(bell_state(BellKind::PhiPlus));
  CHECK(negativity(phi, Bipartition(1, 2)) == doctest::Approx(0.5));
  const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(3));
  for (const Bipartition& b : Bipartition::all(3))
    CHECK(negativity(ghz, b) == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  SUBCASE("eigenvalue and trace-norm forms agree") {
    for (int k = 2; k <= 5; ++k) {
      const auto cuts = Bipartition::all(k);
      for (int trial = 0; trial < 1000; ++trial) {
        const DensityMatrix rho = random_mixed(rng, k, 1 + trial % 4);
        const Bipartition& b = cuts[static_cast<std::size_t>(trial) % cuts.size()];
        CHECK(std::abs(negativity(rho, b) - negativity_trace_norm(rho, b)) < 1e-9);
      }
    }
  }

  SUBCASE("separable states are PPT") {
    for (int trial = 0; trial < 200; ++trial) {
      // Mixture of products across the cut 1|23.
      CMatrix m = CMatrix::Zero(8, 8);
      for (int t = 0; t < 3; ++t) {
        const CVector v = gmecert::testing::kron(gmecert::testing::random_vector(rng, 2),
                                                 gmecert::testing::random_vector(rng, 4));
        m += v * v.adjoint() / 3.0;
      }
      CHECK(negativity(DensityMatrix(m, 3), Bipartition(0b001, 3)) <= 1e-9);
      const DensityMatrix a = random_mixed(rng, 1), b = random_mixed(rng, 2);
      CMatrix prod(8, 8);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) prod.block(4 * i, 4 * j, 4, 4) = a.matrix()(i, j) * b.matrix();
      CHECK(negativity(DensityMatrix(prod, 3), Bipartition(0b001, 3)) <= 1e-9);
    }
  }
}

TEST_CASE("fidelity and named states") {
  std::mt19937_64 rng(2);
  const PureState psi = random_pure(rng, 3);
  CHECK(uhlmann_fidelity(DensityMatrix::from_pure(psi), psi) == doctest::Approx(1.0));
  for (BellKind kind : {BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus})
    CHECK(uhlmann_fidelity(DensityMatrix::maximally_mixed(2), bell_state(kind)) ==
          doctest::Approx(0.25));

  // Sign pattern of the psi- projector in terms of two-qubit correlators.
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix rho = random_mixed(rng, 2);
    const double xx = rho.expectation(PauliString::parse("XX"));
    const double yy = rho.expectation(PauliString::parse("YY"));
    const double zz = rho.expectation(PauliString::parse("ZZ"));
    CHECK(uhlmann_fidelity(rho, bell_state(BellKind::PsiMinus)) ==
          doctest::Approx((1 - xx - yy - zz) / 4).epsilon(1e-12));
  }

  const double r2 = 1 / std::sqrt(2.0), r3 = 1 / std::sqrt(3.0);
  const CVector& ghz = ghz_state(3).amplitudes();
  CHECK(ghz(0).real() == doctest::Approx(r2));
  CHECK(ghz(7).real() == doctest::Approx(r2));
  const CVector& w = w_state(3).amplitudes();
  for (int idx : {4, 2, 1}) CHECK(w(idx).real() == doctest::Approx(r3));
  CHECK(w.norm() == doctest::Approx(1.0));
  const CVector& d = dicke_state(3, 2).amplitudes();
  for (int idx : {6, 5, 3}) CHECK(d(idx).real() == doctest::Approx(r3));
  CHECK(std::abs(neel_state(4).amplitudes()(0b1010) - cplx(1.0)) == 0.0);
  CHECK_THROWS(dicke_state(3, 4));
}

TEST_CASE("bloch decomposition") {
  const BlochDecomposition phi = bloch_decompose(DensityMatrix::from_pure(bell_state(BellKind::PhiPlus)));
  CHECK(phi.bloch_a.norm() < 1e-15);
  CHECK(phi.bloch_b.norm() < 1e-15);
  Eigen::Matrix3d expected = Eigen::Vector3d(1, -1, 1).asDiagonal();
  CHECK((phi.corr - expected).norm() < 1e-14);

  const BlochDecomposition mixed = bloch_decompose(DensityMatrix::maximally_mixed(2));
  CHECK(mixed.bloch_a.norm() + mixed.bloch_b.norm() + mixed.corr.norm() < 1e-15);

  // Near-threshold fixture: unit trace, PSD and pure.
  const double r = 1 / std::sqrt(2.0);
  BlochDecomposition fixture;
  fixture.bloch_a = fixture.bloch_b = Eigen::Vector3d(0, 0, r);
  fixture.corr = Eigen::Vector3d(r, -r, 1).asDiagonal();
  const CMatrix m = fixture.to_matrix();
  const DensityMatrix rho(m, 2);
  CHECK(rho.purity() == doctest::Approx(1.0));
  CHECK(fixture.purity() == doctest::Approx(1.0));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const DensityMatrix s = random_mixed(rng, 2, 1 + trial % 4);
    const BlochDecomposition b = bloch_decompose(s);
    CHECK(std::abs(b.purity() - s.purity()) < 1e-9);
    CHECK(max_abs(b.to_matrix() - s.matrix()) < 1e-10);
    CHECK(b.bloch_a.norm() <= 1 + 1e-12);
    CHECK(b.corr.cwiseAbs().maxCoeff() <= 1 + 1e-12);
  }
}

TEST_CASE("anticommutativity theorem on the standard triples") {
  auto op = [](const char* s) { return pauli_string_matrix(PauliString::parse(s)); };
  // Pairs used for the nearest-neighbour bound and columns of the symmetric
  // arrangement for three qubits.
  const std::vector<std::vector<CMatrix>> groups = {
      {op("XXI"), op("IYY")},         {op("YYI"), op("IZZ")},         {op("ZZI"), op("IXX")},
      {op("XXI"), op("YIY"), op("IZZ")}, {op("IXX"), op("YYI"), op("ZIZ")},
      {op("XIX"), op("IYY"), op("ZZI")}};
  for (const auto& g : groups) REQUIRE(pairwise_anticommute(g));
  CHECK_FALSE(pairwise_anticommute(std::vector<CMatrix>{op("XXI"), op("YYI")}));

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const DensityMatrix rho = trial % 2 ? random_mixed(rng, 3, 1 + trial % 3)
                                        : DensityMatrix::from_pure(random_pure(rng, 3));
    for (const auto& g : groups) CHECK(squared_expectation_sum(rho, g) <= 1.0 + 1e-9);
  }
}

TEST_CASE("density matrix JSON round trip is exact") {
  std::mt19937_64 rng(17);
  const DensityMatrix rho = random_mixed(rng, 3);
  const auto j = to_json(rho);
  const DensityMatrix back = density_matrix_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.matrix() == rho.matrix());
  CHECK(back.num_qubits() == 3);
}
