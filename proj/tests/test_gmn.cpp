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

#include <random>
#include <sstream>

#include "gmecert/gmn.hpp"
#include "gmecert/measurement.hpp"
#include "test_helpers.hpp"

using namespace gmecert;
using gmecert::testing::random_biseparable;
using gmecert::testing::random_mixed;
using gmecert::testing::random_pure;

namespace {

// Brute-force minimum of the bipartite negativity over every cut, from the
// eigenvalues of each partial transpose.
double min_cut_negativity(const DensityMatrix& rho) {
  double best = 1e300;
  for (const Bipartition& cut : Bipartition::all(rho.num_qubits())) best = std::min(best, negativity(rho, cut));
  return best;
}

DensityMatrix white_noise(const PureState& psi, double visibility) {
  const auto d = psi.dim();
  const CMatrix m = visibility * psi.amplitudes() * psi.amplitudes().adjoint() +
                    (1.0 - visibility) / static_cast<double>(d) * CMatrix::Identity(d, d);
  return DensityMatrix(m, psi.num_qubits());
}

// Counts proportional to the exact probabilities, so frequencies are exact.
std::vector<CountsTable> exact_tables(const DensityMatrix& rho, std::uint64_t shots) {
  std::vector<CountsTable> out;
  for (const MeasurementSetting& s : scheme_settings(rho.num_qubits())) {
    const RVector p = outcome_probabilities(rho, s);
    CountsTable t{s, {}, shots};
    std::uint64_t total = 0;
    for (Eigen::Index o = 0; o < p.size(); ++o) {
      const auto c = static_cast<std::uint64_t>(std::llround(p(o) * static_cast<double>(shots)));
      if (c == 0) continue;
      std::string bits;
      for (int q = 0; q < rho.num_qubits(); ++q) bits.push_back(bit_of(static_cast<std::uint64_t>(o), q, rho.num_qubits()) ? '1' : '0');
      t.counts[bits] = c;
      total += c;
    }
    t.shots = total;
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("pure-state measure on reference states") {
  CHECK(gmn_pure(PureState::from_bitstring("010")).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gmn_pure(ghz_state(3)).value == doctest::Approx(0.5).epsilon(1e-12));
  const PureState w = w_state(3);
  CHECK(std::abs(gmn_pure(w).value - min_cut_negativity(DensityMatrix::from_pure(w))) <= 1e-12);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const PureState psi = random_pure(rng, 3 + trial % 3);
    CHECK(std::abs(gmn_pure(psi).value - min_cut_negativity(DensityMatrix::from_pure(psi))) <= 1e-10);
  }
  CHECK_THROWS_AS(gmn_pure(PureState::from_bitstring("0")), ConfigError);
}

TEST_CASE("semidefinite measure agrees with the pure-state formula") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const PureState psi = random_pure(rng, trial < 8 ? 3 : 4);
    const GmnResult r = gmn_sdp(DensityMatrix::from_pure(psi));
    CHECK(r.method == GmnMethod::Sdp);
    CHECK(std::abs(r.value - gmn_pure(psi).value) <= 1e-6);
  }
  CHECK(std::abs(gmn_sdp(DensityMatrix::from_pure(ghz_state(3))).value - 0.5) <= 1e-6);
  CHECK(std::abs(gmn_sdp(DensityMatrix::from_pure(w_state(4))).value - gmn_pure(w_state(4)).value) <= 1e-6);
}

TEST_CASE("semidefinite measure vanishes on biseparable mixtures") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 24; ++trial) {
    const DensityMatrix rho = random_biseparable(rng, trial < 16 ? 3 : 4, 2 + trial % 4);
    CHECK(gmn_sdp(rho).value <= 1e-7);
  }
  CHECK(gmn_sdp(DensityMatrix::maximally_mixed(3)).value <= 1e-7);
}

TEST_CASE("two-qubit measure equals the negativity") {
  std::mt19937_64 rng(23);
  const Bipartition cut(1, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityMatrix rho = random_mixed(rng, 2, 1 + trial % 4);
    CHECK(std::abs(gmn_sdp(rho).value - negativity(rho, cut)) <= 1e-6);
  }
  CHECK(std::abs(gmn_sdp(DensityMatrix::from_pure(bell_state(BellKind::PhiPlus))).value - 0.5) <= 1e-6);
}

TEST_CASE("ring of Bell pairs: entangled neighbours without genuine multipartite entanglement") {
  // Equal mixture of the two ways to cover a four-site ring with Bell pairs.
  CVector a = CVector::Zero(16);
  CVector b = CVector::Zero(16);
  for (int i = 0; i < 16; ++i) {
    const int q0 = (i >> 3) & 1, q1 = (i >> 2) & 1, q2 = (i >> 1) & 1, q3 = i & 1;
    if (q0 == q1 && q2 == q3) a(i) = 0.5;
    if (q1 == q2 && q3 == q0) b(i) = 0.5;
  }
  const DensityMatrix rho(0.5 * (a * a.adjoint() + b * b.adjoint()), 4);
  const std::vector<int> pair{0, 1};
  const DensityMatrix reduced = reduce(rho, pair);
  // Half a Bell projector plus an eighth of the identity: trace one.
  const CMatrix expected = 0.5 * DensityMatrix::from_pure(bell_state(BellKind::PhiPlus)).matrix() +
                           0.125 * CMatrix::Identity(4, 4);
  CHECK((reduced.matrix() - expected).norm() <= 1e-12);
  CHECK(std::abs(reduced.matrix().trace().real() - 1.0) <= 1e-12);
  CHECK(std::abs(negativity(reduced, Bipartition(1u, 2)) - 0.125) <= 1e-12);
  CHECK(gmn_sdp(rho).value <= 1e-7);
}

TEST_CASE("noisy GHZ: below the pure value and monotone in visibility") {
  const double pure = gmn_pure(ghz_state(3)).value;
  double previous = 1.0;
  for (double v : {0.95, 0.9, 0.7, 0.5}) {
    const double g = gmn_sdp(white_noise(ghz_state(3), v)).value;
    CHECK(g <= pure + 1e-9);
    CHECK(g <= previous + 1e-9);
    previous = g;
  }
  // Mixing with white noise keeps the GHZ optimum linear until detection
  // stops: N_g = (7 v - 3) / 8 on the detected range.
  CHECK(std::abs(gmn_sdp(white_noise(ghz_state(3), 0.9)).value - (7 * 0.9 - 3) / 8) <= 1e-6);
  CHECK(gmn_sdp(white_noise(ghz_state(3), 0.3)).value <= 1e-7);
}

TEST_CASE("support compression agrees with full-rank neighbours") {
  // A rank-deficient state takes the compressed path; mixing in a little
  // white noise takes the full one. Convexity and vanishing on the maximally
  // mixed state give N((1-d) rho + d 1/8) <= (1-d) N(rho), and the noisy
  // values must approach the compressed one as d shrinks.
  std::mt19937_64 rng(29);
  const DensityMatrix low = random_mixed(rng, 3, 3);
  const double compressed = gmn_sdp(low).value;
  REQUIRE(compressed > 0.01);
  double previous_gap = 1.0;
  for (double d : {1e-3, 1e-5, 1e-7}) {
    const CMatrix blended = (1.0 - d) * low.matrix() + d / 8.0 * CMatrix::Identity(8, 8);
    const DensityMatrix rho(blended, 3);
    CHECK(gmn_problem(rho).variable_dim(SdpVar{0}) == 8);
    const double full = gmn_sdp(rho).value;
    CHECK(full <= (1.0 - d) * compressed + 1e-7);
    const double gap = compressed - full;
    CHECK(gap <= previous_gap);
    previous_gap = gap;
  }
  CHECK(previous_gap <= 1e-3);
  CHECK(gmn_problem(low).variable_dim(SdpVar{0}) == 3);
}

TEST_CASE("bounded slack only lowers the measure") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    const DensityMatrix rho = random_mixed(rng, 3, 2);
    GmnSdpOptions bounded;
    bounded.bounded_slack = true;
    CHECK(gmn_sdp(rho, bounded).value <= gmn_sdp(rho).value + 1e-7);
  }
}

TEST_CASE("projector basis structure") {
  for (int k = 2; k <= 5; ++k) CHECK(projector_basis(k, 0).size() == 27u * (1u << k));
  CHECK(projector_basis(4, 1).size() == 432);
  const auto gram_rank = [](const ProjectorBasis& b) {
    const auto d = static_cast<Eigen::Index>(dim_of(b.k));
    CMatrix vec(d * d, static_cast<Eigen::Index>(b.size()));
    for (std::size_t n = 0; n < b.size(); ++n) {
      const CMatrix p = b.projector(n);
      vec.col(static_cast<Eigen::Index>(n)) = Eigen::Map<const CVector>(p.data(), d * d);
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(vec);
    qr.setThreshold(1e-10);
    return qr.rank();
  };
  CHECK(gram_rank(projector_basis(3, 0)) == 64);
  CHECK(gram_rank(projector_basis(3, 2)) == 64);
  CHECK(gram_rank(projector_basis(4, 0)) < 256);
  for (const ProjectorElement& e : projector_basis(4, 1).elements) {
    CHECK(std::abs(e.ket.norm() - 1.0) <= 1e-12);
    // Period-3 axes from the starting phase.
    CHECK(e.axes[3] == e.axes[0]);
    CHECK(e.axes[0] == e.label[1]);
  }
  // Each setting resolves the identity.
  const ProjectorBasis b = projector_basis(3, 0);
  for (std::size_t s = 0; s < b.size(); s += 8) {
    CMatrix sum = CMatrix::Zero(8, 8);
    for (std::size_t o = 0; o < 8; ++o) sum += b.projector(s + o);
    CHECK((sum - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(projector_basis(6, 0), ConfigError);
  CHECK_THROWS_AS(projector_basis(3, 3), ConfigError);
}

TEST_CASE("witness design on the complete three-site basis") {
  const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(3));
  const WitnessOperator w = design_witness(ghz, 0);
  CHECK(std::abs(w.bound_at_design - 0.5) <= 1e-4);
  CHECK(w.coefficients.cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
  const WitnessCheck check = verify_witness(w);
  CHECK(check.ok);
  CHECK(check.min_eigenvalue >= -1e-7);

  const WitnessOperator none = design_witness(DensityMatrix::maximally_mixed(3), 0);
  CHECK(none.bound_at_design <= 1e-7);

  const DensityMatrix noisy = white_noise(ghz_state(3), 0.85);
  CHECK(std::abs(design_witness(noisy, 1).bound_at_design - gmn_sdp(noisy).value) <= 1e-4);
}

TEST_CASE("on the complete basis only the coefficient box separates design and measure") {
  // Near-pure targets need |c| > 1 to realize the full measure; whenever the
  // box is inactive the design reaches it.
  std::mt19937_64 rng(5);
  int inactive = 0;
  int active = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const DensityMatrix rho = trial % 2 ? random_mixed(rng, 3, 2) : white_noise(w_state(3), 0.6 + 0.05 * trial);
    const WitnessOperator w = design_witness(rho, trial % 3);
    const double g = gmn_sdp(rho).value;
    if (w.coefficients.cwiseAbs().maxCoeff() < 1.0 - 1e-6) {
      ++inactive;
      CHECK(std::abs(w.bound_at_design - g) <= 1e-4);
    } else {
      ++active;
      CHECK(w.bound_at_design <= g + 1e-6);
    }
  }
  CHECK(inactive >= 4);
  const WitnessOperator pure_w = design_witness(DensityMatrix::from_pure(w_state(3)), 0);
  CHECK(pure_w.coefficients.cwiseAbs().maxCoeff() >= 1.0 - 1e-6);
  CHECK(pure_w.bound_at_design < gmn_pure(w_state(3)).value - 1e-4);

  // Widening the box closes the gap and the witness stays feasible.
  DesignOptions wide;
  wide.coefficient_bound = 50.0;
  const WitnessOperator wide_w = design_witness(DensityMatrix::from_pure(w_state(3)), 0, wide);
  CHECK(std::abs(wide_w.bound_at_design - gmn_pure(w_state(3)).value) <= 1e-4);
  CHECK(wide_w.coefficients.cwiseAbs().maxCoeff() > 1.0);
  CHECK(verify_witness(wide_w).min_eigenvalue >= -1e-7);
  CHECK_THROWS_AS(witness_design_problem(RVector::Constant(216, 1.0 / 8.0), projector_basis(3, 0), 0.0), ConfigError);
}

TEST_CASE("designed witnesses are sound on random states") {
  const WitnessOperator w = design_witness(white_noise(ghz_state(3), 0.9), 0);
  const ProjectorBasis basis = projector_basis(3, 0);
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix sigma = trial % 2 ? random_mixed(rng, 3, 1 + trial % 3)
                                          : DensityMatrix::from_pure(random_pure(rng, 3));
    const double s = witness_value(w, basis.probabilities(sigma));
    CHECK(gmn_sdp(sigma).value - s >= -1e-6);
  }
}

TEST_CASE("restricted four-site basis can only lose") {
  std::mt19937_64 rng(41);
  const CMatrix mix = 0.8 * DensityMatrix::from_pure(w_state(4)).matrix() + 0.2 * random_mixed(rng, 4, 2).matrix();
  const DensityMatrix target(mix, 4);
  const WitnessOperator w = design_witness(target, 0);
  CHECK(w.bound_at_design <= gmn_sdp(target).value + 1e-6);
  CHECK(w.bound_at_design > 0.0);
  CHECK(verify_witness(w).ok);
}

TEST_CASE("design rejects inconsistent probabilities") {
  const ProjectorBasis basis = projector_basis(3, 0);
  RVector p = basis.probabilities(DensityMatrix::from_pure(ghz_state(3)));
  p(0) += 0.01;
  CHECK_THROWS_AS(design_witness(p, basis), ConfigError);
  p(0) = -0.5;
  CHECK_THROWS_AS(design_witness(p, basis), ConfigError);
  CHECK_THROWS_AS(design_witness(RVector::Zero(5), basis), ConfigError);
}

TEST_CASE("sparsification keeps the bound within epsilon") {
  const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(3));
  const ProjectorBasis basis = projector_basis(3, 0);
  const RVector p = basis.probabilities(ghz);
  const WitnessOperator w = design_witness(p, basis);
  const WitnessOperator s = sparsify_witness(w, p);
  CHECK(s.nonzero_count() < w.nonzero_count());
  CHECK(s.bound_at_design >= 0.5 - 5e-3);
  CHECK(w.bound_at_design - s.bound_at_design <= 5e-3);
  CHECK(verify_witness(s).ok);
  CHECK(s.design_meta["sparsify"]["nonzero_after"].get<std::size_t>() == s.nonzero_count());

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 4; ++trial) {
    const RVector q = basis.probabilities(random_mixed(rng, 3, 1 + trial));
    const WitnessOperator d = design_witness(q, basis);
    const WitnessOperator sp = sparsify_witness(d, q);
    CHECK(d.bound_at_design - sp.bound_at_design <= 5e-3 + 1e-12);
    CHECK(sp.nonzero_count() <= d.nonzero_count());
    CHECK(verify_witness(sp).ok);
  }
}

TEST_CASE("sparsification fixed points") {
  const ProjectorBasis basis = projector_basis(3, 0);
  const RVector p = basis.probabilities(DensityMatrix::maximally_mixed(3));
  WitnessOperator zero;
  zero.k = 3;
  zero.coefficients = RVector::Zero(static_cast<Eigen::Index>(basis.size()));
  const WitnessOperator s = sparsify_witness(zero, p);
  CHECK(s.coefficients.cwiseAbs().maxCoeff() <= 1e-8);
  // A single-projector witness detects nothing; sparsification may only drop it.
  WitnessOperator single = zero;
  single.coefficients(5) = 1.0;
  single.bound_at_design = witness_value(single, p);
  const WitnessOperator t = sparsify_witness(single, p);
  CHECK(t.nonzero_count() <= 1);
  CHECK(t.bound_at_design >= single.bound_at_design - 5e-3);
  SparsifyOptions bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(sparsify_witness(zero, p, bad), ConfigError);
}

TEST_CASE("witness evaluation on counts") {
  const PureState ghz = ghz_state(3);
  const DensityMatrix rho = DensityMatrix::from_pure(ghz);
  WitnessOperator w = design_witness(rho, 0);
  w.group = {0, 1, 2};

  SUBCASE("exact frequencies reproduce the design bound") {
    // 2^20 shots make every GHZ probability an exact binary fraction.
    const std::vector<CountsTable> tables = exact_tables(rho, 1u << 20);
    const GmnResult r = evaluate_witness(w, tables);
    CHECK(r.method == GmnMethod::WitnessEvaluation);
    CHECK(std::abs(r.value - w.bound_at_design) <= 1e-12);
    CHECK(r.std_error.value() < 1e-3);
  }
  SUBCASE("sampled GHZ data") {
    const std::vector<CountsTable> tables = sample_scheme(ghz, 1000, 5);
    const GmnResult r = evaluate_witness(w, tables);
    REQUIRE(r.std_error.value() > 0.0);
    CHECK(std::abs(r.value - 0.5) <= 3.0 * r.std_error.value());
  }
  SUBCASE("sampled product data") {
    const std::vector<CountsTable> tables = sample_scheme(PureState::from_bitstring("101"), 1000, 6);
    const GmnResult r = evaluate_witness(w, tables);
    CHECK(r.value <= 3.0 * r.std_error.value());
  }
  SUBCASE("group inside a longer chain") {
    WitnessOperator shifted = design_witness(rho, 1);
    shifted.group = {1, 2, 3};
    const CVector chain = gmecert::testing::kron(gmecert::testing::kron(PureState::from_bitstring("0").amplitudes(), ghz.amplitudes()),
                                                PureState::from_bitstring("1").amplitudes());
    const std::vector<CountsTable> tables = sample_scheme(PureState(chain, 5), 1000, 8);
    const GmnResult r = evaluate_witness(shifted, tables);
    CHECK(std::abs(r.value - 0.5) <= 3.0 * r.std_error.value());
  }
  SUBCASE("missing setting") {
    std::vector<CountsTable> tables = sample_scheme(ghz, 100, 5);
    tables.erase(tables.begin() + 4);
    try {
      evaluate_witness(w, tables);
      FAIL("expected an analysis error");
    } catch (const AnalysisError& e) {
      CHECK(std::string(e.what()).find("{1,2,3}") != std::string::npos);
      CHECK(std::string(e.what()).find(scheme_settings(3)[4].name()) != std::string::npos);
    }
  }
}

TEST_CASE("witness JSON round trip") {
  WitnessOperator w = design_witness(white_noise(ghz_state(3), 0.9), 2);
  w.group = {2, 3, 4};
  const nlohmann::json j = to_json(w);
  CHECK(j["schema"] == "gmecert.witness/1");
  CHECK(j["group"] == nlohmann::json::array({3, 4, 5}));
  const WitnessOperator back = witness_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.k == 3);
  CHECK(back.phase == 2);
  CHECK(back.group == w.group);
  CHECK((back.coefficients - w.coefficients).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.bound_at_design == w.bound_at_design);
  CHECK(back.certificate.empty());
  // Without a certificate the checker finds one itself.
  CHECK(verify_witness(back).ok);
  CHECK_THROWS_AS(witness_from_json(nlohmann::json::parse(R"({"k": 3})")), SchemaError);
  nlohmann::json bad = j;
  bad["coefficients"][0]["alpha"] = "QQQ";
  CHECK_THROWS_AS(witness_from_json(bad), SchemaError);
}

TEST_CASE("verification catches an unsound witness") {
  WitnessOperator w = design_witness(DensityMatrix::from_pure(ghz_state(3)), 0);
  w.coefficients *= 1.5;
  w.certificate.clear();
  CHECK_FALSE(verify_witness(w).ok);
}

TEST_CASE("witness sweep on a short chain") {
  const CouplingModel model = CouplingModel::uniform(4, 1.1, 0.17);
  const InitialStateModel init = InitialStateModel::ideal("1010");
  std::vector<WitnessSweepStep> steps;
  for (double t : {0.0, 2.0}) {
    WitnessSweepStep st;
    st.t_ms = t;
    st.mixed_model = evolve_mixture(model, init, t);
    st.pure_model = st.mixed_model;
    st.tables = sample_scheme(*st.mixed_model, 200, 11, "t" + std::to_string(t));
    steps.push_back(std::move(st));
  }
  WitnessSweepOptions o;
  o.evaluate.resamples = 100;
  const WitnessSweepResult single = witness_sweep(steps, 3, o);
  o.threads = 2;
  const WitnessSweepResult threaded = witness_sweep(steps, 3, o);
  REQUIRE(single.rows.size() == 2u * 2u * 3u);
  CHECK(single.witnesses.size() == 4);
  for (std::size_t i = 0; i < single.rows.size(); ++i) {
    CHECK(single.rows[i].value == threaded.rows[i].value);
    CHECK(single.rows[i].std_error == threaded.rows[i].std_error);
  }
  for (const WitnessRow& r : single.rows) {
    if (r.t_ms == 0.0) CHECK(r.value <= 3.0 * r.std_error + 1e-9);
    if (r.source == WitnessSource::PureModel && r.t_ms > 0.0) {
      // Sound, and within the sparsification budget plus the loss from the
      // coefficient box of the measure itself.
      std::vector<int> group{r.group_start, r.group_start + 1, r.group_start + 2};
      const double g = gmn_sdp(steps[1].mixed_model->reduce(group)).value;
      CHECK(r.value <= g + 1e-6);
      CHECK(r.value >= g - 5e-3 - 1e-2);
    }
  }
  std::ostringstream csv;
  write_witness_csv(csv, single.rows);
  CHECK(csv.str().rfind("t_ms,k,group_start,S,std_error,source\n", 0) == 0);
  CHECK(csv.str().find(",mixed_model\n") != std::string::npos);
}

TEST_CASE("SDPA export of the design problem") {
  const ProjectorBasis basis = projector_basis(3, 0);
  const SdpProblem p = witness_design_problem(basis.probabilities(DensityMatrix::from_pure(ghz_state(3))), basis);
  const std::string text = export_sdpa(p);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (!line.empty() && line[0] == '"') std::getline(in, line);
  CHECK(std::stoi(line) == 216 + 3 * 64);
  std::getline(in, line);
  // Three LMIs per cut plus one diagonal block for the coefficient bounds.
  CHECK(std::stoi(line) == 3 * 3 + 1);
}
