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

// Random state generators shared by the unit and acceptance suites.

#include <bit>
#include <random>
#include <vector>

#include "gmecert/state.hpp"

namespace gmecert::testing {

inline CVector random_vector(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> g;
  CVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = cplx(g(rng), g(rng));
  return v / v.norm();
}

inline PureState random_pure(std::mt19937_64& rng, int n) {
  return PureState(random_vector(rng, static_cast<Eigen::Index>(dim_of(n))), n);
}

// Ginibre ensemble of the given rank (full rank when rank <= 0).
inline DensityMatrix random_mixed(std::mt19937_64& rng, int n, int rank = 0) {
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  const Eigen::Index r = rank <= 0 ? d : rank;
  std::normal_distribution<double> g;
  CMatrix a(d, r);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < r; ++j) a(i, j) = cplx(g(rng), g(rng));
  CMatrix m = a * a.adjoint();
  m /= m.trace().real();
  return DensityMatrix(m, n);
}

inline CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// Embeds the product |phi>_A |chi>_B into n qubits, with A given by `mask`
// (bit q set <=> qubit q in A).
inline CVector embed_product(const CVector& phi, const CVector& chi, std::uint32_t mask, int n) {
  std::vector<int> a, b;
  for (int q = 0; q < n; ++q) ((mask >> q) & 1u ? a : b).push_back(q);
  CVector out = CVector::Zero(static_cast<Eigen::Index>(dim_of(n)));
  for (std::uint64_t idx = 0; idx < dim_of(n); ++idx) {
    std::uint64_t ia = 0, ib = 0;
    for (int q : a) ia = (ia << 1) | static_cast<std::uint64_t>(bit_of(idx, q, n));
    for (int q : b) ib = (ib << 1) | static_cast<std::uint64_t>(bit_of(idx, q, n));
    out(static_cast<Eigen::Index>(idx)) =
        phi(static_cast<Eigen::Index>(ia)) * chi(static_cast<Eigen::Index>(ib));
  }
  return out;
}

// Convex mixture of pure states, each a product across a randomly chosen
// cut (the cut may differ between terms).
inline DensityMatrix random_biseparable(std::mt19937_64& rng, int n, int terms = 4) {
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  std::uniform_int_distribution<std::uint32_t> pick_mask(1u, (1u << n) - 2u);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CMatrix m = CMatrix::Zero(d, d);
  double total = 0.0;
  for (int t = 0; t < terms; ++t) {
    const std::uint32_t mask = pick_mask(rng);
    const int na = std::popcount(mask);
    const CVector phi = random_vector(rng, static_cast<Eigen::Index>(dim_of(na)));
    const CVector chi = random_vector(rng, static_cast<Eigen::Index>(dim_of(n - na)));
    const CVector v = embed_product(phi, chi, mask, n);
    const double w = u(rng);
    m += w * v * v.adjoint();
    total += w;
  }
  return DensityMatrix(m / total, n);
}

}  // namespace gmecert::testing
