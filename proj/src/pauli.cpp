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

#include "gmecert/pauli.hpp"

#include <cmath>

namespace gmecert {

char to_char(Pauli p) {
  switch (p) {
    case Pauli::I: return 'I';
    case Pauli::X: return 'X';
    case Pauli::Y: return 'Y';
    case Pauli::Z: return 'Z';
  }
  return '?';
}

Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': case 'i': return Pauli::I;
    case 'X': case 'x': return Pauli::X;
    case 'Y': case 'y': return Pauli::Y;
    case 'Z': case 'z': return Pauli::Z;
    default: break;
  }
  throw std::invalid_argument(std::string("not a Pauli label: '") + c + "'");
}

Eigen::Matrix2cd pauli_matrix(Pauli p) {
  const cplx i1(0.0, 1.0);
  Eigen::Matrix2cd m;
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, -i1, i1, 0; break;
    case Pauli::Z: m << -1, 0, 0, 1; break;
  }
  return m;
}

Eigen::Vector2cd axis_eigenvector(Pauli axis, int bit) {
  const double r = 1.0 / std::sqrt(2.0);
  const cplx i1(0.0, 1.0);
  Eigen::Vector2cd v;
  switch (axis) {
    case Pauli::Z:
      v = bit ? Eigen::Vector2cd(0, 1) : Eigen::Vector2cd(1, 0);
      break;
    case Pauli::X:
      v = bit ? Eigen::Vector2cd(r, r) : Eigen::Vector2cd(r, -r);
      break;
    case Pauli::Y:
      v = bit ? Eigen::Vector2cd(r, r * i1) : Eigen::Vector2cd(r, -r * i1);
      break;
    case Pauli::I:
      throw std::invalid_argument("identity has no measurement eigenbasis");
  }
  return v;
}

PauliString::PauliString(std::vector<Pauli> ops, double coefficient)
    : ops_(std::move(ops)), coefficient_(coefficient) {}

PauliString PauliString::parse(std::string_view text, double coefficient) {
  std::vector<Pauli> ops;
  ops.reserve(text.size());
  for (char c : text) ops.push_back(pauli_from_char(c));
  return PauliString(std::move(ops), coefficient);
}

PauliString PauliString::two_site(int num_qubits, int i, Pauli a, int j, Pauli b) {
  if (i == j || i < 0 || j < 0 || i >= num_qubits || j >= num_qubits)
    throw std::invalid_argument("two_site: invalid sites");
  std::vector<Pauli> ops(static_cast<std::size_t>(num_qubits), Pauli::I);
  ops[static_cast<std::size_t>(i)] = a;
  ops[static_cast<std::size_t>(j)] = b;
  return PauliString(std::move(ops));
}

bool PauliString::is_identity() const {
  for (Pauli p : ops_)
    if (p != Pauli::I) return false;
  return true;
}

std::vector<int> PauliString::support() const {
  std::vector<int> s;
  for (int i = 0; i < size(); ++i)
    if (ops_[static_cast<std::size_t>(i)] != Pauli::I) s.push_back(i);
  return s;
}

std::string PauliString::to_string() const {
  std::string s;
  for (Pauli p : ops_) s.push_back(to_char(p));
  return s;
}

CMatrix pauli_string_matrix(const PauliString& p) {
  if (p.size() > kMaxDenseQubits)
    throw std::length_error("pauli_string_matrix: " + std::to_string(p.size()) +
                            " qubits exceeds the dense limit");
  CMatrix m = CMatrix::Identity(1, 1) * p.coefficient();
  for (Pauli op : p.ops()) {
    const Eigen::Matrix2cd s = pauli_matrix(op);
    CMatrix next(m.rows() * 2, m.cols() * 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        next.block<2, 2>(2 * r, 2 * c) = m(r, c) * s;
    m = std::move(next);
  }
  return m;
}

}  // namespace gmecert
