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

#include <string>
#include <string_view>
#include <vector>

#include "gmecert/types.hpp"

namespace gmecert {

// Single-qubit operator labels. Z follows the convention Z|0> = -|0>,
// Z|1> = +|1>, so a measured bit 1 always denotes the +1 eigenvalue.
enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

char to_char(Pauli p);
Pauli pauli_from_char(char c);
Eigen::Matrix2cd pauli_matrix(Pauli p);

// Eigenvector of the given axis with eigenvalue +1 (bit = 1) or -1 (bit = 0).
Eigen::Vector2cd axis_eigenvector(Pauli axis, int bit);

class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(std::vector<Pauli> ops, double coefficient = 1.0);

  // Parses "XIZ" style strings.
  static PauliString parse(std::string_view text, double coefficient = 1.0);
  // a on site i, b on site j, identity elsewhere.
  static PauliString two_site(int num_qubits, int i, Pauli a, int j, Pauli b);

  int size() const { return static_cast<int>(ops_.size()); }
  Pauli op(int i) const { return ops_.at(static_cast<std::size_t>(i)); }
  const std::vector<Pauli>& ops() const { return ops_; }
  double coefficient() const { return coefficient_; }
  bool is_identity() const;
  std::vector<int> support() const;
  std::string to_string() const;

 private:
  std::vector<Pauli> ops_;
  double coefficient_ = 1.0;
};

// Dense 2^N tensor-product realization; throws beyond kMaxDenseQubits.
CMatrix pauli_string_matrix(const PauliString& p);

}  // namespace gmecert
