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

#include <iosfwd>
#include <span>
#include <vector>

#include "gmecert/measurement.hpp"
#include "gmecert/state.hpp"

namespace gmecert {

inline constexpr int kMaxTomographyQubits = 3;

// Outcome weights of one local product basis on the reconstructed sites.
// `weights` is indexed by the outcome bitstring (qubit 0 most significant)
// and may hold counts or exact probabilities.
struct LocalBasisData {
  std::vector<Pauli> axes;
  RVector weights;
};

struct MleOptions {
  double dilution = 0.5;
  double tolerance = 1e-10;  // change in normalized log-likelihood
  int max_iterations = 5000;
  bool record_trace = false;
};

struct MleResult {
  DensityMatrix rho;
  int iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;  // sum_j f_j log p_j with sum_j f_j = 1
  std::vector<double> trace;    // per accepted step, when requested
};

// Pools the tables' marginals on `sites` by local basis. Throws unless all
// 3^k local bases are present.
std::vector<LocalBasisData> collect_local_bases(std::span<const CountsTable> tables, std::span<const int> sites);

// Diluted R rho R fixed-point iteration starting from the maximally mixed
// state; a step that lowers the likelihood is retried with half dilution.
MleResult mle_reconstruct(std::span<const LocalBasisData> data, MleOptions options = {});
MleResult mle_reconstruct(std::span<const CountsTable> tables, std::span<const int> sites, MleOptions options = {});

struct PairNegativityRow {
  double t_ms = 0.0;
  int site_i = 0;  // 0-based
  int site_j = 0;
  double negativity = 0.0;
  double std_error = 0.0;
  bool converged = true;
};

struct TimeStepCounts {
  double t_ms = 0.0;
  std::vector<CountsTable> tables;
};

struct NegativitySweepOptions {
  int resamples = 200;
  std::uint64_t seed = 1;
  MleOptions mle;
};

// MLE plus negativity for every neighbouring pair at every time step, with
// bootstrap standard errors.
std::vector<PairNegativityRow> pair_negativity_sweep(std::span<const TimeStepCounts> steps,
                                                     NegativitySweepOptions options = {});

// Columns t_ms, site_i, site_j, negativity, std_error (1-based sites).
void write_pair_negativity_csv(std::ostream& out, std::span<const PairNegativityRow> rows);

}  // namespace gmecert
