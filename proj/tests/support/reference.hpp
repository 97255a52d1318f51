// Copyright 2026 The krontrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Slow, test-only reference computations. Nothing here calls into the
// library's subsystem or variance code, so agreement is a real check.

#pragma once

#include <cstdint>
#include <vector>

#include "krontrace/estimators.hpp"
#include "krontrace/kron_core.hpp"

namespace krontrace::ref {

/// Digits of `index`, most significant first, by repeated division.
std::vector<std::size_t> digits(std::size_t index, std::size_t d, std::size_t k);
std::size_t undigits(const std::vector<std::size_t>& digits, std::size_t d);

/// Plain row-major real matrix for the reference paths.
struct Mat {
  std::size_t n = 0;
  std::vector<double> a;

  explicit Mat(std::size_t side = 0) : n(side), a(side * side, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
};

Mat from_dense(const DenseMatrix& m);
DenseMatrix to_dense(const Mat& m);
Mat kron(const Mat& x, const Mat& y);
Mat transpose(const Mat& m);
double trace(const Mat& m);
double frob_sq(const Mat& m);
double dot(const Mat& x, const Mat& y);

/// `traced[i]` selects subsystem i + 1.
Mat partial_trace(const Mat& m, std::size_t d, std::size_t k, const std::vector<bool>& traced);
Mat partial_transpose(const Mat& m, std::size_t d, std::size_t k, const std::vector<bool>& flipped);
Mat transpose_average(const Mat& m, std::size_t d, std::size_t k);

/// Σ over strict subsets of w^(k-|S|) ‖tr_S(m)‖², built from the reference pieces.
double subset_sum(const Mat& m, std::size_t d, std::size_t k, double w);

/// A = Σ_t ⊗_i terms[t][i]. Moments of X = conj(x)^T A x factor per
/// subsystem, which gives an oracle with no D^4 sum and no partial traces.
struct KronSum {
  std::vector<std::vector<Mat>> terms;

  Mat materialize() const;
};

struct Moments {
  double mean = 0.0;
  /// E[X²] (real part) and E|X|².
  double second_sq = 0.0;
  double second_abs = 0.0;

  /// Var[Re X].
  double variance() const { return 0.5 * (second_sq + second_abs) - mean * mean; }
};

Moments kron_sum_moments(const KronSum& a, QueryDistribution dist);

KronSum random_kron_sum(std::size_t d, std::size_t k, std::size_t terms, std::uint64_t seed);
DenseMatrix random_dense(std::size_t side, std::uint64_t seed);

}  // namespace krontrace::ref
