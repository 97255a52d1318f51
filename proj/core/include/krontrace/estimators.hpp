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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "krontrace/kron_core.hpp"
#include "krontrace/rng.hpp"

namespace krontrace {

enum class QueryDistribution : std::uint8_t {
  RealRademacher,
  RealGaussian,
  ComplexRademacher,
  ComplexGaussian,
};

inline constexpr QueryDistribution kAllDistributions[] = {
    QueryDistribution::RealRademacher,
    QueryDistribution::RealGaussian,
    QueryDistribution::ComplexRademacher,
    QueryDistribution::ComplexGaussian,
};

std::string_view distribution_name(QueryDistribution dist);
QueryDistribution parse_distribution(std::string_view name);
ScalarField distribution_field(QueryDistribution dist);
bool is_gaussian(QueryDistribution dist);

/// Thrown by rank_one_exact_trace when the draw is (numerically) orthogonal
/// to the range of the matrix. Redrawing fixes it almost surely.
class DegenerateQuery : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws every factor entry i.i.d. from `dist`, factor 1 first. Complex
/// entries are (r + i m)/sqrt(2) with r drawn before m.
KronQueryVector sample_query(QueryDistribution dist, const Dims& dims, RngStream& rng);

/// conj(x)^T (A x) for x = expand(q). One oracle query.
Complex quadratic_form(const KronOperator& op, const KronQueryVector& q);

struct TraceEstimate {
  /// Real part of the sample mean.
  double value = 0.0;
  /// Imaginary part of the sample mean; zero for real queries.
  double imag_value = 0.0;
  /// Largest |Im| over the individual samples.
  double max_abs_imag = 0.0;
  std::size_t num_samples = 0;
  std::uint64_t queries_used = 0;
  std::optional<std::vector<Complex>> per_sample;

  /// |mean|, offered next to the real part for indefinite matrices.
  double magnitude() const;
};

struct HutchinsonOptions {
  bool keep_samples = false;
  /// Sample j draws from RngStream(seed, first_stream + j).
  std::uint64_t first_stream = 0;
  /// Worker threads; results are reduced in sample order so the estimate
  /// does not depend on this value.
  unsigned workers = 1;
};

/// H_ℓ(A) = (1/ℓ) Σ_j conj(x_j)^T A x_j with Kronecker queries x_j.
TraceEstimate kron_hutchinson(const KronOperator& op, QueryDistribution dist, std::size_t samples,
                              std::uint64_t seed, const HutchinsonOptions& options = {});

/// tr(A) = ‖Ax‖² / (x^T A x) for a rank-one A, from a single Gaussian query.
/// The matrix is promised to be rank one; this is not checked.
double rank_one_exact_trace(const KronOperator& op, RngStream& rng);

struct KronRecovery {
  std::vector<DenseMatrix> factors;
  double gamma = 0.0;
  std::uint64_t queries_used = 0;
  /// True when γ was treated as zero and zero factors returned.
  bool degenerate = false;

  /// Π tr(B_i).
  double trace() const;
  DenseMatrix expand() const;
};

/// Recovers B_1..B_k with ⊗B_i = A from k·d + 1 queries, for A promised to be
/// a Kronecker product of k real d x d factors.
///
/// C_i[m,n] = x_i^(m)T A x_i^(n), where x_i^(m) replaces factor i of the
/// Gaussian base query by e_m. Then ⊗C_i = γ^(k-1) A, so B_1 = γ^-(k-1) C_1
/// and B_i = C_i otherwise; this stays real for negative γ.
KronRecovery exact_kron_recovery(const KronOperator& op, RngStream& rng);

/// Σ_I e_I^T A e_I, exactly d^k queries.
double diagonal_trace(const KronOperator& op);

struct ComplexQuerySimulation {
  Vector response;
  std::uint64_t real_queries_used = 0;
};

/// A x for complex Kronecker x, using only real Kronecker queries: writes
/// x_i = r_i + i m_i and sums the 2^k real products with weight i^(#m).
ComplexQuerySimulation simulate_complex_query(const KronOperator& op, const KronQueryVector& q);

}  // namespace krontrace
