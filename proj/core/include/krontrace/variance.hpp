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

// Exact single-sample variance of the Kronecker-Hutchinson estimator, bounds
// derived from it, closed-form sample-count quantities, and a brute-force
// fourth-moment oracle used to check all of the above.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "krontrace/estimators.hpp"
#include "krontrace/kron_core.hpp"

namespace krontrace {

/// Default cap on D^4 index quadruples visited by moment_oracle.
inline constexpr std::uint64_t kDefaultOracleTermBudget = 10'000'000;

/// Σ_{S ⊊ [k]} w^(k-|S|) ‖tr_S(Ā)‖_F², w = 2 for Real and 1 for Complex.
double exact_variance(const DenseMatrix& a, const Dims& dims, ScalarField field);

/// exact_variance + tr(A)², i.e. the same sum including S = [k].
double second_moment_formula(const DenseMatrix& a, const Dims& dims, ScalarField field);

/// The subset sum with tr_S(A) in place of tr_S(Ā). Never below exact_variance.
double variance_upper_bound_no_abar(const DenseMatrix& a, const Dims& dims, ScalarField field);

enum class PsdBoundForm : std::uint8_t {
  /// 3^k tr² (Real) or 2^k tr² (Complex).
  Squared,
  /// (3^k tr)² or (2^k tr)²; looser, kept for comparison.
  OuterSquared,
};

double psd_worst_case_bound(double trace_value, std::size_t k, ScalarField field,
                            PsdBoundForm form = PsdBoundForm::Squared);

struct VarianceReport {
  double second_moment = 0.0;
  double variance = 0.0;
  double upper_bound_no_abar = 0.0;
  /// Present only when A is PSD.
  std::optional<double> psd_worst_case;
  ScalarField field = ScalarField::Real;
  QueryDistribution dist = QueryDistribution::RealGaussian;
};

/// Formula-side report for `dist`. For Gaussian dists the variance is exact,
/// for Rademacher dists it is an upper bound.
VarianceReport variance_report(const DenseMatrix& a, const Dims& dims, QueryDistribution dist);

/// Per-subsystem moments of one factor entry z of a query.
///
/// m4(a,b,c,e) = E[conj(z_a) z_b conj(z_c) z_e] and
/// m4_mixed(a,b,c,e) = E[conj(z_a) z_b z_c conj(z_e)]. The two coincide for
/// real distributions. Every entry is a small integer.
class MomentTensor {
 public:
  MomentTensor(QueryDistribution dist, std::size_t d);

  QueryDistribution dist() const { return dist_; }
  std::size_t d() const { return d_; }
  double m2(std::size_t a, std::size_t b) const { return a == b ? 1.0 : 0.0; }
  double m4(std::size_t a, std::size_t b, std::size_t c, std::size_t e) const {
    return m4_[((a * d_ + b) * d_ + c) * d_ + e];
  }
  double m4_mixed(std::size_t a, std::size_t b, std::size_t c, std::size_t e) const {
    return m4_mixed_[((a * d_ + b) * d_ + c) * d_ + e];
  }

 private:
  QueryDistribution dist_;
  std::size_t d_;
  std::vector<double> m4_;
  std::vector<double> m4_mixed_;
};

struct MomentTensorCheck {
  /// Largest |empirical - exact| / standard error over all m2 and m4 entries.
  double max_z_score = 0.0;
  /// Largest |empirical - exact|.
  double max_abs_error = 0.0;
  std::size_t samples = 0;
};

/// Compares every tensor entry with a Monte Carlo average over `samples`
/// single-factor draws from sample_query.
MomentTensorCheck validate_moment_tensor(const MomentTensor& tensor, std::size_t samples, std::uint64_t seed);

struct MomentOracleResult {
  /// E[X] for X = conj(x)^T A x.
  Complex mean;
  /// E[X²].
  Complex second_moment_sq;
  /// E[|X|²].
  double second_moment_abs = 0.0;

  /// Var[Re X] = (Re E[X²] + E|X|²)/2 - (Re E[X])²; for real queries this is
  /// the ordinary variance E[X²] - E[X]².
  double variance() const;
  /// E|X|² - |E X|².
  double variance_abs() const;
};

/// Brute-force moments over all D^4 index quadruples. Throws BudgetExceeded
/// when D^4 is above `term_budget`.
MomentOracleResult moment_oracle(const DenseMatrix& a, const Dims& dims, QueryDistribution dist,
                                 std::uint64_t term_budget = kDefaultOracleTermBudget);

/// ((3 - 2/d)^k - 1)/ε² (Real) or ((2 - 1/d)^k - 1)/ε² (Complex): samples
/// needed for relative standard deviation ε on the all-ones matrix.
double all_ones_lower_bound_samples(std::size_t d, std::size_t k, double eps, ScalarField field);

/// E‖tr_S(g g^T)‖_F² = d^k (d^(k-s) + d^s + 1) for standard normal g and |S| = s.
double rankone_expected_partial_trace_norm(std::size_t d, std::size_t k, std::size_t s);

struct RankOneBudget {
  /// (2 + 1/d)^k / ε² (Real) or (1 + 1/d)^k / ε² (Complex).
  double leading_order = 0.0;
  /// 1152 times the leading order.
  double with_constant = 0.0;
};

RankOneBudget rankone_variance_budget(std::size_t d, std::size_t k, double eps, ScalarField field);

/// (d⁴ + 2d²)^k - (d⁴ + 2d² - 2(d - q)²)^k. Throws for q > d.
double wishart_mse(std::size_t d, std::size_t k, std::size_t q);

/// 4√k / (√2 ε); requires 0 < ε ≤ 1/2 and k ≥ 1.
double adaptive_query_lower_bound(std::size_t k, double eps);

/// ceil(variance / (ε² trace²)), at least 1. Throws for a zero trace.
std::uint64_t required_samples(double variance, double trace_value, double eps);

}  // namespace krontrace
