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

#include "krontrace/variance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "krontrace/subsystem_ops.hpp"

namespace krontrace {

namespace {

double subset_weight(ScalarField field) {
  return field == ScalarField::Real ? 2.0 : 1.0;
}

void require_square_shape(const DenseMatrix& a, const Dims& dims, const char* what) {
  if (a.side() != dims.total()) {
    throw std::invalid_argument(std::string(what) + ": matrix side " + std::to_string(a.side()) +
                                " does not match d^k = " + std::to_string(dims.total()));
  }
  if (dims.k() > kMaxSubsetK) {
    throw BudgetExceeded(std::string(what) + ": k = " + std::to_string(dims.k()) + " exceeds the subset budget " +
                         std::to_string(kMaxSubsetK));
  }
}

// Σ_{S ⊊ [k]} w^(k-|S|) ‖tr_S(M)‖_F².
double strict_subset_sum(const DenseMatrix& m, const Dims& dims, ScalarField field) {
  const std::size_t k = dims.k();
  const double w = subset_weight(field);
  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    SubsystemSet traced = SubsystemSet::from_mask(k, mask);
    double norm = frob_norm_sq(partial_trace(m, dims, traced));
    total += std::pow(w, static_cast<double>(k - traced.size())) * norm;
  }
  return total;
}

}  // namespace

double exact_variance(const DenseMatrix& a, const Dims& dims, ScalarField field) {
  require_square_shape(a, dims, "exact_variance");
  if (a.field() != ScalarField::Real) {
    throw std::invalid_argument("exact_variance: matrix must be real");
  }
  return strict_subset_sum(average_partial_transposes(a, dims), dims, field);
}

double second_moment_formula(const DenseMatrix& a, const Dims& dims, ScalarField field) {
  double tr = a.trace().real();
  return exact_variance(a, dims, field) + tr * tr;
}

double variance_upper_bound_no_abar(const DenseMatrix& a, const Dims& dims, ScalarField field) {
  require_square_shape(a, dims, "variance_upper_bound_no_abar");
  if (a.field() != ScalarField::Real) {
    throw std::invalid_argument("variance_upper_bound_no_abar: matrix must be real");
  }
  return strict_subset_sum(a, dims, field);
}

double psd_worst_case_bound(double trace_value, std::size_t k, ScalarField field, PsdBoundForm form) {
  if (!(trace_value >= 0.0)) {
    throw std::invalid_argument("psd_worst_case_bound: trace of a PSD matrix cannot be negative");
  }
  const double growth = std::pow(field == ScalarField::Real ? 3.0 : 2.0, static_cast<double>(k));
  if (form == PsdBoundForm::OuterSquared) {
    return (growth * trace_value) * (growth * trace_value);
  }
  return growth * trace_value * trace_value;
}

VarianceReport variance_report(const DenseMatrix& a, const Dims& dims, QueryDistribution dist) {
  VarianceReport report;
  report.dist = dist;
  report.field = distribution_field(dist);
  report.variance = exact_variance(a, dims, report.field);
  const double tr = a.trace().real();
  report.second_moment = report.variance + tr * tr;
  report.upper_bound_no_abar = variance_upper_bound_no_abar(a, dims, report.field);
  if (is_psd(a)) {
    report.psd_worst_case = psd_worst_case_bound(std::max(0.0, tr), dims.k(), report.field);
  }
  return report;
}

MomentTensor::MomentTensor(QueryDistribution dist, std::size_t d) : dist_(dist), d_(d) {
  if (d == 0) {
    throw std::invalid_argument("MomentTensor: d must be positive");
  }
  const std::size_t n = d * d * d * d;
  m4_.resize(n);
  m4_mixed_.resize(n);
  const bool complex = distribution_field(dist) == ScalarField::Complex;
  const bool rademacher = !is_gaussian(dist);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t e = 0; e < d; ++e) {
          const double ab_ce = (a == b && c == e) ? 1.0 : 0.0;
          const double ac_be = (a == c && b == e) ? 1.0 : 0.0;
          const double ae_bc = (a == e && b == c) ? 1.0 : 0.0;
          const bool all_equal = a == b && b == c && c == e;
          double plain;
          double mixed;
          if (!complex) {
            // Isserlis; Rademacher has E[z⁴] = 1 instead of 3.
            plain = ab_ce + ac_be + ae_bc - (rademacher && all_equal ? 2.0 : 0.0);
            mixed = plain;
          } else {
            // Only conj/plain pairings survive; Rademacher has E|z|⁴ = 1 instead of 2.
            const double fix = rademacher && all_equal ? 1.0 : 0.0;
            plain = ab_ce + ae_bc - fix;
            mixed = ab_ce + ac_be - fix;
          }
          const std::size_t idx = ((a * d + b) * d + c) * d + e;
          m4_[idx] = plain;
          m4_mixed_[idx] = mixed;
        }
      }
    }
  }
}

MomentTensorCheck validate_moment_tensor(const MomentTensor& tensor, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) {
    throw std::invalid_argument("validate_moment_tensor: need at least two samples");
  }
  const std::size_t d = tensor.d();
  const Dims dims(d, 1);
  // Per entry: sum and sum of squares of the real and imaginary parts.
  struct Acc {
    double re = 0, re2 = 0, im = 0, im2 = 0;
    void add(Complex v) {
      re += v.real();
      re2 += v.real() * v.real();
      im += v.imag();
      im2 += v.imag() * v.imag();
    }
  };
  std::vector<Acc> acc2(d * d);
  std::vector<Acc> acc4(d * d * d * d);
  std::vector<Acc> acc4m(d * d * d * d);
  RngStream rng(seed, 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector z = sample_query(tensor.dist(), dims, rng).factor(0);
    for (std::size_t a = 0; a < d; ++a) {
      const Complex za = std::conj(z[a]);
      for (std::size_t b = 0; b < d; ++b) {
        const Complex ab = za * z[b];
        acc2[a * d + b].add(ab);
        for (std::size_t c = 0; c < d; ++c) {
          const Complex abc = ab * std::conj(z[c]);
          const Complex abc_mixed = ab * z[c];
          for (std::size_t e = 0; e < d; ++e) {
            const std::size_t idx = ((a * d + b) * d + c) * d + e;
            acc4[idx].add(abc * z[e]);
            acc4m[idx].add(abc_mixed * std::conj(z[e]));
          }
        }
      }
    }
  }

  MomentTensorCheck check;
  check.samples = samples;
  const double n = static_cast<double>(samples);
  auto score = [&](const Acc& acc, double exact) {
    for (int part = 0; part < 2; ++part) {
      const double sum = part == 0 ? acc.re : acc.im;
      const double sum2 = part == 0 ? acc.re2 : acc.im2;
      const double target = part == 0 ? exact : 0.0;
      const double mean = sum / n;
      const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
      const double err = std::abs(mean - target);
      check.max_abs_error = std::max(check.max_abs_error, err);
      const double se = std::sqrt(var / n);
      double z;
      if (se > 0.0) {
        z = err / se;
      } else {
        z = err <= 1e-12 * std::max(1.0, std::abs(target)) ? 0.0 : std::numeric_limits<double>::infinity();
      }
      check.max_z_score = std::max(check.max_z_score, z);
    }
  };
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      score(acc2[a * d + b], tensor.m2(a, b));
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t e = 0; e < d; ++e) {
          const std::size_t idx = ((a * d + b) * d + c) * d + e;
          score(acc4[idx], tensor.m4(a, b, c, e));
          score(acc4m[idx], tensor.m4_mixed(a, b, c, e));
        }
      }
    }
  }
  return check;
}

double MomentOracleResult::variance() const {
  return 0.5 * (second_moment_sq.real() + second_moment_abs) - mean.real() * mean.real();
}

double MomentOracleResult::variance_abs() const {
  return second_moment_abs - std::norm(mean);
}

MomentOracleResult moment_oracle(const DenseMatrix& a, const Dims& dims, QueryDistribution dist,
                                 std::uint64_t term_budget) {
  if (a.side() != dims.total()) {
    throw std::invalid_argument("moment_oracle: matrix side does not match d^k");
  }
  const std::size_t D = dims.total();
  const std::size_t k = dims.k();
  const std::size_t d = dims.d();
  const double d_total = static_cast<double>(D);
  if (d_total * d_total * d_total * d_total > static_cast<double>(term_budget)) {
    throw BudgetExceeded("moment_oracle: D^4 = " + std::to_string(d_total * d_total * d_total * d_total) +
                         " index quadruples exceeds the budget of " + std::to_string(term_budget));
  }
  const MomentTensor tensor(dist, d);

  std::vector<std::size_t> digits(D * k);
  for (std::size_t i = 0; i < D; ++i) {
    auto dg = dims.digits(i);
    std::copy(dg.begin(), dg.end(), digits.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  auto digit = [&](std::size_t index, std::size_t pos) { return digits[index * k + pos]; };

  MomentOracleResult result;
  Complex mean = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      double w = 1.0;
      for (std::size_t p = 0; p < k && w != 0.0; ++p) {
        w *= tensor.m2(digit(i, p), digit(j, p));
      }
      mean += w * a(i, j);
    }
  }
  result.mean = mean;

  Complex sq = 0.0;
  Complex abs_sq = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      const Complex aij = a(i, j);
      if (aij == 0.0) {
        continue;
      }
      for (std::size_t m = 0; m < D; ++m) {
        for (std::size_t n = 0; n < D; ++n) {
          const Complex amn = a(m, n);
          if (amn == 0.0) {
            continue;
          }
          double w_plain = 1.0;
          double w_mixed = 1.0;
          for (std::size_t p = 0; p < k && (w_plain != 0.0 || w_mixed != 0.0); ++p) {
            const std::size_t da = digit(i, p);
            const std::size_t db = digit(j, p);
            const std::size_t dc = digit(m, p);
            const std::size_t de = digit(n, p);
            w_plain *= tensor.m4(da, db, dc, de);
            w_mixed *= tensor.m4_mixed(da, db, dc, de);
          }
          // X² pairs conj(x_i) x_j conj(x_m) x_n; X conj(X) pairs conj(x_i) x_j x_m conj(x_n).
          sq += w_plain * aij * amn;
          abs_sq += w_mixed * aij * std::conj(amn);
        }
      }
    }
  }
  result.second_moment_sq = sq;
  result.second_moment_abs = abs_sq.real();
  return result;
}

double all_ones_lower_bound_samples(std::size_t d, std::size_t k, double eps, ScalarField field) {
  if (d == 0 || !(eps > 0.0)) {
    throw std::invalid_argument("all_ones_lower_bound_samples: need d >= 1 and eps > 0");
  }
  const double inv_d = 1.0 / static_cast<double>(d);
  const double base = field == ScalarField::Real ? 3.0 - 2.0 * inv_d : 2.0 - inv_d;
  return (std::pow(base, static_cast<double>(k)) - 1.0) / (eps * eps);
}

double rankone_expected_partial_trace_norm(std::size_t d, std::size_t k, std::size_t s) {
  if (s > k) {
    throw std::invalid_argument("rankone_expected_partial_trace_norm: s must not exceed k");
  }
  const double dd = static_cast<double>(d);
  return std::pow(dd, static_cast<double>(k)) *
         (std::pow(dd, static_cast<double>(k - s)) + std::pow(dd, static_cast<double>(s)) + 1.0);
}

RankOneBudget rankone_variance_budget(std::size_t d, std::size_t k, double eps, ScalarField field) {
  if (d == 0 || !(eps > 0.0)) {
    throw std::invalid_argument("rankone_variance_budget: need d >= 1 and eps > 0");
  }
  const double inv_d = 1.0 / static_cast<double>(d);
  const double base = field == ScalarField::Real ? 2.0 + inv_d : 1.0 + inv_d;
  RankOneBudget budget;
  budget.leading_order = std::pow(base, static_cast<double>(k)) / (eps * eps);
  budget.with_constant = 1152.0 * budget.leading_order;
  return budget;
}

double wishart_mse(std::size_t d, std::size_t k, std::size_t q) {
  if (q > d) {
    throw std::invalid_argument("wishart_mse: q must not exceed d");
  }
  const double dd = static_cast<double>(d);
  const double gap = static_cast<double>(d - q);
  const double full = dd * dd * dd * dd + 2.0 * dd * dd;
  const double kk = static_cast<double>(k);
  return std::pow(full, kk) - std::pow(full - 2.0 * gap * gap, kk);
}

double adaptive_query_lower_bound(std::size_t k, double eps) {
  if (k == 0) {
    throw std::invalid_argument("adaptive_query_lower_bound: k must be at least 1");
  }
  if (!(eps > 0.0 && eps <= 0.5)) {
    throw std::invalid_argument("adaptive_query_lower_bound: eps must lie in (0, 1/2]");
  }
  return 4.0 * std::sqrt(static_cast<double>(k)) / (std::sqrt(2.0) * eps);
}

std::uint64_t required_samples(double variance, double trace_value, double eps) {
  if (trace_value == 0.0) {
    throw std::invalid_argument("required_samples: trace is zero, relative accuracy is undefined");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("required_samples: eps must be positive");
  }
  if (variance < 0.0) {
    throw std::invalid_argument("required_samples: variance cannot be negative");
  }
  double ratio = variance / (eps * eps * trace_value * trace_value);
  // 128/(0.1² · 16) is 800.0000000000001 in floating point; don't charge a sample for that.
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    ratio = nearest;
  }
  const double samples = std::ceil(ratio);
  if (samples >= 1.8e19) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(samples));
}

}  // namespace krontrace
