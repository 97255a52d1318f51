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

#include "krontrace/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "krontrace/estimators.hpp"
#include "krontrace/kron_core.hpp"
#include "krontrace/rng.hpp"
#include "krontrace/subsystem_ops.hpp"
#include "krontrace/variance.hpp"

namespace krontrace {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::pair<std::size_t, std::size_t> kSmallDims[] = {{2, 1}, {2, 2}, {2, 3}, {3, 1}, {3, 2}, {3, 3}};
constexpr std::pair<std::size_t, std::size_t> kOracleDims[] = {{2, 1}, {2, 2}, {2, 3}, {3, 2}};

// Rectangular matrices for the explicit sandwich constructions. DenseMatrix
// is square only.
struct Rect {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Complex> v;

  Rect(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c) {}

  Complex& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  Complex at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

  static Rect from(const DenseMatrix& m) {
    Rect out(m.side(), m.side());
    std::copy(m.entries().begin(), m.entries().end(), out.v.begin());
    return out;
  }
  static Rect identity(std::size_t n) {
    Rect out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      out.at(i, i) = 1.0;
    }
    return out;
  }
  static Rect unit_column(std::size_t n, std::size_t j) {
    Rect out(n, 1);
    out.at(j, 0) = 1.0;
    return out;
  }
  static Rect column(const Vector& x) {
    Rect out(x.size(), 1);
    std::copy(x.begin(), x.end(), out.v.begin());
    return out;
  }
};

Rect kron(const Rect& a, const Rect& b) {
  Rect out(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      for (std::size_t p = 0; p < b.rows; ++p) {
        for (std::size_t q = 0; q < b.cols; ++q) {
          out.at(i * b.rows + p, j * b.cols + q) = a.at(i, j) * b.at(p, q);
        }
      }
    }
  }
  return out;
}

Rect mul(const Rect& a, const Rect& b) {
  if (a.cols != b.rows) {
    throw std::logic_error("verify: shape mismatch");
  }
  Rect out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t t = 0; t < a.cols; ++t) {
      const Complex x = a.at(i, t);
      for (std::size_t j = 0; j < b.cols; ++j) {
        out.at(i, j) += x * b.at(t, j);
      }
    }
  }
  return out;
}

Rect transposed(const Rect& a) {
  Rect out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      out.at(j, i) = a.at(i, j);
    }
  }
  return out;
}

// P^T A P.
Rect sandwich(const Rect& p, const Rect& a, const Rect& q) {
  return mul(mul(transposed(p), a), q);
}

double frob_sq(const Rect& a) {
  double s = 0.0;
  for (Complex z : a.v) {
    s += std::norm(z);
  }
  return s;
}

double max_abs(std::span<const Complex> v) {
  double m = 0.0;
  for (Complex z : v) {
    m = std::max(m, std::abs(z));
  }
  return m;
}

Rect random_rect(std::size_t rows, std::size_t cols, RngStream& rng) {
  Rect out(rows, cols);
  for (Complex& z : out.v) {
    z = rng.normal();
  }
  return out;
}

DenseMatrix random_real(std::size_t side, std::uint64_t seed, std::uint64_t stream) {
  RngStream rng(seed, stream);
  std::vector<Complex> e(side * side);
  for (Complex& z : e) {
    z = rng.normal();
  }
  return DenseMatrix(side, ScalarField::Real, std::move(e));
}

DenseMatrix random_psd(std::size_t side, std::uint64_t seed, std::uint64_t stream) {
  DenseMatrix m = random_real(side, seed, stream);
  return m.transpose() * m;
}

// A sum of two Kronecker products of symmetric factors, hence equal to its
// own partial-transpose average.
DenseMatrix symmetric_kron_sum(const Dims& dims, std::uint64_t seed, std::uint64_t stream) {
  DenseMatrix total(dims.total());
  for (std::uint64_t t = 0; t < 2; ++t) {
    std::vector<DenseMatrix> factors;
    for (std::size_t i = 0; i < dims.k(); ++i) {
      DenseMatrix g = random_real(dims.d(), seed, stream * 1000 + t * 100 + i);
      factors.push_back((g + g.transpose()).scaled(0.5));
    }
    total = total + kron_all(factors);
  }
  return total;
}

// tr_S(A) = Σ_e P_e^T A P_e with P_e = ⊗ (I for survivors, e_j for traced).
DenseMatrix sandwich_partial_trace(const DenseMatrix& a, const Dims& dims, const SubsystemSet& traced) {
  const std::size_t d = dims.d();
  const std::vector<std::size_t> members = traced.members();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < members.size(); ++i) {
    combos *= d;
  }
  const Rect full = Rect::from(a);
  std::size_t survivors = 1;
  for (std::size_t i = 0; i < dims.k() - members.size(); ++i) {
    survivors *= d;
  }
  Rect acc(survivors, survivors);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    std::vector<std::size_t> digit(dims.k(), 0);
    for (std::size_t m = members.size(); m-- > 0;) {
      digit[members[m] - 1] = rest % d;
      rest /= d;
    }
    Rect p(1, 1);
    p.at(0, 0) = 1.0;
    for (std::size_t pos = 0; pos < dims.k(); ++pos) {
      p = kron(p, traced.contains(pos + 1) ? Rect::unit_column(d, digit[pos]) : Rect::identity(d));
    }
    Rect term = sandwich(p, full, p);
    for (std::size_t i = 0; i < acc.v.size(); ++i) {
      acc.v[i] += term.v[i];
    }
  }
  return DenseMatrix(survivors, ScalarField::Real, std::move(acc.v));
}

double rel(double got, double want, double scale) {
  return std::abs(got - want) / std::max(1.0, scale);
}

class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    item_.name = std::move(name);
    item_.tolerance = tolerance;
  }

  void observe(double deviation, const std::string& where = {}) {
    ++item_.cases;
    // NaN counts as the worst possible outcome.
    if (!(deviation <= item_.worst_deviation)) {
      item_.worst_deviation = std::isnan(deviation) ? std::numeric_limits<double>::infinity() : deviation;
      worst_where_ = where;
    }
  }

  VerifyItem finish() {
    item_.passed = item_.worst_deviation <= item_.tolerance;
    if (!item_.passed && item_.detail.empty()) {
      item_.detail = worst_where_;
    }
    return item_;
  }

 private:
  VerifyItem item_;
  std::string worst_where_;
};

std::string at_dims(const Dims& dims) {
  return "d=" + std::to_string(dims.d()) + " k=" + std::to_string(dims.k());
}

// ---- subsystem operators ----

VerifyItem check_trace_preservation() {
  Tracker t("partial trace preserves the trace", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < 3; ++s) {
      DenseMatrix a = random_real(dims.total(), 101, s + 10 * d + 100 * k);
      double tr = a.trace().real();
      double scale = 0.0;
      for (std::size_t i = 0; i < a.side(); ++i) {
        scale += std::abs(a.real(i, i));
      }
      for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
        auto traced = SubsystemSet::from_mask(k, mask);
        t.observe(rel(partial_trace(a, dims, traced).trace().real(), tr, scale), at_dims(dims));
      }
    }
  }
  return t.finish();
}

VerifyItem check_partial_trace_sandwich() {
  Tracker t("partial trace matches the basis-sandwich construction", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 102, 10 * d + k);
    const double scale = max_abs(a.entries());
    for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
      auto traced = SubsystemSet::from_mask(k, mask);
      double diff =
          max_abs_difference(partial_trace(a, dims, traced), sandwich_partial_trace(a, dims, traced));
      t.observe(diff / std::max(1.0, scale), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_transpose_frobenius() {
  Tracker t("partial transpose preserves the Frobenius norm", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 103, 10 * d + k);
    const double norm = frob_norm_sq(a);
    for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
      double got = frob_norm_sq(partial_transpose(a, dims, SubsystemSet::from_mask(k, mask)));
      t.observe(rel(got, norm, norm), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_trace_of_transpose() {
  Tracker t("tracing a subsystem undoes its partial transpose", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 104, 10 * d + k);
    const double scale = max_abs(a.entries());
    for (std::size_t i = 1; i <= k; ++i) {
      SubsystemSet one(k, {i});
      double diff = max_abs_difference(partial_trace(partial_transpose(a, dims, one), dims, one),
                                       partial_trace(a, dims, one));
      t.observe(diff / std::max(1.0, scale), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_psd_preservation() {
  Tracker t("partial trace keeps PSD matrices PSD", 1e-10);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < 3; ++s) {
      DenseMatrix a = random_psd(dims.total(), 105, s + 10 * d + 100 * k);
      const double norm = std::sqrt(frob_norm_sq(a));
      for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
        double lo = hermitian_min_eigenvalue(partial_trace(a, dims, SubsystemSet::from_mask(k, mask)));
        t.observe(std::max(0.0, -lo) / norm, at_dims(dims));
      }
    }
  }
  return t.finish();
}

VerifyItem check_kron_sum_of_frob() {
  Tracker t("sum over basis sandwiches equals the identity sandwich", 1e-12);
  RngStream rng(106, 0);
  for (std::size_t d : {2, 3}) {
    for (std::size_t rows : {1, 2, 3}) {
      for (std::size_t cols : {1, 2}) {
        Rect c = random_rect(rows, cols, rng);
        Rect e = random_rect(rows, cols, rng);
        Rect m = random_rect(rows * d, rows * d, rng);
        double lhs = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            lhs += frob_sq(sandwich(kron(c, Rect::unit_column(d, i)), m, kron(e, Rect::unit_column(d, j))));
          }
        }
        double rhs = frob_sq(sandwich(kron(c, Rect::identity(d)), m, kron(e, Rect::identity(d))));
        t.observe(rel(lhs, rhs, rhs));
      }
    }
  }
  return t.finish();
}

VerifyItem check_pmrdm_partial_trace() {
  Tracker t("PMRDM trace equals the measured partial trace", 1e-10);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 107, 10 * d + k);
    RngStream rng(107, 1000 + 10 * d + k);
    KronQueryVector q = sample_query(QueryDistribution::RealGaussian, dims, rng);
    const Rect full = Rect::from(a);
    for (std::size_t i = 1; i <= k; ++i) {
      PmrdmPrefix prefix = PmrdmPrefix::leading(q, i);
      DenseMatrix m = pmrdm(a, dims, prefix);

      Vector lead{1.0};
      for (std::size_t p = 0; p < i; ++p) {
        lead = krontrace::kron(lead, prefix.factors[p]);
      }
      DenseMatrix reduced = partial_trace(a, dims, SubsystemSet::range(k, i + 1, k));
      Rect x = Rect::column(lead);
      Complex want = sandwich(x, Rect::from(reduced), x).at(0, 0);
      const double scale = std::abs(want) + frob_norm_sq(m);
      t.observe(rel(m.trace().real(), want.real(), std::sqrt(scale)), at_dims(dims));

      // The PMRDM itself against (x ⊗ I)^T A (x ⊗ I).
      std::size_t rest = 1;
      for (std::size_t p = i; p < k; ++p) {
        rest *= d;
      }
      Rect explicit_m = sandwich(kron(x, Rect::identity(rest)), full, kron(x, Rect::identity(rest)));
      double diff = max_abs_difference(m.entries(), explicit_m.v);
      t.observe(diff / std::max(1.0, max_abs(explicit_m.v)), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_abar_idempotent() {
  Tracker t("partial-transpose average is idempotent and fixes symmetric Kronecker sums", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 108, 10 * d + k);
    DenseMatrix abar = average_partial_transposes(a, dims);
    double scale = std::max(1.0, max_abs(abar.entries()));
    t.observe(max_abs_difference(average_partial_transposes(abar, dims), abar) / scale, at_dims(dims));
    DenseMatrix fixed = symmetric_kron_sum(dims, 108, 10 * d + k);
    scale = std::max(1.0, max_abs(fixed.entries()));
    t.observe(max_abs_difference(average_partial_transposes(fixed, dims), fixed) / scale, at_dims(dims));
  }
  return t.finish();
}

VerifyItem check_partial_trace_composition() {
  Tracker t("partial traces compose on renumbered survivors", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 109, 10 * d + k);
    const double scale = std::max(1.0, max_abs(a.entries()));
    const std::uint64_t full = (1ULL << k) - 1;
    for (std::uint64_t first = 0; first <= full; ++first) {
      for (std::uint64_t second = 0; second <= full; ++second) {
        if ((first & second) != 0) {
          continue;
        }
        auto s1 = SubsystemSet::from_mask(k, first);
        DenseMatrix step = partial_trace(a, dims, s1);
        // Renumber `second` among the survivors of `first`.
        std::uint64_t renumbered = 0;
        std::size_t rank = 0;
        for (std::size_t i = 0; i < k; ++i) {
          if ((first >> i) & 1ULL) {
            continue;
          }
          if ((second >> i) & 1ULL) {
            renumbered |= 1ULL << rank;
          }
          ++rank;
        }
        const std::size_t k_rest = k - s1.size();
        DenseMatrix composed = k_rest == 0 ? step
                                           : partial_trace(step, Dims(d, k_rest),
                                                           SubsystemSet::from_mask(k_rest, renumbered));
        DenseMatrix direct = partial_trace(a, dims, SubsystemSet::from_mask(k, first | second));
        t.observe(max_abs_difference(composed, direct) / scale, at_dims(dims));
      }
    }
  }
  return t.finish();
}

VerifyItem check_transpose_reorder() {
  Tracker t("basis sandwich swaps indices under a partial transpose", 1e-12);
  RngStream rng(110, 0);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 110, 10 * d + k);
    const Rect full = Rect::from(a);
    for (std::size_t i = 1; i <= k; ++i) {
      const Rect flipped = Rect::from(partial_transpose(a, dims, SubsystemSet(k, {i})));
      std::size_t before = 1;
      std::size_t after = 1;
      for (std::size_t p = 1; p < i; ++p) {
        before *= d;
      }
      for (std::size_t p = i; p < k; ++p) {
        after *= d;
      }
      Rect b = random_rect(before, 2, rng);
      Rect b2 = random_rect(before, 2, rng);
      Rect c = random_rect(after, 2, rng);
      Rect c2 = random_rect(after, 2, rng);
      for (std::size_t hi = 0; hi < d; ++hi) {
        for (std::size_t hj = 0; hj < d; ++hj) {
          auto left = [&](std::size_t j) { return kron(kron(b, Rect::unit_column(d, j)), c); };
          auto right = [&](std::size_t j) { return kron(kron(b2, Rect::unit_column(d, j)), c2); };
          Rect lhs = sandwich(left(hi), full, right(hj));
          Rect rhs = sandwich(left(hj), flipped, right(hi));
          double diff = max_abs_difference(lhs.v, rhs.v);
          t.observe(diff / std::max(1.0, max_abs(lhs.v)), at_dims(dims));
        }
      }
    }
  }
  return t.finish();
}

// ---- operator and oracle plumbing ----

std::vector<KronOperator> sample_operators(const Dims& dims, std::uint64_t seed) {
  std::vector<KronOperator> ops;
  ops.emplace_back(dims, ExplicitDense{random_real(dims.total(), seed, 0)});
  std::vector<DenseMatrix> factors;
  for (std::size_t i = 0; i < dims.k(); ++i) {
    factors.push_back(random_real(dims.d(), seed, 10 + i));
  }
  ops.emplace_back(dims, KronFactors{factors});
  std::vector<DenseMatrix> other;
  for (std::size_t i = 0; i < dims.k(); ++i) {
    other.push_back(random_real(dims.d(), seed, 100 + i));
  }
  ops.emplace_back(dims, SumOfKron{{KronFactors{factors}, KronFactors{other}}});
  std::vector<double> g;
  RngStream rng(seed, 1);
  for (std::size_t i = 0; i < dims.total(); ++i) {
    g.push_back(rng.normal());
  }
  ops.emplace_back(dims, RankOne{g});
  ops.emplace_back(dims, AllOnes{});
  ops.emplace_back(dims, WishartKronSeed{seed});
  return ops;
}

VerifyItem check_apply_materialize() {
  Tracker t("apply agrees with the materialized matrix", 1e-12);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    for (const KronOperator& op : sample_operators(dims, 111 + 10 * d + k)) {
      DenseMatrix m = op.materialize();
      RngStream rng(111, 10 * d + k);
      for (QueryDistribution dist : kAllDistributions) {
        KronQueryVector q = sample_query(dist, dims, rng);
        Vector want = m.multiply(expand_query(q));
        Vector got = op.apply(q);
        t.observe(max_abs_difference(got, want) / std::max(1.0, max_abs(want)),
                  std::string(op.kind()) + " " + at_dims(dims));
      }
    }
  }
  return t.finish();
}

VerifyItem check_kron_extract() {
  Tracker t("Kronecker vector extraction identities", 1e-15);
  RngStream rng(112, 0);
  for (std::size_t n : {1, 2, 3}) {
    for (std::size_t m : {1, 2, 4}) {
      Vector x(n);
      Vector y(m);
      for (Complex& z : x) {
        z = rng.normal();
      }
      for (Complex& z : y) {
        z = rng.normal();
      }
      Vector xy = krontrace::kron(x, y);
      Rect via_y = mul(kron(Rect::identity(n), Rect::column(y)), Rect::column(x));
      Rect via_x = mul(kron(Rect::column(x), Rect::identity(m)), Rect::column(y));
      t.observe(max_abs_difference(xy, via_y.v));
      t.observe(max_abs_difference(xy, via_x.v));
    }
  }
  return t.finish();
}

VerifyItem check_basis_flattening() {
  Tracker t("basis queries and digit flattening agree", 0.0);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    for (std::size_t index = 0; index < dims.total(); ++index) {
      auto digits = index_digits(index, dims);
      double bad = digits_index(digits, dims) == index ? 0.0 : 1.0;
      Vector e = expand_query(KronQueryVector::basis(dims, index));
      for (std::size_t j = 0; j < e.size(); ++j) {
        if (e[j] != Complex(j == index ? 1.0 : 0.0)) {
          bad = 1.0;
        }
      }
      // Mixed product of identities with unit matrices E_{digit, digit}.
      std::vector<DenseMatrix> ids(k, DenseMatrix::identity(d));
      std::vector<DenseMatrix> units;
      for (std::size_t p = 0; p < k; ++p) {
        DenseMatrix u(d);
        u.set(digits[p], digits[p], 1.0);
        units.push_back(u);
      }
      DenseMatrix projector = kron_all(mixed_product(ids, units).factors);
      for (std::size_t r = 0; r < projector.side(); ++r) {
        for (std::size_t c = 0; c < projector.side(); ++c) {
          if (projector(r, c) != Complex(r == index && c == index ? 1.0 : 0.0)) {
            bad = 1.0;
          }
        }
      }
      t.observe(bad, at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_query_count() {
  Tracker t("oracle query accounting", 0.0);
  Dims dims(2, 3);
  KronOperator op(dims, AllOnes{});
  RngStream rng(113, 0);
  KronQueryVector q = sample_query(QueryDistribution::RealGaussian, dims, rng);
  for (int i = 0; i < 37; ++i) {
    op.apply(q);
  }
  t.observe(std::abs(static_cast<double>(op.query_count()) - 37.0), "serial");
  op.reset_query_count();
  {
    std::vector<std::jthread> workers;
    for (int w = 0; w < 4; ++w) {
      workers.emplace_back([&] {
        for (int i = 0; i < 100; ++i) {
          op.apply(q);
        }
      });
    }
  }
  t.observe(std::abs(static_cast<double>(op.query_count()) - 400.0), "concurrent");

  op.reset_query_count();
  quadratic_form(op, q);
  t.observe(std::abs(static_cast<double>(op.query_count()) - 1.0), "quadratic form");
  op.reset_query_count();
  kron_hutchinson(op, QueryDistribution::ComplexRademacher, 25, 1);
  t.observe(std::abs(static_cast<double>(op.query_count()) - 25.0), "hutchinson");
  return t.finish();
}

// ---- estimators ----

VerifyItem check_recovery() {
  Tracker t("exact Kronecker recovery reproduces the operator with kd+1 queries", 1e-8);
  constexpr std::pair<std::size_t, std::size_t> dims_list[] = {{2, 2}, {2, 3}, {3, 2}};
  for (auto [d, k] : dims_list) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < 5; ++s) {
      std::vector<DenseMatrix> factors;
      for (std::size_t i = 0; i < k; ++i) {
        DenseMatrix f = random_real(d, 114, 100 * s + i);
        // Push some factor traces negative.
        factors.push_back(i % 2 == 1 ? f - DenseMatrix::identity(d).scaled(3.0) : f);
      }
      KronOperator op(dims, KronFactors{factors});
      const DenseMatrix want = op.materialize();
      op.reset_query_count();
      RngStream rng(114, 1000 + s);
      KronRecovery rec = exact_kron_recovery(op, rng);
      const double norm = std::sqrt(frob_norm_sq(want));
      t.observe(std::sqrt(frob_norm_sq(rec.expand() - want)) / norm, at_dims(dims));
      t.observe(std::abs(static_cast<double>(op.query_count()) - static_cast<double>(k * d + 1)), "query count");
      t.observe(rel(rec.trace(), want.trace().real(), norm), "trace");
    }
  }
  KronOperator zero(Dims(2, 2), KronFactors{{DenseMatrix(2), DenseMatrix(2)}});
  RngStream rng(114, 9999);
  KronRecovery rec = exact_kron_recovery(zero, rng);
  t.observe(rec.degenerate && zero.query_count() == 1 ? 0.0 : 1.0, "zero operator");
  return t.finish();
}

VerifyItem check_rank_one() {
  Tracker t("rank-one trace from a single query", 1e-10);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Dims dims(2, 1 + s % 5);
    RngStream g_rng(115, s);
    std::vector<double> g(dims.total());
    double norm = 0.0;
    for (double& x : g) {
      x = g_rng.normal();
      norm += x * x;
    }
    KronOperator op(dims, RankOne{g});
    RngStream rng(115, 100 + s);
    double got = rank_one_exact_trace(op, rng);
    t.observe(rel(got, norm, norm), at_dims(dims));
    t.observe(op.query_count() == 1 ? 0.0 : 1.0, "query count");
  }
  return t.finish();
}

VerifyItem check_complex_simulation() {
  Tracker t("complex queries simulated by 2^k real queries", 1e-12);
  for (std::size_t k = 1; k <= 4; ++k) {
    Dims dims(2, k);
    KronOperator op(dims, ExplicitDense{random_real(dims.total(), 116, k)});
    RngStream rng(116, 100 + k);
    KronQueryVector q = sample_query(QueryDistribution::ComplexGaussian, dims, rng);
    Vector want = op.apply(q);
    op.reset_query_count();
    ComplexQuerySimulation sim = simulate_complex_query(op, q);
    t.observe(max_abs_difference(sim.response, want) / std::max(1.0, max_abs(want)), at_dims(dims));
    t.observe(sim.real_queries_used == (1ULL << k) && op.query_count() == (1ULL << k) ? 0.0 : 1.0,
              "real query count");
  }
  return t.finish();
}

VerifyItem check_determinism() {
  Tracker t("seeded Hutchinson runs are bit-identical across worker counts", 0.0);
  Dims dims(3, 2);
  KronOperator op(dims, ExplicitDense{random_real(dims.total(), 117, 0)});
  for (QueryDistribution dist : kAllDistributions) {
    TraceEstimate a = kron_hutchinson(op, dist, 101, 117);
    HutchinsonOptions threaded;
    threaded.workers = 3;
    TraceEstimate b = kron_hutchinson(op, dist, 101, 117, threaded);
    TraceEstimate c = kron_hutchinson(op, dist, 101, 117);
    bool same = a.value == b.value && a.imag_value == b.imag_value && a.value == c.value;
    t.observe(same ? 0.0 : 1.0, std::string(distribution_name(dist)));
  }
  return t.finish();
}

// ---- variance formulas against the moment oracle ----

VerifyItem check_unbiasedness() {
  Tracker t("every query distribution is unbiased", 1e-10);
  for (auto [d, k] : kOracleDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 118, 10 * d + k);
    const double tr = a.trace().real();
    for (QueryDistribution dist : kAllDistributions) {
      MomentOracleResult r = moment_oracle(a, dims, dist);
      t.observe(rel(r.mean.real(), tr, std::abs(tr)), at_dims(dims));
      t.observe(std::abs(r.mean.imag()) / std::max(1.0, std::abs(tr)), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_real_gaussian_exactness(VerifyDepth depth) {
  Tracker t("real Gaussian variance equals the subset formula", 1e-10);
  const std::uint64_t instances = depth == VerifyDepth::Full ? 20 : 5;
  for (auto [d, k] : kOracleDims) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < instances; ++s) {
      DenseMatrix a = random_real(dims.total(), 119, 1000 * d + 100 * k + s);
      const double formula = exact_variance(a, dims, ScalarField::Real);
      const double oracle = moment_oracle(a, dims, QueryDistribution::RealGaussian).variance();
      t.observe(std::abs(formula - oracle) / std::abs(oracle), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_complex_gaussian_fixed_points(VerifyDepth depth) {
  Tracker t("complex Gaussian variance equals the subset formula when A equals its transpose average", 1e-10);
  const std::uint64_t instances = depth == VerifyDepth::Full ? 20 : 5;
  for (auto [d, k] : kOracleDims) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < instances; ++s) {
      DenseMatrix a = s % 2 == 0 ? symmetric_kron_sum(dims, 120, s)
                                 : average_partial_transposes(random_real(dims.total(), 120, s), dims);
      const double formula = exact_variance(a, dims, ScalarField::Complex);
      const MomentOracleResult r = moment_oracle(a, dims, QueryDistribution::ComplexGaussian);
      t.observe(std::abs(formula - r.variance()) / std::abs(r.variance()), at_dims(dims));
      t.observe(std::abs(formula - r.variance_abs()) / std::abs(r.variance_abs()), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_rademacher_domination() {
  Tracker t("Rademacher variance never exceeds the subset formula", 1e-9);
  for (auto [d, k] : kOracleDims) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < 5; ++s) {
      DenseMatrix a = random_real(dims.total(), 121, 1000 * d + 100 * k + s);
      const double formula = exact_variance(a, dims, ScalarField::Real);
      const double oracle = moment_oracle(a, dims, QueryDistribution::RealRademacher).variance();
      t.observe(std::max(0.0, oracle - formula) / formula, "real " + at_dims(dims));

      DenseMatrix fixed = average_partial_transposes(a, dims);
      const double cformula = exact_variance(fixed, dims, ScalarField::Complex);
      const double coracle = moment_oracle(fixed, dims, QueryDistribution::ComplexRademacher).variance();
      t.observe(std::max(0.0, coracle - cformula) / cformula, "complex " + at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_upper_bound_ordering() {
  Tracker t("bound without the transpose average dominates, with equality at fixed points", 1e-10);
  for (auto [d, k] : kSmallDims) {
    Dims dims(d, k);
    for (ScalarField field : {ScalarField::Real, ScalarField::Complex}) {
      DenseMatrix a = random_real(dims.total(), 122, 10 * d + k);
      const double exact = exact_variance(a, dims, field);
      const double bound = variance_upper_bound_no_abar(a, dims, field);
      t.observe(std::max(0.0, exact - bound) / bound, at_dims(dims));
      DenseMatrix fixed = symmetric_kron_sum(dims, 122, 10 * d + k);
      const double fe = exact_variance(fixed, dims, field);
      t.observe(std::abs(fe - variance_upper_bound_no_abar(fixed, dims, field)) / std::max(1.0, fe), at_dims(dims));
    }
  }
  return t.finish();
}

VerifyItem check_psd_chain() {
  Tracker t("PSD variance chain", 1e-12);
  constexpr std::pair<std::size_t, std::size_t> dims_list[] = {{2, 2}, {2, 3}, {3, 2}};
  for (auto [d, k] : dims_list) {
    Dims dims(d, k);
    for (std::uint64_t s = 0; s < 10; ++s) {
      KronOperator op(dims, WishartKronSeed{1230 + s});
      DenseMatrix a = op.materialize();
      const double tr = a.trace().real();
      for (ScalarField field : {ScalarField::Real, ScalarField::Complex}) {
        const double w = field == ScalarField::Real ? 2.0 : 1.0;
        const double exact = exact_variance(a, dims, field);
        const double middle = (std::pow(w + 1.0, static_cast<double>(k)) - 1.0) * tr * tr;
        const double bound = psd_worst_case_bound(tr, k, field);
        t.observe(std::max(0.0, exact - middle) / middle, at_dims(dims));
        t.observe(std::max(0.0, middle - bound) / bound, at_dims(dims));
      }
    }
  }
  return t.finish();
}

VerifyItem check_second_moment() {
  Tracker t("second moment formula matches the oracle and the variance", 1e-10);
  for (auto [d, k] : kOracleDims) {
    Dims dims(d, k);
    DenseMatrix a = random_real(dims.total(), 124, 10 * d + k);
    const double tr = a.trace().real();
    const double second = second_moment_formula(a, dims, ScalarField::Real);
    const double var = exact_variance(a, dims, ScalarField::Real);
    t.observe(rel(second - tr * tr, var, second), at_dims(dims));
    const MomentOracleResult r = moment_oracle(a, dims, QueryDistribution::RealGaussian);
    t.observe(rel(r.second_moment_sq.real(), second, second), at_dims(dims));
  }
  return t.finish();
}

// ---- Monte Carlo anchors ----

VerifyItem check_moment_tensors(VerifyDepth depth) {
  const std::size_t samples = depth == VerifyDepth::Full ? 1'000'000 : 200'000;
  Tracker t("fourth-moment tensors match Monte Carlo (max z-score)", 5.0);
  for (std::size_t d : {2, 3}) {
    for (QueryDistribution dist : kAllDistributions) {
      MomentTensorCheck c = validate_moment_tensor(MomentTensor(dist, d), samples, 125 + d);
      t.observe(c.max_z_score, std::string(distribution_name(dist)) + " d=" + std::to_string(d));
    }
  }
  return t.finish();
}

VerifyItem check_wishart_mse(VerifyDepth depth) {
  const std::size_t draws = depth == VerifyDepth::Full ? 400'000 : 100'000;
  Tracker t("unconditional Wishart trace-product variance (standard errors)", 5.0);
  constexpr std::pair<std::size_t, std::size_t> dims_list[] = {{2, 1}, {2, 2}, {3, 1}};
  for (auto [d, k] : dims_list) {
    RngStream rng(126, 10 * d + k);
    std::vector<double> values(draws);
    for (double& v : values) {
      v = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        // tr(G^T G) = ‖G‖_F².
        double tr = 0.0;
        for (std::size_t e = 0; e < d * d; ++e) {
          const double g = rng.normal();
          tr += g * g;
        }
        v *= tr;
      }
    }
    double mean = 0.0;
    for (double v : values) {
      mean += v;
    }
    mean /= static_cast<double>(draws);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : values) {
      const double c = (v - mean) * (v - mean);
      m2 += c;
      m4 += c * c;
    }
    const double n = static_cast<double>(draws);
    const double var = m2 / (n - 1.0);
    const double se = std::sqrt(std::max(0.0, m4 / n - (m2 / n) * (m2 / n)) / n);
    t.observe(std::abs(var - wishart_mse(d, k, 0)) / se,
              "d=" + std::to_string(d) + " k=" + std::to_string(k));
  }
  return t.finish();
}

VerifyItem check_rankone_norms(VerifyDepth depth) {
  const std::size_t draws = depth == VerifyDepth::Full ? 50'000 : 20'000;
  Tracker t("rank-one partial-trace norms match Monte Carlo (standard errors)", 3.0);
  for (std::size_t d : {2, 3}) {
    for (std::size_t k : {1, 2, 3}) {
      Dims dims(d, k);
      std::vector<double> sum(k + 1, 0.0);
      std::vector<double> sum_sq(k + 1, 0.0);
      RngStream rng(127, 10 * d + k);
      for (std::size_t draw = 0; draw < draws; ++draw) {
        std::vector<double> g(dims.total());
        for (double& x : g) {
          x = rng.normal();
        }
        DenseMatrix outer = KronOperator(dims, RankOne{g}).materialize();
        for (std::size_t s = 0; s <= k; ++s) {
          const double v = frob_norm_sq(partial_trace(outer, dims, SubsystemSet::range(k, 1, s)));
          sum[s] += v;
          sum_sq[s] += v * v;
        }
      }
      const double n = static_cast<double>(draws);
      for (std::size_t s = 0; s <= k; ++s) {
        const double mean = sum[s] / n;
        const double var = (sum_sq[s] - n * mean * mean) / (n - 1.0);
        const double se = std::sqrt(var / n);
        t.observe(std::abs(mean - rankone_expected_partial_trace_norm(d, k, s)) / se,
                  at_dims(dims) + " s=" + std::to_string(s));
      }
    }
  }
  return t.finish();
}

VerifyItem run_item(const std::function<VerifyItem()>& fn, const char* fallback_name) {
  const auto start = Clock::now();
  VerifyItem item;
  try {
    item = fn();
  } catch (const std::exception& e) {
    item.name = fallback_name;
    item.passed = false;
    item.detail = std::string("threw: ") + e.what();
  }
  item.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return item;
}

}  // namespace

VerifyDepth parse_verify_depth(std::string_view name) {
  if (name == "fast") {
    return VerifyDepth::Fast;
  }
  if (name == "full") {
    return VerifyDepth::Full;
  }
  throw std::invalid_argument("unknown verify depth '" + std::string(name) + "' (expected fast|full)");
}

bool VerifyReport::passed() const {
  return failures() == 0;
}

std::size_t VerifyReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const VerifyItem& i) { return !i.passed; }));
}

VerifyReport verify_suite(VerifyDepth depth) {
  const auto start = Clock::now();
  VerifyReport report;
  auto add = [&](const char* name, std::function<VerifyItem()> fn) { report.items.push_back(run_item(fn, name)); };

  add("trace preservation", check_trace_preservation);
  add("partial trace sandwich", check_partial_trace_sandwich);
  add("transpose frobenius", check_transpose_frobenius);
  add("trace of transpose", check_trace_of_transpose);
  add("psd preservation", check_psd_preservation);
  add("kron sum of frob", check_kron_sum_of_frob);
  add("pmrdm", check_pmrdm_partial_trace);
  add("abar", check_abar_idempotent);
  add("composition", check_partial_trace_composition);
  add("reorder", check_transpose_reorder);
  add("apply", check_apply_materialize);
  add("kron extract", check_kron_extract);
  add("flattening", check_basis_flattening);
  add("query count", check_query_count);
  add("recovery", check_recovery);
  add("rank one", check_rank_one);
  add("complex simulation", check_complex_simulation);
  add("determinism", check_determinism);
  add("unbiasedness", check_unbiasedness);
  add("real exactness", [depth] { return check_real_gaussian_exactness(depth); });
  add("complex exactness", [depth] { return check_complex_gaussian_fixed_points(depth); });
  add("rademacher", check_rademacher_domination);
  add("upper bound", check_upper_bound_ordering);
  add("psd chain", check_psd_chain);
  add("second moment", check_second_moment);
  add("moment tensors", [depth] { return check_moment_tensors(depth); });
  add("wishart", [depth] { return check_wishart_mse(depth); });
  add("rank-one norms", [depth] { return check_rankone_norms(depth); });

  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

void print_report(const VerifyReport& report, std::ostream& out) {
  char buf[96];
  for (const VerifyItem& item : report.items) {
    std::snprintf(buf, sizeof(buf), "worst=%.3g tol=%.3g cases=%zu %.2fs", item.worst_deviation, item.tolerance,
                  item.cases, item.seconds);
    out << (item.passed ? "PASS " : "FAIL ") << item.name << "  " << buf;
    if (!item.detail.empty()) {
      out << "  [" << item.detail << "]";
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.2fs", report.seconds);
  out << (report.passed() ? "verify: all " : "verify: ") << (report.items.size() - report.failures()) << "/"
      << report.items.size() << " passed in " << buf << '\n';
}

}  // namespace krontrace
