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


// Invariants checked over many seeded instances.

#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "krontrace/estimators.hpp"
#include "krontrace/rng.hpp"
#include "krontrace/subsystem_ops.hpp"
#include "krontrace/variance.hpp"
#include "reference.hpp"

namespace krontrace {
namespace {

constexpr std::uint64_t kSeeds = 25;

struct Shape {
  std::size_t d;
  std::size_t k;
};

const Shape kShapes[] = {{2, 1}, {2, 2}, {3, 2}, {2, 3}, {2, 4}};

double rel(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

// Calls `visit` with every query whose factor entries range over `values`.
void for_each_query(const Dims& dims, const std::vector<Complex>& values,
                    const std::function<void(const KronQueryVector&)>& visit) {
  const std::size_t entries = dims.d() * dims.k();
  std::vector<std::size_t> pick(entries, 0);
  while (true) {
    std::vector<Vector> factors(dims.k(), Vector(dims.d()));
    for (std::size_t e = 0; e < entries; ++e) {
      factors[e / dims.d()][e % dims.d()] = values[pick[e]];
    }
    visit(KronQueryVector(dims, factors));
    std::size_t e = 0;
    while (e < entries && ++pick[e] == values.size()) {
      pick[e++] = 0;
    }
    if (e == entries) {
      return;
    }
  }
}

struct Enumerated {
  double mean = 0.0;
  double variance = 0.0;
};

// Exact mean and Var[Re X] of the quadratic form under a uniform finite distribution.
Enumerated enumerate_moments(const KronOperator& op, const std::vector<Complex>& values) {
  double n = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for_each_query(op.dims(), values, [&](const KronQueryVector& q) {
    const double x = quadratic_form(op, q).real();
    n += 1.0;
    s1 += x;
    s2 += x * x;
  });
  return {s1 / n, s2 / n - (s1 / n) * (s1 / n)};
}

TEST(Property, PartialTraceMatchesReference) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const DenseMatrix a = ref::random_dense(dims.total(), 10 * seed + s.d * 100 + s.k);
      const ref::Mat ra = ref::from_dense(a);
      for (std::uint64_t mask = 0; mask < (1u << s.k); ++mask) {
        std::vector<bool> traced(s.k);
        for (std::size_t i = 0; i < s.k; ++i) {
          traced[i] = (mask >> i) & 1U;
        }
        const SubsystemSet set = SubsystemSet::from_mask(s.k, mask);
        ASSERT_LT(max_abs_difference(partial_trace(a, dims, set),
                                     ref::to_dense(ref::partial_trace(ra, s.d, s.k, traced))),
                  1e-12);
        ASSERT_EQ(max_abs_difference(partial_transpose(a, dims, set),
                                     ref::to_dense(ref::partial_transpose(ra, s.d, s.k, traced))),
                  0.0);
      }
    }
  }
}

TEST(Property, SubsystemOperationIdentities) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const DenseMatrix a = ref::random_dense(dims.total(), 500 + seed);
      const double tr = a.trace().real();
      const double frob = frob_norm_sq(a);
      RngStream rng(seed, s.d * 10 + s.k);
      const std::uint64_t mask = rng.next_u64() & ((1u << s.k) - 1);
      const SubsystemSet set = SubsystemSet::from_mask(s.k, mask);
      // Trace is preserved, and partial transposes are Frobenius isometries and involutions.
      EXPECT_LT(rel(partial_trace(a, dims, set).trace().real(), tr), 1e-12);
      const DenseMatrix t = partial_transpose(a, dims, set);
      EXPECT_LT(rel(frob_norm_sq(t), frob), 1e-13);
      EXPECT_EQ(max_abs_difference(partial_transpose(t, dims, set), a), 0.0);
      // Tracing a subsystem removes any transpose applied to it.
      EXPECT_LT(max_abs_difference(partial_trace(t, dims, set), partial_trace(a, dims, set)), 1e-12);
      // Transposes on disjoint sets compose.
      const SubsystemSet other = set.complement();
      EXPECT_EQ(max_abs_difference(partial_transpose(t, dims, other), a.transpose()), 0.0);
    }
  }
}

TEST(Property, PartialTraceKeepsPsd) {
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    Dims dims(2, 3);
    const DenseMatrix g = ref::random_dense(8, 600 + seed);
    const DenseMatrix psd = g.transpose() * g;
    ASSERT_TRUE(is_psd(psd));
    for (std::uint64_t mask = 0; mask < 8; ++mask) {
      EXPECT_TRUE(is_psd(partial_trace(psd, dims, SubsystemSet::from_mask(3, mask)))) << seed << " " << mask;
    }
  }
}

TEST(Property, AveragedPrefixSandwichIsPartialTrace) {
  // Averaging over every sign pattern of the leading factors is exact.
  Dims dims(2, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseMatrix a = ref::random_dense(8, 700 + seed);
    for (std::size_t i = 1; i <= 3; ++i) {
      DenseMatrix sum(checked_pow(2, 3 - i));
      double count = 0.0;
      Dims prefix_dims(2, i);
      for_each_query(prefix_dims, {Complex(1), Complex(-1)}, [&](const KronQueryVector& q) {
        PmrdmPrefix prefix;
        prefix.factors = q.factors();
        sum = sum + pmrdm(a, dims, prefix);
        count += 1.0;
      });
      const DenseMatrix want = partial_trace(a, dims, SubsystemSet::range(3, 1, i));
      EXPECT_LT(max_abs_difference(sum.scaled(1.0 / count), want), 1e-12) << "i=" << i;
    }
  }
}

TEST(Property, AverageOfTransposesIsIdempotentAndDoesNotChangeTrace) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const DenseMatrix a = ref::random_dense(dims.total(), 800 + seed);
      const DenseMatrix bar = average_partial_transposes(a, dims);
      EXPECT_LT(max_abs_difference(average_partial_transposes(bar, dims), bar), 1e-14);
      EXPECT_LT(rel(bar.trace().real(), a.trace().real()), 1e-13);
      EXPECT_LE(frob_norm_sq(bar), frob_norm_sq(a) * (1.0 + 1e-13));
    }
  }
}

TEST(Property, ExhaustiveRademacherMatchesOracle) {
  // Every sign pattern for d=2, k=2 (16 real, 256 complex queries).
  Dims dims(2, 2);
  const double h = std::sqrt(0.5);
  const std::vector<Complex> real_signs = {Complex(1), Complex(-1)};
  const std::vector<Complex> complex_signs = {Complex(h, h), Complex(h, -h), Complex(-h, h), Complex(-h, -h)};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KronOperator op(dims, ExplicitDense{ref::random_dense(4, 900 + seed)});
    const DenseMatrix a = op.materialize();
    const Enumerated real = enumerate_moments(op, real_signs);
    const MomentOracleResult real_oracle = moment_oracle(a, dims, QueryDistribution::RealRademacher);
    EXPECT_LT(rel(real.mean, a.trace().real()), 1e-12);
    EXPECT_LT(rel(real.variance, real_oracle.variance()), 1e-11);
    const Enumerated cplx = enumerate_moments(op, complex_signs);
    const MomentOracleResult complex_oracle = moment_oracle(a, dims, QueryDistribution::ComplexRademacher);
    EXPECT_LT(rel(cplx.mean, a.trace().real()), 1e-12);
    EXPECT_LT(rel(cplx.variance, complex_oracle.variance()), 1e-11);
  }
}

TEST(Property, RealGaussianVarianceEqualsFormulaOnKroneckerSums) {
  for (const Shape& s : kShapes) {
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const ref::KronSum sum = ref::random_kron_sum(s.d, s.k, 1 + seed % 3, 1000 + seed);
      const DenseMatrix a = ref::to_dense(sum.materialize());
      const double want = ref::kron_sum_moments(sum, QueryDistribution::RealGaussian).variance();
      EXPECT_LT(rel(exact_variance(a, Dims(s.d, s.k), ScalarField::Real), want), 1e-10)
          << "d=" << s.d << " k=" << s.k << " seed=" << seed;
    }
  }
}

TEST(Property, ComplexGaussianVarianceEqualsFormulaOnFixedPoints) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      ref::KronSum sum = ref::random_kron_sum(s.d, s.k, 1 + seed % 3, 2000 + seed);
      for (auto& term : sum.terms) {
        for (ref::Mat& f : term) {
          const ref::Mat ft = ref::transpose(f);
          for (std::size_t i = 0; i < f.a.size(); ++i) {
            f.a[i] = 0.5 * (f.a[i] + ft.a[i]);
          }
        }
      }
      const DenseMatrix a = ref::to_dense(sum.materialize());
      const double want = ref::kron_sum_moments(sum, QueryDistribution::ComplexGaussian).variance();
      EXPECT_LT(rel(exact_variance(a, dims, ScalarField::Complex), want), 1e-10)
          << "d=" << s.d << " k=" << s.k << " seed=" << seed;
    }
  }
}

TEST(Property, RademacherNeverExceedsFormula) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const ref::KronSum sum = ref::random_kron_sum(s.d, s.k, 1 + seed % 3, 3000 + seed);
      const DenseMatrix a = ref::to_dense(sum.materialize());
      const double formula = exact_variance(a, dims, ScalarField::Real);
      const double rad = ref::kron_sum_moments(sum, QueryDistribution::RealRademacher).variance();
      EXPECT_GE(formula, rad - 1e-9 * formula) << "d=" << s.d << " k=" << s.k << " seed=" << seed;
      const DenseMatrix bar = average_partial_transposes(a, dims);
      const double cformula = exact_variance(bar, dims, ScalarField::Complex);
      const double crad = moment_oracle(bar, dims, QueryDistribution::ComplexRademacher).variance();
      EXPECT_GE(cformula, crad - 1e-9 * cformula) << "d=" << s.d << " k=" << s.k << " seed=" << seed;
    }
  }
}

TEST(Property, UpperBoundOrdering) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const DenseMatrix a = ref::random_dense(dims.total(), 4000 + seed);
      for (ScalarField field : {ScalarField::Real, ScalarField::Complex}) {
        const double exact = exact_variance(a, dims, field);
        EXPECT_GE(variance_upper_bound_no_abar(a, dims, field), exact * (1.0 - 1e-12));
        const DenseMatrix bar = average_partial_transposes(a, dims);
        EXPECT_LT(rel(variance_upper_bound_no_abar(bar, dims, field), exact_variance(bar, dims, field)), 1e-10);
      }
    }
  }
}

TEST(Property, PsdChain) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const DenseMatrix a = KronOperator(dims, WishartKronSeed{5000 + seed}).materialize();
      const double tr = a.trace().real();
      for (ScalarField field : {ScalarField::Real, ScalarField::Complex}) {
        const double w = field == ScalarField::Real ? 2.0 : 1.0;
        const double middle = (std::pow(w + 1.0, s.k) - 1.0) * tr * tr;
        const double exact = exact_variance(a, dims, field);
        EXPECT_LE(exact, middle * (1.0 + 1e-12));
        EXPECT_LE(middle, psd_worst_case_bound(tr, s.k, field));
      }
    }
  }
}

TEST(Property, SecondMomentIsVariancePlusSquaredTrace) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const DenseMatrix a = ref::random_dense(dims.total(), 6000 + seed);
      const double tr = a.trace().real();
      for (ScalarField field : {ScalarField::Real, ScalarField::Complex}) {
        EXPECT_LT(rel(second_moment_formula(a, dims, field), exact_variance(a, dims, field) + tr * tr), 1e-12);
      }
    }
  }
}

TEST(Property, RecoveryOnRandomFactors) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      std::vector<DenseMatrix> factors;
      for (std::size_t i = 0; i < s.k; ++i) {
        factors.push_back(ref::random_dense(s.d, 7000 + seed * 16 + i));
      }
      KronOperator op(dims, KronFactors{factors});
      RngStream rng(seed, 1);
      const KronRecovery rec = exact_kron_recovery(op, rng);
      const DenseMatrix want = kron_all(factors);
      EXPECT_LT(std::sqrt(frob_norm_sq(rec.expand() - want) / frob_norm_sq(want)), 1e-8);
      EXPECT_EQ(op.query_count(), s.k * s.d + 1);
    }
  }
}

TEST(Property, ComplexSimulationOnRandomQueries) {
  for (const Shape& s : kShapes) {
    Dims dims(s.d, s.k);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      KronOperator op(dims, ExplicitDense{ref::random_dense(dims.total(), 8000 + seed)});
      RngStream rng(seed, 2);
      const KronQueryVector q = sample_query(QueryDistribution::ComplexGaussian, dims, rng);
      const ComplexQuerySimulation sim = simulate_complex_query(op, q);
      EXPECT_LT(max_abs_difference(sim.response, op.materialize().multiply(expand_query(q))), 1e-12);
      EXPECT_EQ(sim.real_queries_used, std::uint64_t{1} << s.k);
    }
  }
}

TEST(Property, HutchinsonIsBitIdenticalAcrossWorkerCounts) {
  Dims dims(3, 2);
  KronOperator op(dims, ExplicitDense{ref::random_dense(9, 9000)});
  for (QueryDistribution dist : kAllDistributions) {
    HutchinsonOptions one;
    HutchinsonOptions many;
    many.workers = 3;
    const TraceEstimate a = kron_hutchinson(op, dist, 101, 5, one);
    const TraceEstimate b = kron_hutchinson(op, dist, 101, 5, many);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.imag_value, b.imag_value);
  }
}

}  // namespace
}  // namespace krontrace
