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


#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "krontrace/kron_core.hpp"
#include "reference.hpp"

namespace krontrace {
namespace {

TEST(Dims, DigitsAreMostSignificantFirst) {
  Dims dims(3, 3);
  EXPECT_EQ(dims.total(), 27u);
  EXPECT_EQ(index_digits(5, dims), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(index_digits(26, dims), (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(dims.stride(0), 9u);
  EXPECT_EQ(dims.stride(2), 1u);
  for (std::size_t i = 0; i < dims.total(); ++i) {
    EXPECT_EQ(digits_index(index_digits(i, dims), dims), i);
    EXPECT_EQ(index_digits(i, dims), ref::digits(i, 3, 3));
  }
}

TEST(Dims, RejectsDegenerateShapes) {
  EXPECT_THROW(Dims(0, 2), std::invalid_argument);
  EXPECT_THROW(Dims(2, 0), std::invalid_argument);
}

TEST(Dims, CapIsEnforced) {
  EXPECT_NO_THROW(Dims(2, 12));
  EXPECT_THROW(Dims(2, 13), BudgetExceeded);
  EXPECT_THROW(Dims(4, 4, 100), BudgetExceeded);
  EXPECT_NO_THROW(Dims(4, 4, 256));
}

TEST(Dims, CapFollowsEnvironment) {
  ASSERT_EQ(setenv("KRONTRACE_BUDGET_DK", "16", 1), 0);
  EXPECT_EQ(dimension_cap(), 16u);
  EXPECT_NO_THROW(Dims(2, 4));
  EXPECT_THROW(Dims(2, 5), BudgetExceeded);
  ASSERT_EQ(unsetenv("KRONTRACE_BUDGET_DK"), 0);
  EXPECT_EQ(dimension_cap(), kDefaultDimensionCap);
}

TEST(Dims, CheckedPowDetectsOverflow) {
  EXPECT_EQ(checked_pow(3, 4), 81u);
  EXPECT_EQ(checked_pow(7, 0), 1u);
  EXPECT_THROW(checked_pow(2, 70), std::overflow_error);
}

TEST(DenseMatrix, KronMatchesReference) {
  const DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const DenseMatrix b = DenseMatrix::from_rows({{0, 5}, {6, 7}});
  const DenseMatrix got = kron(a, b);
  const DenseMatrix want = ref::to_dense(ref::kron(ref::from_dense(a), ref::from_dense(b)));
  EXPECT_EQ(max_abs_difference(got, want), 0.0);
  EXPECT_EQ(got.real(0, 1), 5.0);
  EXPECT_EQ(got.real(3, 3), 28.0);
}

TEST(KronQueryVector, ExpandsAsKroneckerProduct) {
  Dims dims(2, 2);
  KronQueryVector q = KronQueryVector::real(dims, {{1, 2}, {3, 4}});
  EXPECT_EQ(q.field(), ScalarField::Real);
  const Vector x = expand_query(q);
  ASSERT_EQ(x.size(), 4u);
  EXPECT_EQ(x[0], Complex(3));
  EXPECT_EQ(x[1], Complex(4));
  EXPECT_EQ(x[2], Complex(6));
  EXPECT_EQ(x[3], Complex(8));
}

TEST(KronQueryVector, FieldFollowsEntries) {
  Dims dims(2, 1);
  KronQueryVector q(dims, {Vector{Complex(1, 0), Complex(0, 1)}});
  EXPECT_EQ(q.field(), ScalarField::Complex);
  KronQueryVector r(dims, {Vector{Complex(1, 0), Complex(2, 0)}});
  EXPECT_EQ(r.field(), ScalarField::Real);
}

TEST(KronQueryVector, RejectsWrongFactorShape) {
  Dims dims(2, 2);
  EXPECT_THROW(KronQueryVector::real(dims, {{1, 2}}), std::invalid_argument);
  EXPECT_THROW(KronQueryVector::real(dims, {{1, 2}, {3}}), std::invalid_argument);
}

TEST(KronQueryVector, BasisVectorHasOneEntry) {
  Dims dims(3, 2);
  const Vector x = expand_query(KronQueryVector::basis(dims, 7));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i], Complex(i == 7 ? 1.0 : 0.0));
  }
}

DenseMatrix random_real(std::size_t side, std::uint64_t seed) {
  return ref::random_dense(side, seed);
}

TEST(KronOperator, EveryRepresentationAppliesLikeItsMatrix) {
  Dims dims(2, 3);
  std::vector<DenseMatrix> factors = {random_real(2, 1), random_real(2, 2), random_real(2, 3)};
  std::vector<double> g = {1, -2, 0.5, 3, 0, 1, 2, -1};
  std::vector<KronOperator> ops;
  ops.emplace_back(dims, ExplicitDense{random_real(8, 4)});
  ops.emplace_back(dims, KronFactors{factors});
  ops.emplace_back(dims, SumOfKron{{KronFactors{factors}, KronFactors{{random_real(2, 5), random_real(2, 6),
                                                                         random_real(2, 7)}}}});
  ops.emplace_back(dims, RankOne{g});
  ops.emplace_back(dims, AllOnes{});
  ops.emplace_back(dims, WishartKronSeed{11});
  KronQueryVector q(dims, {Vector{Complex(1, 2), Complex(-1, 0.5)}, Vector{Complex(0.3, 0), Complex(2, -1)},
                           Vector{Complex(1, 1), Complex(0, -2)}});
  const Vector x = expand_query(q);
  for (const KronOperator& op : ops) {
    SCOPED_TRACE(std::string(op.kind()));
    const DenseMatrix a = op.materialize();
    const Vector want = a.multiply(x);
    const Vector got = op.apply(q);
    EXPECT_LT(max_abs_difference(got, want), 1e-12);
    EXPECT_EQ(op.query_count(), 1u);
  }
}

TEST(KronOperator, KronFactorsMaterializeToReference) {
  Dims dims(3, 2);
  std::vector<DenseMatrix> factors = {random_real(3, 8), random_real(3, 9)};
  KronOperator op(dims, KronFactors{factors});
  const DenseMatrix want = ref::to_dense(ref::kron(ref::from_dense(factors[0]), ref::from_dense(factors[1])));
  EXPECT_LT(max_abs_difference(op.materialize(), want), 1e-14);
  ASSERT_NE(op.kron_factors(), nullptr);
  EXPECT_EQ(op.kron_factors()->size(), 2u);
  EXPECT_EQ(KronOperator(dims, AllOnes{}).kron_factors(), nullptr);
}

TEST(KronOperator, AllOnesAndRankOneEntries) {
  Dims dims(2, 2);
  const DenseMatrix ones = KronOperator(dims, AllOnes{}).materialize();
  EXPECT_EQ(max_abs_difference(ones, DenseMatrix::ones(4)), 0.0);
  const DenseMatrix outer = KronOperator(dims, RankOne{{1, 2, 3, 4}}).materialize();
  EXPECT_EQ(outer.real(1, 2), 6.0);
  EXPECT_EQ(outer.trace().real(), 30.0);
}

TEST(KronOperator, QueryCountIsExactUnderConcurrency) {
  Dims dims(2, 2);
  KronOperator op(dims, AllOnes{});
  KronQueryVector q = KronQueryVector::real(dims, {{1, 1}, {1, 1}});
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 250; ++i) {
        op.apply(q);
      }
    });
  }
  threads.clear();
  EXPECT_EQ(op.query_count(), 1000u);
  op.reset_query_count();
  EXPECT_EQ(op.query_count(), 0u);
}

TEST(KronOperator, RejectsMismatchedShapes) {
  Dims dims(2, 2);
  EXPECT_THROW(KronOperator(dims, ExplicitDense{DenseMatrix(3)}), std::invalid_argument);
  EXPECT_THROW(KronOperator(dims, KronFactors{{DenseMatrix(2)}}), std::invalid_argument);
  EXPECT_THROW(KronOperator(dims, RankOne{{1, 2, 3}}), std::invalid_argument);
  KronOperator op(dims, AllOnes{});
  EXPECT_THROW(op.apply(KronQueryVector::real(Dims(3, 2), {{1, 1, 1}, {1, 1, 1}})), std::invalid_argument);
}

TEST(KronOperator, MaterializeRespectsCap) {
  ASSERT_EQ(setenv("KRONTRACE_BUDGET_DK", "64", 1), 0);
  KronOperator op(Dims(2, 7, 1u << 20), AllOnes{});
  EXPECT_THROW(op.materialize(), BudgetExceeded);
  ASSERT_EQ(unsetenv("KRONTRACE_BUDGET_DK"), 0);
}

TEST(MixedProduct, MatchesProductOfKroneckers) {
  std::vector<DenseMatrix> a = {random_real(2, 20), random_real(2, 21)};
  std::vector<DenseMatrix> b = {random_real(2, 22), random_real(2, 23)};
  Dims dims(2, 2);
  const DenseMatrix lhs = KronOperator(dims, mixed_product(a, b)).materialize();
  const DenseMatrix rhs = kron_all(a) * kron_all(b);
  EXPECT_LT(max_abs_difference(lhs, rhs), 1e-12);
}

TEST(Wishart, FactorIsSymmetricPsdAndDeterministic) {
  const DenseMatrix w = wishart_factor(3, 5, 2);
  EXPECT_EQ(max_abs_difference(w, w.transpose()), 0.0);
  EXPECT_GT(w.trace().real(), 0.0);
  EXPECT_EQ(max_abs_difference(w, wishart_factor(3, 5, 2)), 0.0);
  EXPECT_GT(max_abs_difference(w, wishart_factor(3, 5, 3)), 0.0);
}

}  // namespace
}  // namespace krontrace
