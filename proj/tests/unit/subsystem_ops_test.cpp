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


#include <vector>

#include <gtest/gtest.h>

#include "krontrace/subsystem_ops.hpp"
#include "reference.hpp"

namespace krontrace {
namespace {

std::vector<bool> flags(const SubsystemSet& s) {
  std::vector<bool> out(s.k());
  for (std::size_t i = 0; i < s.k(); ++i) {
    out[i] = s.contains(i + 1);
  }
  return out;
}

DenseMatrix counting(std::size_t side) {
  std::vector<double> e(side * side);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = static_cast<double>(i + 1);
  }
  return DenseMatrix::from_real(side, e);
}

TEST(SubsystemSet, MembershipAndComplement) {
  SubsystemSet s(4, {1, 3});
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.contains(1));
  EXPECT_FALSE(s.contains(2));
  EXPECT_EQ(s.complement().members(), (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ((s | SubsystemSet(4, {2})).members(), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(SubsystemSet::range(4, 2, 3).members(), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(SubsystemSet::range(4, 3, 2).size(), 0u);
  EXPECT_EQ(SubsystemSet::from_mask(3, 0b101).members(), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(SubsystemSet::all(3).size(), 3u);
  EXPECT_EQ(SubsystemSet::none(3).size(), 0u);
}

TEST(SubsystemSet, RejectsOutOfRangeMembers) {
  EXPECT_THROW(SubsystemSet(3, {0}), std::invalid_argument);
  EXPECT_THROW(SubsystemSet(3, {4}), std::invalid_argument);
}

TEST(PartialTrace, FirstFactorOfProduct) {
  const DenseMatrix b = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const DenseMatrix c = DenseMatrix::from_rows({{0, 1}, {1, 0}});
  const DenseMatrix got = partial_trace(kron(b, c), Dims(2, 2), SubsystemSet(2, {1}));
  EXPECT_EQ(max_abs_difference(got, DenseMatrix::from_rows({{0, 5}, {5, 0}})), 0.0);
}

TEST(PartialTrace, EmptyAndFullSets) {
  Dims dims(2, 2);
  const DenseMatrix a = counting(4);
  EXPECT_EQ(max_abs_difference(partial_trace(a, dims, SubsystemSet::none(2)), a), 0.0);
  const DenseMatrix full = partial_trace(DenseMatrix::identity(4), dims, SubsystemSet::all(2));
  ASSERT_EQ(full.side(), 1u);
  EXPECT_EQ(full.real(0, 0), 4.0);
}

TEST(PartialTrace, MatchesReferenceForEverySubset) {
  for (auto [d, k] : {std::pair<std::size_t, std::size_t>{2, 3}, {3, 2}, {2, 4}}) {
    Dims dims(d, k);
    const DenseMatrix a = ref::random_dense(dims.total(), 100 + d * 10 + k);
    const ref::Mat ra = ref::from_dense(a);
    for (std::uint64_t mask = 0; mask < (1u << k); ++mask) {
      const SubsystemSet s = SubsystemSet::from_mask(k, mask);
      const DenseMatrix want = ref::to_dense(ref::partial_trace(ra, d, k, flags(s)));
      EXPECT_LT(max_abs_difference(partial_trace(a, dims, s), want), 1e-12) << "d=" << d << " k=" << k
                                                                            << " mask=" << mask;
    }
  }
}

TEST(PartialTranspose, SwapsOffDiagonalBlocks) {
  const DenseMatrix got = partial_transpose(counting(4), Dims(2, 2), SubsystemSet(2, {1}));
  const DenseMatrix want =
      DenseMatrix::from_rows({{1, 2, 9, 10}, {5, 6, 13, 14}, {3, 4, 11, 12}, {7, 8, 15, 16}});
  EXPECT_EQ(max_abs_difference(got, want), 0.0);
}

TEST(PartialTranspose, EmptyFullAndSymmetricFactor) {
  Dims dims(2, 2);
  const DenseMatrix a = counting(4);
  EXPECT_EQ(max_abs_difference(partial_transpose(a, dims, SubsystemSet::none(2)), a), 0.0);
  EXPECT_EQ(max_abs_difference(partial_transpose(a, dims, SubsystemSet::all(2)), a.transpose()), 0.0);
  const DenseMatrix bc = kron(DenseMatrix::from_rows({{1, 2}, {3, 4}}), DenseMatrix::from_rows({{5, 6}, {6, 7}}));
  EXPECT_EQ(max_abs_difference(partial_transpose(bc, dims, SubsystemSet(2, {2})), bc), 0.0);
}

TEST(PartialTranspose, MatchesReferenceForEverySubset) {
  Dims dims(3, 3);
  const DenseMatrix a = ref::random_dense(27, 7);
  const ref::Mat ra = ref::from_dense(a);
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    const SubsystemSet s = SubsystemSet::from_mask(3, mask);
    const DenseMatrix want = ref::to_dense(ref::partial_transpose(ra, 3, 3, flags(s)));
    EXPECT_EQ(max_abs_difference(partial_transpose(a, dims, s), want), 0.0) << "mask=" << mask;
  }
}

TEST(AveragePartialTransposes, SingleEntrySpreadsOverFourPositions) {
  Dims dims(2, 2);
  DenseMatrix a(4);
  // Row digits (0,1) and column digits (1,0).
  a.set(1, 2, 1.0);
  const DenseMatrix bar = average_partial_transposes(a, dims);
  DenseMatrix want(4);
  // Swap nothing, subsystem 1, subsystem 2, both.
  want.set(1, 2, 0.25);
  want.set(3, 0, 0.25);
  want.set(0, 3, 0.25);
  want.set(2, 1, 0.25);
  EXPECT_EQ(max_abs_difference(bar, want), 0.0);
}

TEST(AveragePartialTransposes, SingleSubsystemIsSymmetrization) {
  const DenseMatrix a = ref::random_dense(3, 8);
  const DenseMatrix want = (a + a.transpose()).scaled(0.5);
  EXPECT_LT(max_abs_difference(average_partial_transposes(a, Dims(3, 1)), want), 1e-15);
}

TEST(AveragePartialTransposes, MatchesReferenceAndIsFixed) {
  Dims dims(2, 3);
  const DenseMatrix a = ref::random_dense(8, 9);
  const DenseMatrix bar = average_partial_transposes(a, dims);
  EXPECT_LT(max_abs_difference(bar, ref::to_dense(ref::transpose_average(ref::from_dense(a), 2, 3))), 1e-14);
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    EXPECT_LT(max_abs_difference(partial_transpose(bar, dims, SubsystemSet::from_mask(3, mask)), bar), 1e-15);
  }
  EXPECT_LT(max_abs_difference(average_partial_transposes(bar, dims), bar), 1e-15);
}

TEST(Pmrdm, ExamplesAndReference) {
  Dims dims(2, 2);
  const DenseMatrix a = ref::random_dense(4, 10);
  EXPECT_EQ(max_abs_difference(pmrdm(a, dims, PmrdmPrefix{}), a), 0.0);

  KronQueryVector ones = KronQueryVector::real(dims, {{1, 1}, {1, 1}});
  const DenseMatrix full = pmrdm(DenseMatrix::identity(4), dims, PmrdmPrefix::leading(ones, 2));
  ASSERT_EQ(full.side(), 1u);
  EXPECT_EQ(full.real(0, 0), 4.0);

  KronQueryVector q = KronQueryVector::real(dims, {{1, 2}, {3, 4}});
  const DenseMatrix five = pmrdm(DenseMatrix::identity(4), dims, PmrdmPrefix::leading(q, 1));
  EXPECT_EQ(max_abs_difference(five, DenseMatrix::identity(2).scaled(5.0)), 0.0);

  // Explicit (x_1 ⊗ I)^T A (x_1 ⊗ I).
  ref::Mat x(4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      x(r, c) = (r % 2 == c) ? (r < 2 ? 1.0 : 2.0) : 0.0;
    }
  }
  const ref::Mat ra = ref::from_dense(a);
  ref::Mat want(2);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
          want(i, j) += x(r, i) * ra(r, c) * x(c, j);
        }
      }
    }
  }
  EXPECT_LT(max_abs_difference(pmrdm(a, dims, PmrdmPrefix::leading(q, 1)), ref::to_dense(want)), 1e-12);
}

TEST(Pmrdm, RejectsWrongFactorLength) {
  PmrdmPrefix bad;
  bad.factors.push_back(Vector{Complex(1), Complex(2), Complex(3)});
  EXPECT_THROW(pmrdm(DenseMatrix::identity(4), Dims(2, 2), bad), std::invalid_argument);
}

TEST(FrobNorm, SumOfSquares) {
  EXPECT_EQ(frob_norm_sq(DenseMatrix::from_rows({{1, 2}, {3, 4}})), 30.0);
  DenseMatrix z(1, ScalarField::Complex, {Complex(3, 4)});
  EXPECT_EQ(frob_norm_sq(z), 25.0);
}

TEST(Psd, DetectsSignOfSpectrum) {
  EXPECT_TRUE(is_psd(DenseMatrix::identity(3)));
  EXPECT_TRUE(is_psd(DenseMatrix::ones(4)));
  EXPECT_FALSE(is_psd(DenseMatrix::from_rows({{1, 0}, {0, -1}})));
  EXPECT_FALSE(is_psd(DenseMatrix::from_rows({{1, 1}, {0, 1}})));
  EXPECT_NEAR(hermitian_min_eigenvalue(DenseMatrix::from_rows({{2, 1}, {1, 2}})), 1.0, 1e-14);
}

TEST(Validation, ShapeErrors) {
  EXPECT_THROW(partial_trace(DenseMatrix(3), Dims(2, 2), SubsystemSet(2, {1})), std::invalid_argument);
  EXPECT_THROW(partial_trace(DenseMatrix(4), Dims(2, 2), SubsystemSet(3, {1})), std::invalid_argument);
  EXPECT_THROW(partial_transpose(DenseMatrix(5), Dims(2, 2), SubsystemSet(2, {1})), std::invalid_argument);
}

}  // namespace
}  // namespace krontrace
