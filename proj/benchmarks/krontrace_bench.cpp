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


#include <benchmark/benchmark.h>

#include <vector>

#include "krontrace/estimators.hpp"
#include "krontrace/kron_core.hpp"
#include "krontrace/rng.hpp"
#include "krontrace/subsystem_ops.hpp"
#include "krontrace/variance.hpp"

namespace {

using namespace krontrace;

DenseMatrix random_matrix(std::size_t side, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<double> e(side * side);
  for (double& x : e) {
    x = rng.normal();
  }
  return DenseMatrix::from_real(side, e);
}

// Same operator, dense versus factored matvec.
void BM_ApplyDense(benchmark::State& state) {
  Dims dims(2, static_cast<std::size_t>(state.range(0)));
  KronOperator op(dims, ExplicitDense{KronOperator(dims, WishartKronSeed{1}).materialize()});
  RngStream rng(2, 0);
  const KronQueryVector q = sample_query(QueryDistribution::RealGaussian, dims, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.apply(q));
  }
}
BENCHMARK(BM_ApplyDense)->DenseRange(4, 10, 2);

void BM_ApplyKronFactors(benchmark::State& state) {
  Dims dims(2, static_cast<std::size_t>(state.range(0)));
  KronOperator op(dims, WishartKronSeed{1});
  RngStream rng(2, 0);
  const KronQueryVector q = sample_query(QueryDistribution::RealGaussian, dims, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.apply(q));
  }
}
BENCHMARK(BM_ApplyKronFactors)->DenseRange(4, 12, 2);

void BM_PartialTrace(benchmark::State& state) {
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  Dims dims(2, k);
  const DenseMatrix a = random_matrix(dims.total(), 3);
  const SubsystemSet half = SubsystemSet::range(k, 1, k / 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(partial_trace(a, dims, half));
  }
}
BENCHMARK(BM_PartialTrace)->DenseRange(4, 10, 2);

void BM_ExactVariance(benchmark::State& state) {
  Dims dims(2, static_cast<std::size_t>(state.range(0)));
  const DenseMatrix a = random_matrix(dims.total(), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_variance(a, dims, ScalarField::Real));
  }
}
BENCHMARK(BM_ExactVariance)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

void BM_MomentOracle(benchmark::State& state) {
  Dims dims(2, static_cast<std::size_t>(state.range(0)));
  const DenseMatrix a = random_matrix(dims.total(), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(moment_oracle(a, dims, QueryDistribution::ComplexGaussian));
  }
}
BENCHMARK(BM_MomentOracle)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

void BM_Hutchinson(benchmark::State& state) {
  Dims dims(2, 8);
  KronOperator op(dims, WishartKronSeed{6});
  HutchinsonOptions options;
  options.workers = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kron_hutchinson(op, QueryDistribution::RealRademacher, 4096, 7, options));
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_Hutchinson)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
