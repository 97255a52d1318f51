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

#include "krontrace/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace krontrace {

std::string_view distribution_name(QueryDistribution dist) {
  switch (dist) {
    case QueryDistribution::RealRademacher:
      return "real_rademacher";
    case QueryDistribution::RealGaussian:
      return "real_gaussian";
    case QueryDistribution::ComplexRademacher:
      return "complex_rademacher";
    case QueryDistribution::ComplexGaussian:
      return "complex_gaussian";
  }
  throw std::logic_error("unreachable QueryDistribution");
}

QueryDistribution parse_distribution(std::string_view name) {
  for (QueryDistribution dist : kAllDistributions) {
    if (distribution_name(dist) == name) {
      return dist;
    }
  }
  throw std::invalid_argument("unknown distribution '" + std::string(name) +
                              "' (expected real_rademacher|real_gaussian|complex_rademacher|complex_gaussian)");
}

ScalarField distribution_field(QueryDistribution dist) {
  return dist == QueryDistribution::RealRademacher || dist == QueryDistribution::RealGaussian
             ? ScalarField::Real
             : ScalarField::Complex;
}

bool is_gaussian(QueryDistribution dist) {
  return dist == QueryDistribution::RealGaussian || dist == QueryDistribution::ComplexGaussian;
}

KronQueryVector sample_query(QueryDistribution dist, const Dims& dims, RngStream& rng) {
  std::vector<Vector> factors(dims.k(), Vector(dims.d()));
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (Vector& f : factors) {
    for (Complex& z : f) {
      switch (dist) {
        case QueryDistribution::RealRademacher:
          z = rng.rademacher();
          break;
        case QueryDistribution::RealGaussian:
          z = rng.normal();
          break;
        case QueryDistribution::ComplexRademacher: {
          double r = rng.rademacher();
          double m = rng.rademacher();
          z = Complex(r * inv_sqrt2, m * inv_sqrt2);
          break;
        }
        case QueryDistribution::ComplexGaussian: {
          double r = rng.normal();
          double m = rng.normal();
          z = Complex(r * inv_sqrt2, m * inv_sqrt2);
          break;
        }
      }
    }
  }
  return KronQueryVector(dims, std::move(factors), distribution_field(dist));
}

Complex quadratic_form(const KronOperator& op, const KronQueryVector& q) {
  Vector response = op.apply(q);
  Vector x = expand_query(q);
  Complex sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += std::conj(x[i]) * response[i];
  }
  return sum;
}

double TraceEstimate::magnitude() const {
  return std::abs(Complex(value, imag_value));
}

TraceEstimate kron_hutchinson(const KronOperator& op, QueryDistribution dist, std::size_t samples,
                              std::uint64_t seed, const HutchinsonOptions& options) {
  if (samples == 0) {
    throw std::invalid_argument("kron_hutchinson: need at least one sample");
  }
  std::vector<Complex> values(samples);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      RngStream rng(seed, options.first_stream + j);
      values[j] = quadratic_form(op, sample_query(dist, op.dims(), rng));
    }
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(options.workers, static_cast<unsigned>(samples)));
  if (workers == 1) {
    run_range(0, samples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (samples + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(samples, begin + chunk);
      if (begin < end) {
        pool.emplace_back(run_range, begin, end);
      }
    }
  }

  TraceEstimate est;
  Complex sum = 0.0;
  for (Complex v : values) {
    sum += v;
    est.max_abs_imag = std::max(est.max_abs_imag, std::abs(v.imag()));
  }
  Complex mean = sum / static_cast<double>(samples);
  est.value = mean.real();
  est.imag_value = mean.imag();
  est.num_samples = samples;
  est.queries_used = samples;
  if (options.keep_samples) {
    est.per_sample = std::move(values);
  }
  return est;
}

double rank_one_exact_trace(const KronOperator& op, RngStream& rng) {
  KronQueryVector q = sample_query(QueryDistribution::RealGaussian, op.dims(), rng);
  Vector response = op.apply(q);
  Vector x = expand_query(q);
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    numerator += std::norm(response[i]);
    denominator += x[i].real() * response[i].real();
  }
  if (std::abs(denominator) <= 1e-12 * std::sqrt(numerator)) {
    throw DegenerateQuery("rank_one_exact_trace: query orthogonal to the range; redraw");
  }
  return numerator / denominator;
}

double KronRecovery::trace() const {
  double product = 1.0;
  for (const DenseMatrix& f : factors) {
    product *= f.trace().real();
  }
  return product;
}

DenseMatrix KronRecovery::expand() const {
  return kron_all(factors);
}

KronRecovery exact_kron_recovery(const KronOperator& op, RngStream& rng) {
  const Dims& dims = op.dims();
  const std::size_t d = dims.d();
  const std::size_t k = dims.k();

  std::vector<Vector> base(k, Vector(d));
  for (Vector& g : base) {
    for (Complex& z : g) {
      z = rng.normal();
    }
  }
  const KronQueryVector x_bar(dims, base, ScalarField::Real);
  const Vector x_bar_flat = expand_query(x_bar);
  const Vector y = op.apply(x_bar);

  KronRecovery result;
  result.queries_used = 1;
  double gamma = 0.0;
  double y_norm_sq = 0.0;
  double x_norm_sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    gamma += x_bar_flat[i].real() * y[i].real();
    y_norm_sq += std::norm(y[i]);
    x_norm_sq += std::norm(x_bar_flat[i]);
  }
  result.gamma = gamma;
  if (std::abs(gamma) <= 1e-12 * std::sqrt(y_norm_sq) * std::sqrt(x_norm_sq)) {
    result.degenerate = true;
    result.factors.assign(k, DenseMatrix(d));
    return result;
  }

  result.factors.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<Vector> flat_queries;
    std::vector<Vector> responses;
    flat_queries.reserve(d);
    responses.reserve(d);
    for (std::size_t m = 0; m < d; ++m) {
      std::vector<Vector> factors = base;
      factors[i].assign(d, 0.0);
      factors[i][m] = 1.0;
      KronQueryVector q(dims, std::move(factors), ScalarField::Real);
      responses.push_back(op.apply(q));
      flat_queries.push_back(expand_query(q));
      ++result.queries_used;
    }
    std::vector<Complex> c(d * d);
    for (std::size_t m = 0; m < d; ++m) {
      for (std::size_t n = 0; n < d; ++n) {
        // x^(m)T (A x^(n)): the stored response for n dotted with query m.
        double sum = 0.0;
        for (std::size_t t = 0; t < flat_queries[m].size(); ++t) {
          sum += flat_queries[m][t].real() * responses[n][t].real();
        }
        c[m * d + n] = sum;
      }
    }
    result.factors.emplace_back(d, ScalarField::Real, std::move(c));
  }
  if (k > 1) {
    result.factors.front() = result.factors.front().scaled(std::pow(gamma, -static_cast<double>(k - 1)));
  }
  return result;
}

double diagonal_trace(const KronOperator& op) {
  const Dims& dims = op.dims();
  double sum = 0.0;
  for (std::size_t index = 0; index < dims.total(); ++index) {
    Vector response = op.apply(KronQueryVector::basis(dims, index));
    sum += response[index].real();
  }
  return sum;
}

ComplexQuerySimulation simulate_complex_query(const KronOperator& op, const KronQueryVector& q) {
  const Dims& dims = op.dims();
  const std::size_t k = dims.k();
  if (k >= 63) {
    throw BudgetExceeded("simulate_complex_query: 2^k real queries");
  }
  std::vector<Vector> re(k);
  std::vector<Vector> im(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (Complex z : q.factor(i)) {
      re[i].push_back(z.real());
      im[i].push_back(z.imag());
    }
  }
  static constexpr Complex kPowersOfI[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

  ComplexQuerySimulation sim;
  sim.response.assign(dims.total(), 0.0);
  const std::uint64_t patterns = std::uint64_t{1} << k;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    std::vector<Vector> factors(k);
    for (std::size_t i = 0; i < k; ++i) {
      factors[i] = ((mask >> i) & 1U) != 0 ? im[i] : re[i];
    }
    Vector part = op.apply(KronQueryVector(dims, std::move(factors), ScalarField::Real));
    ++sim.real_queries_used;
    Complex weight = kPowersOfI[std::popcount(mask) % 4];
    for (std::size_t t = 0; t < part.size(); ++t) {
      sim.response[t] += weight * part[t];
    }
  }
  return sim;
}

}  // namespace krontrace
