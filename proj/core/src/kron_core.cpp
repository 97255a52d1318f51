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

#include "krontrace/kron_core.hpp"

#include <algorithm>
#include <cstdlib>
#include <type_traits>
#include <limits>
#include <string>

#include "krontrace/rng.hpp"

namespace krontrace {

std::string_view field_name(ScalarField field) {
  return field == ScalarField::Real ? "real" : "complex";
}

ScalarField parse_field(std::string_view name) {
  if (name == "real") {
    return ScalarField::Real;
  }
  if (name == "complex") {
    return ScalarField::Complex;
  }
  throw std::invalid_argument("unknown scalar field '" + std::string(name) + "' (expected real|complex)");
}

std::size_t dimension_cap() {
  if (const char* env = std::getenv("KRONTRACE_BUDGET_DK"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    unsigned long long value = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0' || value == 0) {
      throw std::invalid_argument("KRONTRACE_BUDGET_DK must be a positive integer, got '" +
                                  std::string(env) + "'");
    }
    return static_cast<std::size_t>(value);
  }
  return kDefaultDimensionCap;
}

std::size_t checked_pow(std::size_t base, std::size_t exp) {
  std::size_t result = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && result > std::numeric_limits<std::size_t>::max() / base) {
      throw std::overflow_error("integer power overflows size_t");
    }
    result *= base;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dims

Dims::Dims(std::size_t d, std::size_t k) : Dims(d, k, dimension_cap()) {}

Dims::Dims(std::size_t d, std::size_t k, std::size_t cap) : d_(d), k_(k), total_(0) {
  if (d < 1 || k < 1) {
    throw std::invalid_argument("Dims requires d >= 1 and k >= 1");
  }
  try {
    total_ = checked_pow(d, k);
  } catch (const std::overflow_error&) {
    throw BudgetExceeded("d^k overflows");
  }
  if (total_ > cap) {
    throw BudgetExceeded("d^k = " + std::to_string(total_) + " exceeds the dimension cap " +
                         std::to_string(cap));
  }
}

std::size_t Dims::stride(std::size_t pos) const {
  if (pos >= k_) {
    throw std::out_of_range("digit position out of range");
  }
  return checked_pow(d_, k_ - 1 - pos);
}

std::vector<std::size_t> Dims::digits(std::size_t index) const {
  if (index >= total_) {
    throw std::out_of_range("global index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(total_) + ")");
  }
  std::vector<std::size_t> out(k_);
  for (std::size_t pos = k_; pos-- > 0;) {
    out[pos] = index % d_;
    index /= d_;
  }
  return out;
}

std::size_t Dims::index(std::span<const std::size_t> digits) const {
  if (digits.size() != k_) {
    throw std::invalid_argument("expected " + std::to_string(k_) + " digits");
  }
  std::size_t index = 0;
  for (std::size_t digit : digits) {
    if (digit >= d_) {
      throw std::out_of_range("digit out of range");
    }
    index = index * d_ + digit;
  }
  return index;
}

std::vector<std::size_t> index_digits(std::size_t index, const Dims& dims) {
  return dims.digits(index);
}

std::size_t digits_index(std::span<const std::size_t> digits, const Dims& dims) {
  return dims.index(digits);
}

// ---------------------------------------------------------------------------
// DenseMatrix

namespace {

bool all_real(std::span<const Complex> values) {
  return std::all_of(values.begin(), values.end(), [](Complex z) { return z.imag() == 0.0; });
}

ScalarField join(ScalarField a, ScalarField b) {
  return (a == ScalarField::Complex || b == ScalarField::Complex) ? ScalarField::Complex
                                                                   : ScalarField::Real;
}

// Result field of an arithmetic op: stay Real only if every entry is real.
ScalarField settle(ScalarField hint, std::span<const Complex> values) {
  return hint == ScalarField::Real || all_real(values) ? ScalarField::Real : ScalarField::Complex;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t side, ScalarField field)
    : side_(side), field_(field), entries_(side * side) {}

DenseMatrix::DenseMatrix(std::size_t side, ScalarField field, std::vector<Complex> entries)
    : side_(side), field_(field), entries_(std::move(entries)) {
  if (entries_.size() != side * side) {
    throw std::invalid_argument("DenseMatrix: side^2 = " + std::to_string(side * side) +
                                " but got " + std::to_string(entries_.size()) + " entries");
  }
  if (field_ == ScalarField::Real && !all_real(entries_)) {
    throw std::invalid_argument("DenseMatrix: real matrix with nonzero imaginary part");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t side) {
  DenseMatrix m(side);
  for (std::size_t i = 0; i < side; ++i) {
    m.entries_[i * side + i] = 1.0;
  }
  return m;
}

DenseMatrix DenseMatrix::ones(std::size_t side) {
  return DenseMatrix(side, ScalarField::Real, std::vector<Complex>(side * side, 1.0));
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t side = rows.size();
  std::vector<Complex> entries;
  entries.reserve(side * side);
  for (const auto& row : rows) {
    if (row.size() != side) {
      throw std::invalid_argument("from_rows: matrix must be square");
    }
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return DenseMatrix(side, ScalarField::Real, std::move(entries));
}

DenseMatrix DenseMatrix::from_real(std::size_t side, std::span<const double> entries) {
  return DenseMatrix(side, ScalarField::Real, std::vector<Complex>(entries.begin(), entries.end()));
}

void DenseMatrix::set(std::size_t row, std::size_t col, Complex value) {
  if (row >= side_ || col >= side_) {
    throw std::out_of_range("DenseMatrix::set out of range");
  }
  if (field_ == ScalarField::Real && value.imag() != 0.0) {
    throw std::invalid_argument("DenseMatrix::set: complex value in a real matrix");
  }
  entries_[row * side_ + col] = value;
}

Complex DenseMatrix::trace() const {
  Complex sum = 0.0;
  for (std::size_t i = 0; i < side_; ++i) {
    sum += entries_[i * side_ + i];
  }
  return sum;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix out(side_, field_);
  for (std::size_t i = 0; i < side_; ++i) {
    for (std::size_t j = 0; j < side_; ++j) {
      out.entries_[j * side_ + i] = entries_[i * side_ + j];
    }
  }
  return out;
}

DenseMatrix DenseMatrix::scaled(Complex factor) const {
  std::vector<Complex> out(entries_.size());
  std::transform(entries_.begin(), entries_.end(), out.begin(), [&](Complex z) { return z * factor; });
  ScalarField field = settle(factor.imag() == 0.0 ? field_ : ScalarField::Complex, out);
  return DenseMatrix(side_, field, std::move(out));
}

Vector DenseMatrix::multiply(std::span<const Complex> v) const {
  if (v.size() != side_) {
    throw std::invalid_argument("DenseMatrix::multiply: dimension mismatch");
  }
  Vector out(side_);
  for (std::size_t i = 0; i < side_; ++i) {
    Complex sum = 0.0;
    const Complex* row = &entries_[i * side_];
    for (std::size_t j = 0; j < side_; ++j) {
      sum += row[j] * v[j];
    }
    out[i] = sum;
  }
  return out;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.side_ != b.side_) {
    throw std::invalid_argument("matrix sum: side mismatch");
  }
  std::vector<Complex> out(a.entries_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.entries_[i] + b.entries_[i];
  }
  return DenseMatrix(a.side_, settle(join(a.field_, b.field_), out), std::move(out));
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.side_ != b.side_) {
    throw std::invalid_argument("matrix difference: side mismatch");
  }
  std::vector<Complex> out(a.entries_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.entries_[i] - b.entries_[i];
  }
  return DenseMatrix(a.side_, settle(join(a.field_, b.field_), out), std::move(out));
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.side_ != b.side_) {
    throw std::invalid_argument("matrix product: side mismatch");
  }
  const std::size_t n = a.side_;
  std::vector<Complex> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      Complex ail = a.entries_[i * n + l];
      if (ail == Complex(0.0)) {
        continue;
      }
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += ail * b.entries_[l * n + j];
      }
    }
  }
  return DenseMatrix(n, settle(join(a.field_, b.field_), out), std::move(out));
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t na = a.side();
  const std::size_t nb = b.side();
  const std::size_t n = na * nb;
  std::vector<Complex> out(n * n);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      Complex aij = a(i, j);
      for (std::size_t p = 0; p < nb; ++p) {
        for (std::size_t q = 0; q < nb; ++q) {
          out[(i * nb + p) * n + (j * nb + q)] = aij * b(p, q);
        }
      }
    }
  }
  return DenseMatrix(n, settle(join(a.field(), b.field()), out), std::move(out));
}

Vector kron(std::span<const Complex> a, std::span<const Complex> b) {
  Vector out;
  out.reserve(a.size() * b.size());
  for (Complex x : a) {
    for (Complex y : b) {
      out.push_back(x * y);
    }
  }
  return out;
}

DenseMatrix kron_all(std::span<const DenseMatrix> factors) {
  if (factors.empty()) {
    return DenseMatrix::identity(1);
  }
  DenseMatrix out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    out = kron(out, factors[i]);
  }
  return out;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.side() != b.side()) {
    throw std::invalid_argument("max_abs_difference: side mismatch");
  }
  return max_abs_difference(a.entries(), b.entries());
}

double max_abs_difference(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("max_abs_difference: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// KronQueryVector

namespace {

bool factors_real(const std::vector<Vector>& factors) {
  return std::all_of(factors.begin(), factors.end(), [](const Vector& f) { return all_real(f); });
}

}  // namespace

KronQueryVector::KronQueryVector(Dims dims, std::vector<Vector> factors)
    : KronQueryVector(dims, factors, factors_real(factors) ? ScalarField::Real : ScalarField::Complex) {}

KronQueryVector::KronQueryVector(Dims dims, std::vector<Vector> factors, ScalarField field)
    : dims_(dims), field_(field), factors_(std::move(factors)) {
  if (factors_.size() != dims_.k()) {
    throw std::invalid_argument("KronQueryVector: expected " + std::to_string(dims_.k()) +
                                " factors, got " + std::to_string(factors_.size()));
  }
  for (const Vector& f : factors_) {
    if (f.size() != dims_.d()) {
      throw std::invalid_argument("KronQueryVector: factor length must equal d = " +
                                  std::to_string(dims_.d()));
    }
  }
  if (field_ == ScalarField::Real && !factors_real(factors_)) {
    throw std::invalid_argument("KronQueryVector: real query with complex entries");
  }
}

KronQueryVector KronQueryVector::real(Dims dims, const std::vector<std::vector<double>>& factors) {
  std::vector<Vector> converted;
  converted.reserve(factors.size());
  for (const auto& f : factors) {
    converted.emplace_back(f.begin(), f.end());
  }
  return KronQueryVector(dims, std::move(converted), ScalarField::Real);
}

KronQueryVector KronQueryVector::basis(const Dims& dims, std::size_t index) {
  std::vector<Vector> factors(dims.k(), Vector(dims.d(), 0.0));
  std::vector<std::size_t> digits = dims.digits(index);
  for (std::size_t pos = 0; pos < dims.k(); ++pos) {
    factors[pos][digits[pos]] = 1.0;
  }
  return KronQueryVector(dims, std::move(factors), ScalarField::Real);
}

Vector expand_query(const KronQueryVector& q) {
  Vector out{1.0};
  for (const Vector& f : q.factors()) {
    out = kron(out, f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// KronOperator

namespace {

void require_real(const DenseMatrix& m, const char* what) {
  if (m.field() != ScalarField::Real) {
    throw std::invalid_argument(std::string(what) + ": operators in scope are real matrices");
  }
}

void check_factors(const Dims& dims, const std::vector<DenseMatrix>& factors) {
  if (factors.size() != dims.k()) {
    throw std::invalid_argument("KronFactors: expected " + std::to_string(dims.k()) + " factors, got " +
                                std::to_string(factors.size()));
  }
  for (const DenseMatrix& f : factors) {
    if (f.side() != dims.d()) {
      throw std::invalid_argument("KronFactors: factor side must equal d = " + std::to_string(dims.d()));
    }
    require_real(f, "KronFactors");
  }
}

Complex dot_plain(std::span<const Complex> a, std::span<const Complex> b) {
  Complex sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += a[i] * b[i];
  }
  return sum;
}

}  // namespace

DenseMatrix wishart_factor(std::size_t d, std::uint64_t seed, std::uint64_t stream) {
  RngStream rng(seed, stream);
  std::vector<double> g(d * d);
  for (double& x : g) {
    x = rng.normal();
  }
  std::vector<Complex> w(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        sum += g[r * d + i] * g[r * d + j];
      }
      w[i * d + j] = sum;
    }
  }
  return DenseMatrix(d, ScalarField::Real, std::move(w));
}

KronOperator::KronOperator(Dims dims, Representation representation)
    : dims_(dims), representation_(std::move(representation)) {
  std::visit(
      [&](const auto& rep) {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExplicitDense>) {
          if (rep.matrix.side() != dims_.total()) {
            throw std::invalid_argument("ExplicitDense: side must equal d^k");
          }
          require_real(rep.matrix, "ExplicitDense");
        } else if constexpr (std::is_same_v<T, KronFactors>) {
          check_factors(dims_, rep.factors);
        } else if constexpr (std::is_same_v<T, SumOfKron>) {
          for (const KronFactors& term : rep.terms) {
            check_factors(dims_, term.factors);
          }
        } else if constexpr (std::is_same_v<T, RankOne>) {
          if (rep.g.size() != dims_.total()) {
            throw std::invalid_argument("RankOne: g must have length d^k");
          }
        } else if constexpr (std::is_same_v<T, WishartKronSeed>) {
          wishart_factors_.reserve(dims_.k());
          for (std::size_t i = 0; i < dims_.k(); ++i) {
            wishart_factors_.push_back(wishart_factor(dims_.d(), rep.seed, i));
          }
        }
      },
      representation_);
}

KronOperator::KronOperator(const KronOperator& other)
    : dims_(other.dims_),
      representation_(other.representation_),
      wishart_factors_(other.wishart_factors_),
      queries_(other.query_count()) {}

KronOperator& KronOperator::operator=(const KronOperator& other) {
  if (this != &other) {
    dims_ = other.dims_;
    representation_ = other.representation_;
    wishart_factors_ = other.wishart_factors_;
    queries_.store(other.query_count(), std::memory_order_relaxed);
  }
  return *this;
}

KronOperator::KronOperator(KronOperator&& other) noexcept
    : dims_(other.dims_),
      representation_(std::move(other.representation_)),
      wishart_factors_(std::move(other.wishart_factors_)),
      queries_(other.query_count()) {}

KronOperator& KronOperator::operator=(KronOperator&& other) noexcept {
  if (this != &other) {
    dims_ = other.dims_;
    representation_ = std::move(other.representation_);
    wishart_factors_ = std::move(other.wishart_factors_);
    queries_.store(other.query_count(), std::memory_order_relaxed);
  }
  return *this;
}

std::string_view KronOperator::kind() const {
  return std::visit(
      [](const auto& rep) -> std::string_view {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExplicitDense>) {
          return "explicit_dense";
        } else if constexpr (std::is_same_v<T, KronFactors>) {
          return "kron_factors";
        } else if constexpr (std::is_same_v<T, SumOfKron>) {
          return "sum_of_kron";
        } else if constexpr (std::is_same_v<T, RankOne>) {
          return "rank_one";
        } else if constexpr (std::is_same_v<T, AllOnes>) {
          return "all_ones";
        } else {
          return "wishart_kron";
        }
      },
      representation_);
}

const std::vector<DenseMatrix>* KronOperator::kron_factors() const {
  if (const auto* f = std::get_if<KronFactors>(&representation_)) {
    return &f->factors;
  }
  if (std::holds_alternative<WishartKronSeed>(representation_)) {
    return &wishart_factors_;
  }
  return nullptr;
}

Vector KronOperator::apply_kron(const std::vector<DenseMatrix>& factors, const KronQueryVector& q) const {
  Vector out{1.0};
  for (std::size_t i = 0; i < factors.size(); ++i) {
    out = kron(out, factors[i].multiply(q.factor(i)));
  }
  return out;
}

Vector KronOperator::apply(const KronQueryVector& q) const {
  if (!(q.dims() == dims_)) {
    throw std::invalid_argument("apply: query dims (d=" + std::to_string(q.dims().d()) +
                                ", k=" + std::to_string(q.dims().k()) + ") do not match operator");
  }
  queries_.fetch_add(1, std::memory_order_relaxed);
  return std::visit(
      [&](const auto& rep) -> Vector {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExplicitDense>) {
          return rep.matrix.multiply(expand_query(q));
        } else if constexpr (std::is_same_v<T, KronFactors>) {
          return apply_kron(rep.factors, q);
        } else if constexpr (std::is_same_v<T, SumOfKron>) {
          Vector out(dims_.total(), 0.0);
          for (const KronFactors& term : rep.terms) {
            Vector part = apply_kron(term.factors, q);
            for (std::size_t i = 0; i < out.size(); ++i) {
              out[i] += part[i];
            }
          }
          return out;
        } else if constexpr (std::is_same_v<T, RankOne>) {
          Vector x = expand_query(q);
          Vector g(rep.g.begin(), rep.g.end());
          Complex projection = dot_plain(g, x);
          for (Complex& gi : g) {
            gi *= projection;
          }
          return g;
        } else if constexpr (std::is_same_v<T, AllOnes>) {
          // (⊗ ee^T) x = Π_i (e^T x_i) · e
          Complex product = 1.0;
          for (const Vector& f : q.factors()) {
            Complex sum = 0.0;
            for (Complex z : f) {
              sum += z;
            }
            product *= sum;
          }
          return Vector(dims_.total(), product);
        } else {
          return apply_kron(wishart_factors_, q);
        }
      },
      representation_);
}

DenseMatrix KronOperator::materialize() const {
  if (dims_.total() > dimension_cap()) {
    throw BudgetExceeded("materialize: D = " + std::to_string(dims_.total()) +
                         " exceeds the dimension cap " + std::to_string(dimension_cap()));
  }
  return std::visit(
      [&](const auto& rep) -> DenseMatrix {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExplicitDense>) {
          return rep.matrix;
        } else if constexpr (std::is_same_v<T, KronFactors>) {
          return kron_all(rep.factors);
        } else if constexpr (std::is_same_v<T, SumOfKron>) {
          DenseMatrix out(dims_.total());
          for (const KronFactors& term : rep.terms) {
            out = out + kron_all(term.factors);
          }
          return out;
        } else if constexpr (std::is_same_v<T, RankOne>) {
          const std::size_t n = rep.g.size();
          std::vector<Complex> entries(n * n);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              entries[i * n + j] = rep.g[i] * rep.g[j];
            }
          }
          return DenseMatrix(n, ScalarField::Real, std::move(entries));
        } else if constexpr (std::is_same_v<T, AllOnes>) {
          return DenseMatrix::ones(dims_.total());
        } else {
          return kron_all(wishart_factors_);
        }
      },
      representation_);
}

KronFactors mixed_product(std::span<const DenseMatrix> a, std::span<const DenseMatrix> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("mixed_product: factor lists differ in length");
  }
  KronFactors out;
  out.factors.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].side() != b[i].side()) {
      throw std::invalid_argument("mixed_product: factor " + std::to_string(i + 1) + " shapes do not conform");
    }
    out.factors.push_back(a[i] * b[i]);
  }
  return out;
}

}  // namespace krontrace
