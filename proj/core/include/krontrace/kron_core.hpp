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

#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

namespace krontrace {

using Complex = std::complex<double>;
using Vector = std::vector<Complex>;

enum class ScalarField : std::uint8_t { Real = 0, Complex = 1 };

std::string_view field_name(ScalarField field);
ScalarField parse_field(std::string_view name);

/// Thrown when a computation would exceed one of the desk-scale budgets
/// (dimension cap, subset enumeration, oracle term count).
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultDimensionCap = 4096;

/// Cap on D = d^k. Defaults to 4096; the KRONTRACE_BUDGET_DK environment
/// variable overrides it.
std::size_t dimension_cap();

/// base^exp, throwing std::overflow_error instead of wrapping.
std::size_t checked_pow(std::size_t base, std::size_t exp);

/// Shape of a k-fold tensor product of d-dimensional subsystems.
///
/// Flattening convention: subsystem 1 is the leftmost Kronecker factor and
/// the most significant base-d digit of a global index. Internally digit
/// positions are 0-based, so position 0 is subsystem 1.
class Dims {
 public:
  Dims(std::size_t d, std::size_t k);
  Dims(std::size_t d, std::size_t k, std::size_t cap);

  std::size_t d() const { return d_; }
  std::size_t k() const { return k_; }
  std::size_t total() const { return total_; }

  /// Place value of the digit at 0-based position `pos`, i.e. d^(k-1-pos).
  std::size_t stride(std::size_t pos) const;

  std::vector<std::size_t> digits(std::size_t index) const;
  std::size_t index(std::span<const std::size_t> digits) const;

  friend bool operator==(const Dims& a, const Dims& b) {
    return a.d_ == b.d_ && a.k_ == b.k_;
  }

 private:
  std::size_t d_;
  std::size_t k_;
  std::size_t total_;
};

std::vector<std::size_t> index_digits(std::size_t index, const Dims& dims);
std::size_t digits_index(std::span<const std::size_t> digits, const Dims& dims);

/// Square row-major matrix. Entries are stored as complex doubles; a Real
/// matrix keeps every imaginary part at exactly zero.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t side, ScalarField field = ScalarField::Real);
  DenseMatrix(std::size_t side, ScalarField field, std::vector<Complex> entries);

  static DenseMatrix identity(std::size_t side);
  static DenseMatrix ones(std::size_t side);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix from_real(std::size_t side, std::span<const double> entries);

  std::size_t side() const { return side_; }
  ScalarField field() const { return field_; }

  Complex operator()(std::size_t row, std::size_t col) const { return entries_[row * side_ + col]; }
  double real(std::size_t row, std::size_t col) const { return entries_[row * side_ + col].real(); }
  void set(std::size_t row, std::size_t col, Complex value);

  std::span<const Complex> entries() const { return entries_; }

  Complex trace() const;
  DenseMatrix transpose() const;
  DenseMatrix scaled(Complex factor) const;
  Vector multiply(std::span<const Complex> v) const;

  friend DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
  friend DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.side_ == b.side_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t side_ = 0;
  ScalarField field_ = ScalarField::Real;
  std::vector<Complex> entries_;
};

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);
Vector kron(std::span<const Complex> a, std::span<const Complex> b);
DenseMatrix kron_all(std::span<const DenseMatrix> factors);

/// Largest entrywise modulus of a - b.
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_difference(std::span<const Complex> a, std::span<const Complex> b);

/// x_1 ⊗ ... ⊗ x_k, the only query shape the oracle accepts.
class KronQueryVector {
 public:
  /// The field is Complex iff some factor entry has a nonzero imaginary part.
  KronQueryVector(Dims dims, std::vector<Vector> factors);
  KronQueryVector(Dims dims, std::vector<Vector> factors, ScalarField field);

  static KronQueryVector real(Dims dims, const std::vector<std::vector<double>>& factors);
  /// e_{digit_1} ⊗ ... ⊗ e_{digit_k} for the global basis index `index`.
  static KronQueryVector basis(const Dims& dims, std::size_t index);

  const Dims& dims() const { return dims_; }
  ScalarField field() const { return field_; }
  const std::vector<Vector>& factors() const { return factors_; }
  const Vector& factor(std::size_t pos) const { return factors_.at(pos); }

 private:
  Dims dims_;
  ScalarField field_;
  std::vector<Vector> factors_;
};

Vector expand_query(const KronQueryVector& q);

// Operator representations.
struct ExplicitDense {
  DenseMatrix matrix;
};
struct KronFactors {
  std::vector<DenseMatrix> factors;
};
struct SumOfKron {
  std::vector<KronFactors> terms;
};
struct RankOne {
  std::vector<double> g;
};
struct AllOnes {};
struct WishartKronSeed {
  std::uint64_t seed;
};

using Representation =
    std::variant<ExplicitDense, KronFactors, SumOfKron, RankOne, AllOnes, WishartKronSeed>;

/// A real matrix reachable only through Kronecker-structured products.
///
/// Every call to apply() counts as one oracle query, including complex
/// queries against the real matrix. The counter is atomic so concurrent
/// probing from several threads yields an exact final count.
class KronOperator {
 public:
  KronOperator(Dims dims, Representation representation);
  KronOperator(const KronOperator& other);
  KronOperator& operator=(const KronOperator& other);
  KronOperator(KronOperator&& other) noexcept;
  KronOperator& operator=(KronOperator&& other) noexcept;
  ~KronOperator() = default;

  const Dims& dims() const { return dims_; }
  const Representation& representation() const { return representation_; }
  std::string_view kind() const;

  Vector apply(const KronQueryVector& q) const;

  std::uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }
  void reset_query_count() { queries_.store(0, std::memory_order_relaxed); }

  /// Explicit D x D matrix. Throws BudgetExceeded when D is above dimension_cap().
  DenseMatrix materialize() const;

  /// The k factors when the operator is a single Kronecker product
  /// (KronFactors or WishartKronSeed), otherwise nullptr.
  const std::vector<DenseMatrix>* kron_factors() const;

 private:
  Vector apply_kron(const std::vector<DenseMatrix>& factors, const KronQueryVector& q) const;

  Dims dims_;
  Representation representation_;
  std::vector<DenseMatrix> wishart_factors_;
  mutable std::atomic<std::uint64_t> queries_{0};
};

/// Factor list {A_i B_i}; by the mixed-product property its Kronecker
/// product equals (⊗A_i)(⊗B_i).
KronFactors mixed_product(std::span<const DenseMatrix> a, std::span<const DenseMatrix> b);

/// The Wishart factor G^T G for stream `stream` of `seed`, G d x d standard normal.
DenseMatrix wishart_factor(std::size_t d, std::uint64_t seed, std::uint64_t stream);

}  // namespace krontrace
