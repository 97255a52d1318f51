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

// Partial traces, partial transposes and post-measurement reduced density
// matrices. All of them work by digit arithmetic on global indices; no
// identity Kronecker factors are ever built.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "krontrace/kron_core.hpp"

namespace krontrace {

/// Largest k for which 2^k subset enumeration is attempted.
inline constexpr std::size_t kMaxSubsetK = 16;

/// A subset of the subsystems {1, ..., k}. Members are 1-based, matching the
/// convention that subsystem 1 is the leftmost Kronecker factor.
class SubsystemSet {
 public:
  SubsystemSet(std::size_t k, std::initializer_list<std::size_t> members);
  SubsystemSet(std::size_t k, std::span<const std::size_t> members);

  static SubsystemSet none(std::size_t k);
  static SubsystemSet all(std::size_t k);
  /// {first, ..., last}; empty when first > last.
  static SubsystemSet range(std::size_t k, std::size_t first, std::size_t last);
  /// Bit i of `mask` selects subsystem i + 1.
  static SubsystemSet from_mask(std::size_t k, std::uint64_t mask);

  std::size_t k() const { return k_; }
  std::uint64_t mask() const { return mask_; }
  std::size_t size() const;
  bool empty() const { return mask_ == 0; }
  bool contains(std::size_t subsystem) const;
  /// Members in ascending order, 1-based.
  std::vector<std::size_t> members() const;
  SubsystemSet complement() const;

  friend SubsystemSet operator|(const SubsystemSet& a, const SubsystemSet& b);
  friend bool operator==(const SubsystemSet& a, const SubsystemSet& b) = default;

 private:
  SubsystemSet(std::size_t k, std::uint64_t mask, int);

  std::size_t k_;
  std::uint64_t mask_;
};

/// Measured leading factors x_1, ..., x_i of a Kronecker query.
struct PmrdmPrefix {
  std::vector<Vector> factors;

  static PmrdmPrefix leading(const KronQueryVector& q, std::size_t i);
  std::size_t size() const { return factors.size(); }
};

/// tr_S(A). The result has side d^(k-|S|) and the surviving subsystems keep
/// their relative order (renumbered 1..k-|S|).
DenseMatrix partial_trace(const DenseMatrix& a, const Dims& dims, const SubsystemSet& traced);

/// A^{T_V}: swaps row and column digits on every subsystem in V.
DenseMatrix partial_transpose(const DenseMatrix& a, const Dims& dims, const SubsystemSet& transposed);

/// Ā = 2^-k Σ_{V ⊆ [k]} A^{T_V}. Throws BudgetExceeded for k > kMaxSubsetK.
DenseMatrix average_partial_transposes(const DenseMatrix& a, const Dims& dims);

/// (x_{:i} ⊗ I)^T A (x_{:i} ⊗ I), side d^(k-i). Uses a plain transpose, no
/// conjugation. i = k gives the 1x1 matrix [x^T A x].
DenseMatrix pmrdm(const DenseMatrix& a, const Dims& dims, const PmrdmPrefix& prefix);

double frob_norm_sq(const DenseMatrix& a);

/// Smallest eigenvalue of the Hermitian part (A + A^H)/2.
double hermitian_min_eigenvalue(const DenseMatrix& a);

/// PSD test with a floor relative to ‖A‖_F: min eigenvalue of the Hermitian
/// part >= -rel_tol * ‖A‖_F, and A within rel_tol of Hermitian.
bool is_psd(const DenseMatrix& a, double rel_tol = 1e-10);

}  // namespace krontrace
