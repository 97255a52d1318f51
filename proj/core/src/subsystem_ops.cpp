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

#include "krontrace/subsystem_ops.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <string>

namespace krontrace {

// ---------------------------------------------------------------------------
// SubsystemSet

namespace {

void check_k(std::size_t k) {
  if (k < 1 || k > 63) {
    throw std::invalid_argument("SubsystemSet: k must lie in [1, 63]");
  }
}

std::uint64_t full_mask(std::size_t k) {
  return (std::uint64_t{1} << k) - 1;
}

}  // namespace

SubsystemSet::SubsystemSet(std::size_t k, std::uint64_t mask, int) : k_(k), mask_(mask) {}

SubsystemSet::SubsystemSet(std::size_t k, std::initializer_list<std::size_t> members)
    : SubsystemSet(k, std::span<const std::size_t>(members.begin(), members.size())) {}

SubsystemSet::SubsystemSet(std::size_t k, std::span<const std::size_t> members) : k_(k), mask_(0) {
  check_k(k);
  for (std::size_t m : members) {
    if (m < 1 || m > k) {
      throw std::invalid_argument("SubsystemSet: subsystem " + std::to_string(m) + " is not in {1.." +
                                  std::to_string(k) + "}");
    }
    mask_ |= std::uint64_t{1} << (m - 1);
  }
}

SubsystemSet SubsystemSet::none(std::size_t k) {
  check_k(k);
  return SubsystemSet(k, std::uint64_t{0}, 0);
}

SubsystemSet SubsystemSet::all(std::size_t k) {
  check_k(k);
  return SubsystemSet(k, full_mask(k), 0);
}

SubsystemSet SubsystemSet::range(std::size_t k, std::size_t first, std::size_t last) {
  check_k(k);
  std::uint64_t mask = 0;
  for (std::size_t m = first; m <= last; ++m) {
    if (m < 1 || m > k) {
      throw std::invalid_argument("SubsystemSet::range out of {1..k}");
    }
    mask |= std::uint64_t{1} << (m - 1);
  }
  return SubsystemSet(k, mask, 0);
}

SubsystemSet SubsystemSet::from_mask(std::size_t k, std::uint64_t mask) {
  check_k(k);
  if ((mask & ~full_mask(k)) != 0) {
    throw std::invalid_argument("SubsystemSet::from_mask: bits beyond k");
  }
  return SubsystemSet(k, mask, 0);
}

std::size_t SubsystemSet::size() const {
  return static_cast<std::size_t>(std::popcount(mask_));
}

bool SubsystemSet::contains(std::size_t subsystem) const {
  return subsystem >= 1 && subsystem <= k_ && ((mask_ >> (subsystem - 1)) & 1U) != 0;
}

std::vector<std::size_t> SubsystemSet::members() const {
  std::vector<std::size_t> out;
  for (std::size_t m = 1; m <= k_; ++m) {
    if (contains(m)) {
      out.push_back(m);
    }
  }
  return out;
}

SubsystemSet SubsystemSet::complement() const {
  return SubsystemSet(k_, full_mask(k_) & ~mask_, 0);
}

SubsystemSet operator|(const SubsystemSet& a, const SubsystemSet& b) {
  if (a.k_ != b.k_) {
    throw std::invalid_argument("SubsystemSet union: k mismatch");
  }
  return SubsystemSet(a.k_, a.mask_ | b.mask_, 0);
}

PmrdmPrefix PmrdmPrefix::leading(const KronQueryVector& q, std::size_t i) {
  if (i > q.dims().k()) {
    throw std::invalid_argument("PmrdmPrefix: i exceeds k");
  }
  return PmrdmPrefix{std::vector<Vector>(q.factors().begin(), q.factors().begin() + static_cast<std::ptrdiff_t>(i))};
}

// ---------------------------------------------------------------------------
// Index helpers

namespace {

void check_side(const DenseMatrix& a, const Dims& dims, const char* what) {
  if (a.side() != dims.total()) {
    throw std::invalid_argument(std::string(what) + ": matrix side " + std::to_string(a.side()) +
                                " does not equal d^k = " + std::to_string(dims.total()));
  }
}

void check_set(const SubsystemSet& s, const Dims& dims, const char* what) {
  if (s.k() != dims.k()) {
    throw std::invalid_argument(std::string(what) + ": subsystem set is over k=" + std::to_string(s.k()) +
                                " but the matrix has k=" + std::to_string(dims.k()));
  }
}

// Offsets Σ digit_p · stride_p for every assignment of digits to `positions`
// (0-based, ascending), enumerated with the first position most significant.
std::vector<std::size_t> digit_offsets(const Dims& dims, const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> offsets{0};
  for (std::size_t pos : positions) {
    std::size_t stride = dims.stride(pos);
    std::vector<std::size_t> next;
    next.reserve(offsets.size() * dims.d());
    for (std::size_t base : offsets) {
      for (std::size_t digit = 0; digit < dims.d(); ++digit) {
        next.push_back(base + digit * stride);
      }
    }
    offsets = std::move(next);
  }
  return offsets;
}

}  // namespace

DenseMatrix partial_trace(const DenseMatrix& a, const Dims& dims, const SubsystemSet& traced) {
  check_side(a, dims, "partial_trace");
  check_set(traced, dims, "partial_trace");

  std::vector<std::size_t> kept_pos;
  std::vector<std::size_t> traced_pos;
  for (std::size_t pos = 0; pos < dims.k(); ++pos) {
    (traced.contains(pos + 1) ? traced_pos : kept_pos).push_back(pos);
  }
  const std::vector<std::size_t> kept = digit_offsets(dims, kept_pos);
  const std::vector<std::size_t> summed = digit_offsets(dims, traced_pos);

  const std::size_t side = kept.size();
  std::vector<Complex> out(side * side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      Complex sum = 0.0;
      for (std::size_t t : summed) {
        sum += a(kept[r] + t, kept[c] + t);
      }
      out[r * side + c] = sum;
    }
  }
  return DenseMatrix(side, a.field(), std::move(out));
}

DenseMatrix partial_transpose(const DenseMatrix& a, const Dims& dims, const SubsystemSet& transposed) {
  check_side(a, dims, "partial_transpose");
  check_set(transposed, dims, "partial_transpose");

  const std::size_t n = dims.total();
  // part[I] is the contribution of the transposed digits to index I.
  std::vector<std::size_t> part(n, 0);
  for (std::size_t pos = 0; pos < dims.k(); ++pos) {
    if (!transposed.contains(pos + 1)) {
      continue;
    }
    std::size_t stride = dims.stride(pos);
    for (std::size_t i = 0; i < n; ++i) {
      part[i] += ((i / stride) % dims.d()) * stride;
    }
  }
  std::vector<Complex> out(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t src_r = r - part[r] + part[c];
      std::size_t src_c = c - part[c] + part[r];
      out[r * n + c] = a(src_r, src_c);
    }
  }
  return DenseMatrix(n, a.field(), std::move(out));
}

DenseMatrix average_partial_transposes(const DenseMatrix& a, const Dims& dims) {
  check_side(a, dims, "average_partial_transposes");
  if (dims.k() > kMaxSubsetK) {
    throw BudgetExceeded("average_partial_transposes: 2^k enumeration needs k <= " + std::to_string(kMaxSubsetK));
  }
  const std::uint64_t subsets = std::uint64_t{1} << dims.k();
  const std::size_t n = a.side();
  std::vector<Complex> sum(n * n);
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    DenseMatrix t = partial_transpose(a, dims, SubsystemSet::from_mask(dims.k(), mask));
    auto entries = t.entries();
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += entries[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(subsets);
  for (Complex& z : sum) {
    z *= scale;
  }
  return DenseMatrix(n, a.field(), std::move(sum));
}

DenseMatrix pmrdm(const DenseMatrix& a, const Dims& dims, const PmrdmPrefix& prefix) {
  check_side(a, dims, "pmrdm");
  const std::size_t i = prefix.size();
  if (i > dims.k()) {
    throw std::invalid_argument("pmrdm: prefix longer than k");
  }
  Vector x{1.0};
  for (const Vector& f : prefix.factors) {
    if (f.size() != dims.d()) {
      throw std::invalid_argument("pmrdm: prefix factor length must equal d = " + std::to_string(dims.d()));
    }
    x = kron(x, f);
  }
  const std::size_t rest = checked_pow(dims.d(), dims.k() - i);
  const std::size_t lead = x.size();
  std::vector<Complex> out(rest * rest);
  bool real = a.field() == ScalarField::Real;
  for (const Vector& f : prefix.factors) {
    for (Complex z : f) {
      real = real && z.imag() == 0.0;
    }
  }
  for (std::size_t r = 0; r < rest; ++r) {
    for (std::size_t c = 0; c < rest; ++c) {
      Complex sum = 0.0;
      for (std::size_t p = 0; p < lead; ++p) {
        if (x[p] == Complex(0.0)) {
          continue;
        }
        Complex row_sum = 0.0;
        for (std::size_t q = 0; q < lead; ++q) {
          row_sum += a(p * rest + r, q * rest + c) * x[q];
        }
        sum += x[p] * row_sum;
      }
      out[r * rest + c] = sum;
    }
  }
  return DenseMatrix(rest, real ? ScalarField::Real : ScalarField::Complex, std::move(out));
}

double frob_norm_sq(const DenseMatrix& a) {
  double sum = 0.0;
  for (Complex z : a.entries()) {
    sum += std::norm(z);
  }
  return sum;
}

double hermitian_min_eigenvalue(const DenseMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.side());
  if (n == 0) {
    throw std::invalid_argument("hermitian_min_eigenvalue: empty matrix");
  }
  if (a.field() == ScalarField::Real) {
    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        h(i, j) = 0.5 * (a.real(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) +
                         a.real(static_cast<std::size_t>(j), static_cast<std::size_t>(i)));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }
  Eigen::MatrixXcd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      h(i, j) = 0.5 * (a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) +
                       std::conj(a(static_cast<std::size_t>(j), static_cast<std::size_t>(i))));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool is_psd(const DenseMatrix& a, double rel_tol) {
  const double scale = std::sqrt(frob_norm_sq(a));
  if (scale == 0.0) {
    return true;
  }
  for (std::size_t i = 0; i < a.side(); ++i) {
    for (std::size_t j = i + 1; j < a.side(); ++j) {
      if (std::abs(a(i, j) - std::conj(a(j, i))) > rel_tol * scale) {
        return false;
      }
    }
  }
  return hermitian_min_eigenvalue(a) >= -rel_tol * scale;
}

}  // namespace krontrace
