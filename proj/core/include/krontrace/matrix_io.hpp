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

// Dense matrix files.
//
// Binary layout (all little-endian):
//   u64 d, u64 k, u64 field (0 = real, 1 = complex)
//   then d^k * d^k row-major entries, one f64 each for real matrices and
//   (re, im) f64 pairs for complex ones.
//
// Kronecker factor files use the same header followed by k consecutive
// row-major d x d blocks.
//
// CSV: one matrix row per line, comma separated, real matrices only. Factor
// CSV files separate the k blocks with blank lines.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "krontrace/kron_core.hpp"

namespace krontrace {

struct MatrixFile {
  std::size_t d = 0;
  std::size_t k = 0;
  DenseMatrix matrix;
};

void write_matrix_binary(std::ostream& out, const DenseMatrix& m, const Dims& dims);
void write_matrix_binary(const std::filesystem::path& path, const DenseMatrix& m, const Dims& dims);
MatrixFile read_matrix_binary(std::istream& in);

void write_matrix_csv(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_matrix_csv(std::istream& in);

/// Loads either format, choosing CSV by a ".csv" extension. CSV files carry
/// no header, so `d` and `k` come from `expected` (required for CSV).
MatrixFile read_matrix_file(const std::filesystem::path& path, std::optional<Dims> expected = std::nullopt);

void write_factors_binary(const std::filesystem::path& path, std::span<const DenseMatrix> factors);
std::vector<DenseMatrix> read_factors_file(const std::filesystem::path& path, std::optional<Dims> expected = std::nullopt);

}  // namespace krontrace
