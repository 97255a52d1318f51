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

#include "krontrace/matrix_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace krontrace {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_needed(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = byteswap_if_needed(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = byteswap_if_needed(std::bit_cast<std::uint64_t>(v));
  out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error("matrix file truncated");
  }
  return byteswap_if_needed(v);
}

double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_u64(in));
}

struct Header {
  std::size_t d;
  std::size_t k;
  ScalarField field;
};

Header read_header(std::istream& in) {
  Header h{};
  h.d = get_u64(in);
  h.k = get_u64(in);
  std::uint64_t tag = get_u64(in);
  if (tag > 1) {
    throw std::runtime_error("matrix file: field tag must be 0 (real) or 1 (complex), got " + std::to_string(tag));
  }
  h.field = tag == 0 ? ScalarField::Real : ScalarField::Complex;
  return h;
}

void write_header(std::ostream& out, std::size_t d, std::size_t k, ScalarField field) {
  put_u64(out, d);
  put_u64(out, k);
  put_u64(out, field == ScalarField::Real ? 0 : 1);
}

void write_entries(std::ostream& out, const DenseMatrix& m) {
  for (Complex z : m.entries()) {
    put_f64(out, z.real());
    if (m.field() == ScalarField::Complex) {
      put_f64(out, z.imag());
    }
  }
}

DenseMatrix read_entries(std::istream& in, std::size_t side, ScalarField field) {
  std::vector<Complex> entries(side * side);
  for (Complex& z : entries) {
    double re = get_f64(in);
    double im = field == ScalarField::Complex ? get_f64(in) : 0.0;
    z = Complex(re, im);
  }
  return DenseMatrix(side, field, std::move(entries));
}

std::vector<std::vector<double>> parse_csv_rows(std::istream& in, std::vector<std::size_t>* block_starts) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool in_block = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      in_block = false;
      continue;
    }
    if (!in_block && block_starts != nullptr) {
      block_starts->push_back(rows.size());
    }
    in_block = true;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) {
          throw std::invalid_argument(cell);
        }
      } catch (const std::logic_error&) {
        throw std::runtime_error("CSV matrix: cannot parse '" + cell + "' as a real number");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

DenseMatrix rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t begin, std::size_t end) {
  std::size_t side = end - begin;
  std::vector<Complex> entries;
  entries.reserve(side * side);
  for (std::size_t r = begin; r < end; ++r) {
    if (rows[r].size() != side) {
      throw std::runtime_error("CSV matrix: row " + std::to_string(r - begin + 1) + " has " +
                               std::to_string(rows[r].size()) + " entries, expected " + std::to_string(side));
    }
    entries.insert(entries.end(), rows[r].begin(), rows[r].end());
  }
  return DenseMatrix(side, ScalarField::Real, std::move(entries));
}

bool is_csv(const std::filesystem::path& path) {
  return path.extension() == ".csv";
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

}  // namespace

void write_matrix_binary(std::ostream& out, const DenseMatrix& m, const Dims& dims) {
  if (m.side() != dims.total()) {
    throw std::invalid_argument("write_matrix_binary: side does not match d^k");
  }
  write_header(out, dims.d(), dims.k(), m.field());
  write_entries(out, m);
}

void write_matrix_binary(const std::filesystem::path& path, const DenseMatrix& m, const Dims& dims) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  write_matrix_binary(out, m, dims);
  if (!out) {
    throw std::runtime_error("write to '" + path.string() + "' failed");
  }
}

MatrixFile read_matrix_binary(std::istream& in) {
  Header h = read_header(in);
  Dims dims(h.d, h.k);
  MatrixFile file;
  file.d = h.d;
  file.k = h.k;
  file.matrix = read_entries(in, dims.total(), h.field);
  return file;
}

void write_matrix_csv(std::ostream& out, const DenseMatrix& m) {
  if (m.field() != ScalarField::Real) {
    throw std::invalid_argument("CSV matrices must be real");
  }
  char buf[40];
  for (std::size_t i = 0; i < m.side(); ++i) {
    for (std::size_t j = 0; j < m.side(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.real(i, j));
      out << (j == 0 ? "" : ",") << buf;
    }
    out << '\n';
  }
}

DenseMatrix read_matrix_csv(std::istream& in) {
  auto rows = parse_csv_rows(in, nullptr);
  return rows_to_matrix(rows, 0, rows.size());
}

MatrixFile read_matrix_file(const std::filesystem::path& path, std::optional<Dims> expected) {
  MatrixFile file;
  if (is_csv(path)) {
    if (!expected) {
      throw std::invalid_argument("CSV matrix '" + path.string() + "' needs d and k from the caller");
    }
    auto in = open_input(path, std::ios::in);
    file.matrix = read_matrix_csv(in);
    file.d = expected->d();
    file.k = expected->k();
  } else {
    auto in = open_input(path, std::ios::binary);
    file = read_matrix_binary(in);
  }
  if (expected && (file.d != expected->d() || file.k != expected->k())) {
    throw std::runtime_error("matrix file '" + path.string() + "' has d=" + std::to_string(file.d) +
                             ", k=" + std::to_string(file.k) + " but d=" + std::to_string(expected->d()) +
                             ", k=" + std::to_string(expected->k()) + " was requested");
  }
  if (file.matrix.side() != Dims(file.d, file.k).total()) {
    throw std::runtime_error("matrix file '" + path.string() + "': side is not d^k");
  }
  return file;
}

void write_factors_binary(const std::filesystem::path& path, std::span<const DenseMatrix> factors) {
  if (factors.empty()) {
    throw std::invalid_argument("write_factors_binary: no factors");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  const std::size_t d = factors.front().side();
  ScalarField field = ScalarField::Real;
  for (const DenseMatrix& f : factors) {
    if (f.side() != d) {
      throw std::invalid_argument("write_factors_binary: factors must share one side");
    }
    if (f.field() == ScalarField::Complex) {
      field = ScalarField::Complex;
    }
  }
  write_header(out, d, factors.size(), field);
  for (const DenseMatrix& f : factors) {
    for (Complex z : f.entries()) {
      put_f64(out, z.real());
      if (field == ScalarField::Complex) {
        put_f64(out, z.imag());
      }
    }
  }
}

std::vector<DenseMatrix> read_factors_file(const std::filesystem::path& path, std::optional<Dims> expected) {
  std::vector<DenseMatrix> factors;
  if (is_csv(path)) {
    auto in = open_input(path, std::ios::in);
    std::vector<std::size_t> starts;
    auto rows = parse_csv_rows(in, &starts);
    starts.push_back(rows.size());
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
      factors.push_back(rows_to_matrix(rows, starts[b], starts[b + 1]));
    }
  } else {
    auto in = open_input(path, std::ios::binary);
    Header h = read_header(in);
    for (std::size_t i = 0; i < h.k; ++i) {
      factors.push_back(read_entries(in, h.d, h.field));
    }
  }
  if (factors.empty()) {
    throw std::runtime_error("factor file '" + path.string() + "' holds no factors");
  }
  if (expected) {
    if (factors.size() != expected->k() || factors.front().side() != expected->d()) {
      throw std::runtime_error("factor file '" + path.string() + "' does not match d=" +
                               std::to_string(expected->d()) + ", k=" + std::to_string(expected->k()));
    }
  }
  return factors;
}

}  // namespace krontrace
