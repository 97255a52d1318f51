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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "krontrace/estimators.hpp"
#include "krontrace/kron_core.hpp"

namespace krontrace {

enum class MatrixKind : std::uint8_t {
  DenseFile,
  KronFactorsFile,
  RankOneSeed,
  AllOnes,
  WishartSeed,
  RandomDenseSeed,
  RandomPsdSeed,
};

std::string_view matrix_kind_name(MatrixKind kind);
MatrixKind parse_matrix_kind(std::string_view name);

struct MatrixSpec {
  MatrixKind kind = MatrixKind::AllOnes;
  std::string path;
  std::uint64_t seed = 0;

  /// "all_ones", "wishart_seed:7", "dense_file:/tmp/a.bin", ...
  static MatrixSpec parse(std::string_view text);
  std::string to_string() const;
};

/// Builds the operator a spec describes. Seeded kinds draw from
/// RngStream(seed, 0) in row-major order.
KronOperator build_operator(const MatrixSpec& spec, const Dims& dims);

enum class EstimatorMode : std::uint8_t { Hutchinson, RankOneExact, KronRecovery };

std::string_view estimator_mode_name(EstimatorMode mode);
EstimatorMode parse_estimator_mode(std::string_view name);

enum class OutputFormat : std::uint8_t { Csv, Json };

OutputFormat parse_output_format(std::string_view name);

struct ExperimentConfig {
  std::size_t d = 2;
  std::size_t k = 2;
  ScalarField field = ScalarField::Real;
  MatrixSpec matrix;
  /// Empty means every distribution valid for `field`.
  std::vector<QueryDistribution> distributions;
  std::vector<std::size_t> samples{1};
  std::size_t mc_trials = 1000;
  std::optional<double> eps;
  std::uint64_t seed = 0;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  EstimatorMode estimator = EstimatorMode::Hutchinson;

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
  std::vector<QueryDistribution> effective_distributions() const;
};

/// Reads the JSON form. Keys not present keep the values already in `base`.
ExperimentConfig config_from_json(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct ResultRow {
  std::string experiment_id;
  std::size_t d = 0;
  std::size_t k = 0;
  ScalarField field = ScalarField::Real;
  QueryDistribution dist = QueryDistribution::RealGaussian;
  std::string matrix_kind;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> n_samples;
  std::optional<double> trace_true;
  std::optional<double> estimate_mean;
  std::optional<double> estimate_stderr;
  std::optional<double> empirical_var;
  std::optional<double> exact_var;
  std::optional<double> upper_bound_var;
  std::optional<double> psd_bound;
  std::optional<std::uint64_t> required_samples_for_eps;
  std::uint64_t queries_used = 0;
};

inline constexpr std::size_t kResultColumns = 17;
extern const char* const kResultColumnNames[kResultColumns];

struct RunOutcome {
  std::vector<ResultRow> rows;
  /// One message per row whose empirical variance left the allowed band.
  std::vector<std::string> band_violations;
};

/// Runs every (distribution, ℓ) cell. Formula columns are left empty when a
/// budget makes them unavailable.
RunOutcome run_config(const ExperimentConfig& cfg);

/// Formula-only rows (no sampling) for `cfg`'s matrix and distributions.
std::vector<ResultRow> variance_rows(const ExperimentConfig& cfg);

/// Half-width of the allowed |empirical - exact| gap for a cell.
double variance_band(double exact_var, std::size_t mc_trials);

void emit(const std::vector<ResultRow>& rows, OutputFormat format, std::ostream& out);
void emit(const std::vector<ResultRow>& rows, OutputFormat format, const std::filesystem::path& path);

/// One closed-form quantity of the bounds table.
struct BoundRow {
  std::string quantity;
  std::size_t d = 0;
  std::size_t k = 0;
  ScalarField field = ScalarField::Real;
  std::optional<double> eps;
  /// Only for wishart_mse: the number of revealed directions.
  std::optional<std::size_t> q;
  double value = 0.0;
};

/// Sample-count and lower-bound quantities for cfg.d, cfg.k, cfg.field and
/// cfg.eps (0.1 when unset).
std::vector<BoundRow> bounds_rows(const ExperimentConfig& cfg);
void emit_bounds(const std::vector<BoundRow>& rows, OutputFormat format, std::ostream& out);

/// %.17g, the precision every emitted number uses.
std::string format_double(double value);

}  // namespace krontrace
