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

#include "krontrace/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "krontrace/matrix_io.hpp"
#include "krontrace/rng.hpp"
#include "krontrace/subsystem_ops.hpp"
#include "krontrace/variance.hpp"

namespace krontrace {

namespace {

using json = nlohmann::json;

// Formula columns are skipped when D² 2^k exceeds this many entry visits.
constexpr double kFormulaWorkBudget = 268435456.0;

constexpr std::string_view kMatrixKindNames[] = {
    "dense_file", "kron_factors_file", "rank_one_seed", "all_ones", "wishart_seed", "random_dense_seed",
    "random_psd_seed",
};

constexpr std::string_view kEstimatorNames[] = {"hutchinson", "rank_one_exact", "kron_recovery"};

bool takes_path(MatrixKind kind) {
  return kind == MatrixKind::DenseFile || kind == MatrixKind::KronFactorsFile;
}

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::string s(text);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument(std::string(what) + ": expected a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument(std::string(what) + ": '" + s + "' does not fit in 64 bits");
  }
}

std::vector<Complex> normal_entries(std::size_t count, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<Complex> out(count);
  for (Complex& z : out) {
    z = rng.normal();
  }
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, QueryDistribution dist, std::size_t samples) {
  const std::uint64_t tag = (static_cast<std::uint64_t>(samples) << 2) | static_cast<std::uint64_t>(dist);
  return mix64(seed ^ mix64(tag + 0x6a09e667f3bcc909ULL));
}

double trace_of(const KronOperator& op) {
  const Dims& dims = op.dims();
  if (const auto* factors = op.kron_factors()) {
    double product = 1.0;
    for (const DenseMatrix& f : *factors) {
      product *= f.trace().real();
    }
    return product;
  }
  return std::visit(
      [&](const auto& rep) -> double {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, ExplicitDense>) {
          return rep.matrix.trace().real();
        } else if constexpr (std::is_same_v<T, RankOne>) {
          double sum = 0.0;
          for (double g : rep.g) {
            sum += g * g;
          }
          return sum;
        } else if constexpr (std::is_same_v<T, AllOnes>) {
          return static_cast<double>(dims.total());
        } else {
          KronOperator counted = op;
          return diagonal_trace(counted);
        }
      },
      op.representation());
}

// Materialized matrix for the formula columns, when the budgets allow it.
std::optional<DenseMatrix> formula_matrix(const KronOperator& op) {
  const Dims& dims = op.dims();
  const double side = static_cast<double>(dims.total());
  if (dims.k() > kMaxSubsetK || side * side * std::ldexp(1.0, static_cast<int>(dims.k())) > kFormulaWorkBudget) {
    return std::nullopt;
  }
  try {
    return op.materialize();
  } catch (const BudgetExceeded&) {
    return std::nullopt;
  }
}

struct FormulaColumns {
  std::optional<double> exact_var;
  std::optional<double> upper_bound_var;
  std::optional<double> psd_bound;
  std::optional<std::uint64_t> required;
};

FormulaColumns formula_columns(const std::optional<DenseMatrix>& dense, const Dims& dims, QueryDistribution dist,
                               double trace, std::optional<double> eps, bool psd) {
  FormulaColumns cols;
  if (!dense) {
    return cols;
  }
  const ScalarField field = distribution_field(dist);
  try {
    cols.exact_var = exact_variance(*dense, dims, field);
    cols.upper_bound_var = variance_upper_bound_no_abar(*dense, dims, field);
  } catch (const BudgetExceeded&) {
    return cols;
  }
  if (psd) {
    cols.psd_bound = psd_worst_case_bound(std::max(0.0, trace), dims.k(), field);
  }
  if (eps && trace != 0.0) {
    cols.required = required_samples(*cols.exact_var, trace, *eps);
  }
  return cols;
}

ResultRow base_row(const ExperimentConfig& cfg, QueryDistribution dist, std::string id, std::uint64_t seed) {
  ResultRow row;
  row.experiment_id = std::move(id);
  row.d = cfg.d;
  row.k = cfg.k;
  row.field = cfg.field;
  row.dist = dist;
  row.matrix_kind = std::string(matrix_kind_name(cfg.matrix.kind));
  row.seed = seed;
  return row;
}

std::vector<std::size_t> sorted_samples(const ExperimentConfig& cfg) {
  std::vector<std::size_t> out = cfg.samples;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ResultRow> exact_estimator_rows(const ExperimentConfig& cfg, const KronOperator& op, double trace) {
  const QueryDistribution dist = QueryDistribution::RealGaussian;
  const std::uint64_t seed = cell_seed(cfg.seed, dist, 1);
  ResultRow row = base_row(cfg, dist, std::string(estimator_mode_name(cfg.estimator)), seed);
  row.n_samples = 1;
  row.trace_true = trace;
  KronOperator counted = op;
  counted.reset_query_count();
  if (cfg.estimator == EstimatorMode::RankOneExact) {
    // A draw orthogonal to the range has probability zero; retry on fresh streams anyway.
    for (std::uint64_t attempt = 0;; ++attempt) {
      RngStream rng(seed, attempt);
      try {
        row.estimate_mean = rank_one_exact_trace(counted, rng);
        break;
      } catch (const DegenerateQuery&) {
        if (attempt == 7) {
          throw;
        }
      }
    }
  } else {
    RngStream rng(seed, 0);
    row.estimate_mean = exact_kron_recovery(counted, rng).trace();
  }
  row.queries_used = counted.query_count();
  return {row};
}

void put_json_optional(json& obj, const char* key, const std::optional<double>& v) {
  obj[key] = v ? json(*v) : json(nullptr);
}

void put_json_optional(json& obj, const char* key, const std::optional<std::uint64_t>& v) {
  obj[key] = v ? json(*v) : json(nullptr);
}

std::string csv_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::string csv_cell(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

const char* const kResultColumnNames[kResultColumns] = {
    "experiment_id", "d",           "k",
    "field",         "dist",        "matrix_kind",
    "seed",          "n_samples",   "trace_true",
    "estimate_mean", "estimate_stderr", "empirical_var",
    "exact_var",     "upper_bound_var", "psd_bound",
    "required_samples_for_eps",   "queries_used",
};

std::string_view matrix_kind_name(MatrixKind kind) {
  return kMatrixKindNames[static_cast<std::size_t>(kind)];
}

MatrixKind parse_matrix_kind(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kMatrixKindNames); ++i) {
    if (kMatrixKindNames[i] == name) {
      return static_cast<MatrixKind>(i);
    }
  }
  throw std::invalid_argument("unknown matrix kind '" + std::string(name) + "'");
}

MatrixSpec MatrixSpec::parse(std::string_view text) {
  MatrixSpec spec;
  const std::size_t colon = text.find(':');
  spec.kind = parse_matrix_kind(text.substr(0, colon));
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (takes_path(spec.kind)) {
    if (arg.empty()) {
      throw std::invalid_argument("matrix kind '" + std::string(matrix_kind_name(spec.kind)) + "' needs a path");
    }
    spec.path = std::string(arg);
  } else if (spec.kind == MatrixKind::AllOnes) {
    if (!arg.empty()) {
      throw std::invalid_argument("matrix kind 'all_ones' takes no argument");
    }
  } else if (!arg.empty()) {
    spec.seed = parse_u64(arg, "matrix seed");
  }
  return spec;
}

std::string MatrixSpec::to_string() const {
  std::string out(matrix_kind_name(kind));
  if (takes_path(kind)) {
    out += ":" + path;
  } else if (kind != MatrixKind::AllOnes) {
    out += ":" + std::to_string(seed);
  }
  return out;
}

KronOperator build_operator(const MatrixSpec& spec, const Dims& dims) {
  const std::size_t D = dims.total();
  switch (spec.kind) {
    case MatrixKind::DenseFile: {
      MatrixFile file = read_matrix_file(spec.path, dims);
      return KronOperator(dims, ExplicitDense{std::move(file.matrix)});
    }
    case MatrixKind::KronFactorsFile:
      return KronOperator(dims, KronFactors{read_factors_file(spec.path, dims)});
    case MatrixKind::RankOneSeed: {
      std::vector<double> g;
      g.reserve(D);
      for (Complex z : normal_entries(D, spec.seed)) {
        g.push_back(z.real());
      }
      return KronOperator(dims, RankOne{std::move(g)});
    }
    case MatrixKind::AllOnes:
      return KronOperator(dims, AllOnes{});
    case MatrixKind::WishartSeed:
      return KronOperator(dims, WishartKronSeed{spec.seed});
    case MatrixKind::RandomDenseSeed:
      return KronOperator(dims, ExplicitDense{DenseMatrix(D, ScalarField::Real, normal_entries(D * D, spec.seed))});
    case MatrixKind::RandomPsdSeed: {
      DenseMatrix g(D, ScalarField::Real, normal_entries(D * D, spec.seed));
      return KronOperator(dims, ExplicitDense{g.transpose() * g});
    }
  }
  throw std::logic_error("unreachable MatrixKind");
}

std::string_view estimator_mode_name(EstimatorMode mode) {
  return kEstimatorNames[static_cast<std::size_t>(mode)];
}

EstimatorMode parse_estimator_mode(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kEstimatorNames); ++i) {
    if (kEstimatorNames[i] == name) {
      return static_cast<EstimatorMode>(i);
    }
  }
  throw std::invalid_argument("unknown estimator '" + std::string(name) +
                              "' (expected hutchinson|rank_one_exact|kron_recovery)");
}

OutputFormat parse_output_format(std::string_view name) {
  if (name == "csv") {
    return OutputFormat::Csv;
  }
  if (name == "json") {
    return OutputFormat::Json;
  }
  throw std::invalid_argument("unknown format '" + std::string(name) + "' (expected csv|json)");
}

void ExperimentConfig::validate() const {
  if (d == 0 || k == 0) {
    throw std::invalid_argument("config: d and k must be positive");
  }
  Dims check(d, k);
  if (samples.empty()) {
    throw std::invalid_argument("config: samples must list at least one value");
  }
  for (std::size_t s : samples) {
    if (s == 0) {
      throw std::invalid_argument("config: every samples entry must be at least 1");
    }
  }
  if (mc_trials == 0) {
    throw std::invalid_argument("config: mc_trials must be at least 1");
  }
  if (eps && !(*eps > 0.0)) {
    throw std::invalid_argument("config: eps must be positive");
  }
  if (field == ScalarField::Real) {
    for (QueryDistribution dist : distributions) {
      if (distribution_field(dist) != ScalarField::Real) {
        throw std::invalid_argument("config: distribution '" + std::string(distribution_name(dist)) +
                                    "' needs field complex");
      }
    }
  }
  if (takes_path(matrix.kind) && matrix.path.empty()) {
    throw std::invalid_argument("config: matrix kind '" + std::string(matrix_kind_name(matrix.kind)) +
                                "' needs a path");
  }
}

std::vector<QueryDistribution> ExperimentConfig::effective_distributions() const {
  std::vector<QueryDistribution> out = distributions;
  if (out.empty()) {
    for (QueryDistribution dist : kAllDistributions) {
      if (field == ScalarField::Complex || distribution_field(dist) == ScalarField::Real) {
        out.push_back(dist);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ExperimentConfig config_from_json(std::string_view text, ExperimentConfig cfg) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw std::invalid_argument("config: top level must be an object");
  }
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "d") {
        cfg.d = value.get<std::size_t>();
      } else if (key == "k") {
        cfg.k = value.get<std::size_t>();
      } else if (key == "field") {
        cfg.field = parse_field(value.get<std::string>());
      } else if (key == "matrix") {
        if (value.is_string()) {
          cfg.matrix = MatrixSpec::parse(value.get<std::string>());
        } else {
          MatrixSpec spec;
          spec.kind = parse_matrix_kind(value.at("kind").get<std::string>());
          spec.path = value.value("path", std::string());
          spec.seed = value.value("seed", std::uint64_t{0});
          cfg.matrix = spec;
        }
      } else if (key == "distributions") {
        cfg.distributions.clear();
        if (value.is_string()) {
          cfg.distributions.push_back(parse_distribution(value.get<std::string>()));
        } else {
          for (const auto& name : value) {
            cfg.distributions.push_back(parse_distribution(name.get<std::string>()));
          }
        }
      } else if (key == "samples") {
        cfg.samples.clear();
        if (value.is_number()) {
          cfg.samples.push_back(value.get<std::size_t>());
        } else {
          for (const auto& s : value) {
            cfg.samples.push_back(s.get<std::size_t>());
          }
        }
      } else if (key == "mc_trials") {
        cfg.mc_trials = value.get<std::size_t>();
      } else if (key == "eps") {
        cfg.eps = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "output") {
        if (value.is_string()) {
          cfg.output_path = value.get<std::string>();
        } else {
          cfg.output_path = value.value("path", cfg.output_path);
          if (value.contains("format")) {
            cfg.format = parse_output_format(value.at("format").get<std::string>());
          }
        }
      } else if (key == "format") {
        cfg.format = parse_output_format(value.get<std::string>());
      } else if (key == "estimator") {
        cfg.estimator = parse_estimator_mode(value.get<std::string>());
      } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str(), std::move(base));
}

double variance_band(double exact_var, std::size_t mc_trials) {
  if (mc_trials < 2) {
    return std::numeric_limits<double>::infinity();
  }
  // Variance-of-variance for a normal sample, with room for excess kurtosis 3.
  return 5.0 * exact_var * std::sqrt(2.0 / static_cast<double>(mc_trials - 1)) * std::sqrt(1.0 + 3.0);
}

RunOutcome run_config(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dims dims(cfg.d, cfg.k);
  const KronOperator op = build_operator(cfg.matrix, dims);
  const double trace = trace_of(op);

  RunOutcome outcome;
  if (cfg.estimator != EstimatorMode::Hutchinson) {
    outcome.rows = exact_estimator_rows(cfg, op, trace);
    return outcome;
  }

  const std::optional<DenseMatrix> dense = formula_matrix(op);
  const bool psd = dense && is_psd(*dense);
  bool fixed_by_transposes = false;
  if (dense) {
    const DenseMatrix abar = average_partial_transposes(*dense, dims);
    double scale = 0.0;
    for (Complex z : dense->entries()) {
      scale = std::max(scale, std::abs(z));
    }
    fixed_by_transposes = max_abs_difference(abar, *dense) <= 1e-12 * std::max(1.0, scale);
  }

  for (QueryDistribution dist : cfg.effective_distributions()) {
    const FormulaColumns cols = formula_columns(dense, dims, dist, trace, cfg.eps, psd);
    for (std::size_t ell : sorted_samples(cfg)) {
      const std::uint64_t seed = cell_seed(cfg.seed, dist, ell);
      ResultRow row = base_row(cfg, dist, std::string(distribution_name(dist)) + "/l" + std::to_string(ell), seed);
      KronOperator counted = op;
      counted.reset_query_count();

      std::vector<double> values;
      values.reserve(cfg.mc_trials * ell);
      HutchinsonOptions options;
      options.keep_samples = true;
      for (std::size_t t = 0; t < cfg.mc_trials; ++t) {
        options.first_stream = static_cast<std::uint64_t>(t) * ell;
        TraceEstimate est = kron_hutchinson(counted, dist, ell, seed, options);
        for (Complex v : *est.per_sample) {
          values.push_back(v.real());
        }
      }

      const double n = static_cast<double>(values.size());
      double mean = 0.0;
      for (double v : values) {
        mean += v;
      }
      mean /= n;
      row.n_samples = ell;
      row.trace_true = trace;
      row.estimate_mean = mean;
      row.exact_var = cols.exact_var;
      row.upper_bound_var = cols.upper_bound_var;
      row.psd_bound = cols.psd_bound;
      row.required_samples_for_eps = cols.required;
      row.queries_used = counted.query_count();

      if (values.size() >= 2) {
        double m2 = 0.0;
        double m4 = 0.0;
        for (double v : values) {
          const double c = (v - mean) * (v - mean);
          m2 += c;
          m4 += c * c;
        }
        const double var = m2 / (n - 1.0);
        row.empirical_var = var;
        row.estimate_stderr = std::sqrt(var / n);

        const bool comparable = cols.exact_var && (distribution_field(dist) == ScalarField::Real || fixed_by_transposes);
        if (comparable) {
          const double exact = *cols.exact_var;
          // The fixed band assumes light tails; products of squared normals are
          // far heavier, so also allow five empirical standard errors of the variance.
          const double sample_m4 = m4 / n;
          const double pop_var = m2 / n;
          const double se_var = std::sqrt(std::max(0.0, sample_m4 - pop_var * pop_var) / n);
          const double band = std::max(variance_band(exact, cfg.mc_trials), 5.0 * se_var);
          const double gap = var - exact;
          const bool bad = is_gaussian(dist) ? std::abs(gap) > band : gap > band;
          if (bad) {
            outcome.band_violations.push_back(row.experiment_id + ": empirical variance " + format_double(var) +
                                              " vs formula " + format_double(exact) + " (band " +
                                              format_double(band) + ")");
          }
        }
      }
      outcome.rows.push_back(std::move(row));
    }
  }
  return outcome;
}

std::vector<ResultRow> variance_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dims dims(cfg.d, cfg.k);
  const KronOperator op = build_operator(cfg.matrix, dims);
  const double trace = trace_of(op);
  const std::optional<DenseMatrix> dense = formula_matrix(op);
  const bool psd = dense && is_psd(*dense);
  std::vector<ResultRow> rows;
  for (QueryDistribution dist : cfg.effective_distributions()) {
    const FormulaColumns cols = formula_columns(dense, dims, dist, trace, cfg.eps, psd);
    ResultRow row = base_row(cfg, dist, "variance/" + std::string(distribution_name(dist)), cfg.seed);
    row.trace_true = trace;
    row.exact_var = cols.exact_var;
    row.upper_bound_var = cols.upper_bound_var;
    row.psd_bound = cols.psd_bound;
    row.required_samples_for_eps = cols.required;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BoundRow> bounds_rows(const ExperimentConfig& cfg) {
  const double eps = cfg.eps.value_or(0.1);
  std::vector<BoundRow> rows;
  auto add = [&](std::string name, std::optional<double> e, std::optional<std::size_t> q, double value) {
    BoundRow row;
    row.quantity = std::move(name);
    row.d = cfg.d;
    row.k = cfg.k;
    row.field = cfg.field;
    row.eps = e;
    row.q = q;
    row.value = value;
    rows.push_back(std::move(row));
  };
  add("all_ones_lower_bound_samples", eps, std::nullopt, all_ones_lower_bound_samples(cfg.d, cfg.k, eps, cfg.field));
  const RankOneBudget budget = rankone_variance_budget(cfg.d, cfg.k, eps, cfg.field);
  add("rankone_budget_leading_order", eps, std::nullopt, budget.leading_order);
  add("rankone_budget_with_constant", eps, std::nullopt, budget.with_constant);
  if (eps <= 0.5) {
    add("adaptive_query_lower_bound", eps, std::nullopt, adaptive_query_lower_bound(cfg.k, eps));
  }
  add("psd_worst_case_per_trace_sq", std::nullopt, std::nullopt, psd_worst_case_bound(1.0, cfg.k, cfg.field));
  for (std::size_t q = 0; q <= cfg.d; ++q) {
    add("wishart_mse", std::nullopt, q, wishart_mse(cfg.d, cfg.k, q));
  }
  return rows;
}

void emit_bounds(const std::vector<BoundRow>& rows, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Json) {
    std::string text = "[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const BoundRow& r = rows[i];
      text += i == 0 ? "\n  {" : ",\n  {";
      text += "\"quantity\": " + json(r.quantity).dump() + ", \"d\": " + json(r.d).dump() +
              ", \"k\": " + json(r.k).dump() + ", \"field\": " + json(std::string(field_name(r.field))).dump() +
              ", \"eps\": " + (r.eps ? json(*r.eps) : json(nullptr)).dump() +
              ", \"q\": " + (r.q ? json(*r.q) : json(nullptr)).dump() + ", \"value\": " + json(r.value).dump() +
              "}";
    }
    text += rows.empty() ? "]\n" : "\n]\n";
    out << text;
    return;
  }
  out << "quantity,d,k,field,eps,q,value\n";
  for (const BoundRow& r : rows) {
    out << r.quantity << ',' << r.d << ',' << r.k << ',' << field_name(r.field) << ','
        << (r.eps ? format_double(*r.eps) : std::string()) << ',' << (r.q ? std::to_string(*r.q) : std::string())
        << ',' << format_double(r.value) << '\n';
  }
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void emit(const std::vector<ResultRow>& rows, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Json) {
    json arr = json::array();
    for (const ResultRow& r : rows) {
      json obj;
      obj["experiment_id"] = r.experiment_id;
      obj["d"] = r.d;
      obj["k"] = r.k;
      obj["field"] = std::string(field_name(r.field));
      obj["dist"] = std::string(distribution_name(r.dist));
      obj["matrix_kind"] = r.matrix_kind;
      obj["seed"] = r.seed;
      put_json_optional(obj, "n_samples", r.n_samples);
      put_json_optional(obj, "trace_true", r.trace_true);
      put_json_optional(obj, "estimate_mean", r.estimate_mean);
      put_json_optional(obj, "estimate_stderr", r.estimate_stderr);
      put_json_optional(obj, "empirical_var", r.empirical_var);
      put_json_optional(obj, "exact_var", r.exact_var);
      put_json_optional(obj, "upper_bound_var", r.upper_bound_var);
      put_json_optional(obj, "psd_bound", r.psd_bound);
      put_json_optional(obj, "required_samples_for_eps", r.required_samples_for_eps);
      obj["queries_used"] = r.queries_used;
      arr.push_back(std::move(obj));
    }
    // nlohmann::json keeps keys sorted; rebuild in column order.
    std::string text = "[";
    for (std::size_t i = 0; i < arr.size(); ++i) {
      text += i == 0 ? "\n  {" : ",\n  {";
      for (std::size_t c = 0; c < kResultColumns; ++c) {
        const char* name = kResultColumnNames[c];
        text += (c == 0 ? "" : ", ") + json(name).dump() + ": " + arr[i][name].dump();
      }
      text += "}";
    }
    text += arr.empty() ? "]\n" : "\n]\n";
    out << text;
    return;
  }

  for (std::size_t c = 0; c < kResultColumns; ++c) {
    out << (c == 0 ? "" : ",") << kResultColumnNames[c];
  }
  out << '\n';
  for (const ResultRow& r : rows) {
    out << csv_quote(r.experiment_id) << ',' << r.d << ',' << r.k << ',' << field_name(r.field) << ','
        << distribution_name(r.dist) << ',' << csv_quote(r.matrix_kind) << ',' << r.seed << ','
        << csv_cell(r.n_samples) << ',' << csv_cell(r.trace_true) << ',' << csv_cell(r.estimate_mean) << ','
        << csv_cell(r.estimate_stderr) << ',' << csv_cell(r.empirical_var) << ',' << csv_cell(r.exact_var) << ','
        << csv_cell(r.upper_bound_var) << ',' << csv_cell(r.psd_bound) << ','
        << csv_cell(r.required_samples_for_eps) << ',' << r.queries_used << '\n';
  }
}

void emit(const std::vector<ResultRow>& rows, OutputFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  emit(rows, format, out);
  out.flush();
  if (!out) {
    throw std::runtime_error("write to '" + path.string() + "' failed");
  }
}

}  // namespace krontrace
