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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "krontrace/experiments.hpp"
#include "krontrace/verify.hpp"

namespace {

using namespace krontrace;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::size_t d = 2;
  std::size_t k = 2;
  std::string field = "real";
  std::vector<std::string> dists;
  std::vector<std::size_t> samples;
  std::size_t mc_trials = 1000;
  std::uint64_t seed = 0;
  std::optional<double> eps;
  std::string matrix = "all_ones";
  std::string out;
  std::string format = "csv";
  std::string config;
  std::string estimator;
  std::string depth = "fast";
};

void add_experiment_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--d", f.d, "Subsystem dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--k", f.k, "Number of subsystems")->check(CLI::PositiveNumber);
  cmd->add_option("--field", f.field, "Scalar field of the queries")->check(CLI::IsMember({"real", "complex"}));
  cmd->add_option("--dist", f.dists, "Query distributions (repeat or comma-separate)")->delimiter(',');
  cmd->add_option("--samples", f.samples, "Samples per estimate, a grid (repeat or comma-separate)")
      ->delimiter(',');
  cmd->add_option("--mc-trials", f.mc_trials, "Independent repetitions per cell")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_option("--eps", f.eps, "Relative accuracy target");
  cmd->add_option("--matrix", f.matrix, "kind[:arg], e.g. all_ones, wishart_seed:3, dense_file:a.bin");
  cmd->add_option("--out", f.out, "Output path (stdout when omitted)");
  cmd->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--config", f.config, "JSON config; its keys override the flags");
  cmd->add_option("--estimator", f.estimator, "hutchinson, rank_one_exact or kron_recovery");
}

ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig cfg;
  cfg.d = f.d;
  cfg.k = f.k;
  cfg.field = parse_field(f.field);
  for (const std::string& name : f.dists) {
    cfg.distributions.push_back(parse_distribution(name));
  }
  if (!f.samples.empty()) {
    cfg.samples = f.samples;
  }
  cfg.mc_trials = f.mc_trials;
  cfg.seed = f.seed;
  cfg.eps = f.eps;
  cfg.matrix = MatrixSpec::parse(f.matrix);
  cfg.output_path = f.out;
  cfg.format = parse_output_format(f.format);
  if (!f.estimator.empty()) {
    cfg.estimator = parse_estimator_mode(f.estimator);
  }
  if (!f.config.empty()) {
    cfg = load_config(f.config, cfg);
  }
  cfg.validate();
  return cfg;
}

template <typename Writer>
void write_output(const ExperimentConfig& cfg, Writer&& write) {
  if (cfg.output_path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(cfg.output_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + cfg.output_path + "' for writing");
  }
  write(out);
  out.flush();
  if (!out) {
    throw std::runtime_error("write to '" + cfg.output_path + "' failed");
  }
}

int run_estimate(const ExperimentConfig& cfg) {
  RunOutcome outcome = run_config(cfg);
  write_output(cfg, [&](std::ostream& out) { emit(outcome.rows, cfg.format, out); });
  for (const std::string& msg : outcome.band_violations) {
    std::cerr << "variance band violated: " << msg << '\n';
  }
  return outcome.band_violations.empty() ? kExitOk : kExitCheckFailed;
}

int run_recover(ExperimentConfig cfg, bool estimator_given) {
  if (!estimator_given || cfg.estimator == EstimatorMode::Hutchinson) {
    cfg.estimator =
        cfg.matrix.kind == MatrixKind::RankOneSeed ? EstimatorMode::RankOneExact : EstimatorMode::KronRecovery;
  }
  RunOutcome outcome = run_config(cfg);
  write_output(cfg, [&](std::ostream& out) { emit(outcome.rows, cfg.format, out); });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kronecker-structured trace estimation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "krontrace 0.1.0");

  Flags flags;
  CLI::App* estimate = app.add_subcommand("estimate", "Monte Carlo Hutchinson runs against the exact variance");
  CLI::App* variance = app.add_subcommand("variance", "Exact variance and bounds, no sampling");
  CLI::App* recover = app.add_subcommand("recover", "Exact trace recovery for rank-one or Kronecker operators");
  CLI::App* bounds = app.add_subcommand("bounds", "Closed-form sample-count and lower-bound table");
  for (CLI::App* cmd : {estimate, variance, recover, bounds}) {
    add_experiment_flags(cmd, flags);
  }
  CLI::App* verify = app.add_subcommand("verify", "Run the invariant battery");
  verify->add_option("depth", flags.depth, "fast or full")->check(CLI::IsMember({"fast", "full"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      VerifyReport report = verify_suite(parse_verify_depth(flags.depth));
      print_report(report, std::cout);
      return report.passed() ? kExitOk : kExitCheckFailed;
    }
    const ExperimentConfig cfg = build_config(flags);
    if (estimate->parsed()) {
      return run_estimate(cfg);
    }
    if (variance->parsed()) {
      write_output(cfg, [&](std::ostream& out) { emit(variance_rows(cfg), cfg.format, out); });
      return kExitOk;
    }
    if (recover->parsed()) {
      return run_recover(cfg, !flags.estimator.empty());
    }
    if (bounds->parsed()) {
      write_output(cfg, [&](std::ostream& out) { emit_bounds(bounds_rows(cfg), cfg.format, out); });
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "krontrace: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
