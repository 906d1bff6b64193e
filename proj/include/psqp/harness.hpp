/*
 * Copyright 2026 The psqp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psqp/metrics.hpp"
#include "psqp/optimizers.hpp"
#include "psqp/problems.hpp"

namespace psqp {

/// Invalid or unknown configuration field. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization or non-finite failure during a run.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(std::size_t iteration, const std::string& what);
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class EmptyGroup : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string problem = "circle";  // circle | linear | spring
  OptimizerKind optimizer = OptimizerKind::kSqpAdam;
  std::size_t iterations = 1000;
  std::optional<std::size_t> epochs;  // overrides iterations: epochs * batches per epoch
  Hyper hyper;
  double batch_fraction = 1.0;
  std::uint64_t seed = 0;
  std::size_t stride = 1;
  std::string output;                 // path prefix; empty writes nothing
  double noise_sigma = 0.0;           // analytic problems only
  std::optional<double> tau;          // merit parameter; unset estimates it from the run
  std::vector<double> x0;             // analytic starting point override
  std::vector<int> hidden{32, 32, 32};
  double residual_weight = 1e-4;
  double amplitude = 0.5;
  double phase = 0.0;
  bool wall_clock = false;            // false writes 0 in wall_s so outputs are reproducible
  std::string resume;                 // checkpoint to continue from
  std::size_t jobs = 0;               // sweep workers; 0 uses the hardware concurrency

  /// Applies one key=value pair. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Cross-field checks. Throws ConfigError.
  void validate() const;

  /// Canonical key=value text, one per line.
  std::string to_text() const;

  /// Identifies configs that differ only in seed, output, resume or jobs.
  std::string group_key() const;

  /// Reads key=value lines; '#' starts a comment.
  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::filesystem::path& path);
};

std::unique_ptr<Problem> make_problem(const ExperimentConfig& config);

/// One CSV row: metrics at the iterate reached after step k.
struct TrajectoryRecord {
  std::size_t k = 0;
  double f = 0.0;              // full objective
  double cviol_l1 = 0.0;
  double proj_grad_sq = 0.0;   // exact gradient
  double merit = 0.0;
  double dnorm = 0.0;          // ||d_k||_2
  double eta = 0.0;            // Adam bias correction, 0 otherwise
  double wall_s = 0.0;
  double running_avg = 0.0;    // not written to CSV
};

inline constexpr const char* kTrajectoryHeader = "k,f,cviol_l1,proj_grad_sq,merit,dnorm,eta,wall_s";

struct RunResult {
  std::vector<TrajectoryRecord> records;
  Vector x_final;
  std::size_t first_iteration = 1;
  std::size_t last_iteration = 0;
  std::size_t batches_per_epoch = 1;
  TauConstants constants;
  double tau = 1.0;
  /// max_k ||J_k d_k + rho_k c_k||_inf / (1 + ||c_k||_inf); 0 for unconstrained steppers.
  double max_linearized_residual = 0.0;
};

/// Iterates the configured stepper; writes <output>.csv and <output>.ckpt
/// (plus <output>_data.csv for the spring) when an output prefix is set.
/// Throws ConfigError or NumericalFailure.
RunResult run_experiment(const ExperimentConfig& config);

void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRecord> records);
std::string trajectory_csv(std::span<const TrajectoryRecord> records);

/// Mean of the stationarity measure over the last 10% of the records.
double tail_mean(std::span<const TrajectoryRecord> records, double h_max, double rho_min);

struct SummaryRow {
  std::string group;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double f_mean = 0.0, f_std = 0.0;
  double cviol_mean = 0.0, cviol_std = 0.0;
  double proj_grad_sq_mean = 0.0, proj_grad_sq_std = 0.0;
  double running_avg_mean = 0.0, running_avg_std = 0.0;
  double tail_mean = 0.0, tail_std = 0.0;
};

/// Mean and sample standard deviation of the final metrics. Throws EmptyGroup
/// for an empty group.
SummaryRow summarize_group(const std::string& group, std::span<const RunResult> runs, const Hyper& hyper);

struct SweepEntry {
  ExperimentConfig config;
  std::optional<RunResult> result;
  std::string error;
};

struct SweepResult {
  std::vector<SweepEntry> runs;
  std::vector<SummaryRow> summary;
};

/// Runs configs independently on up to `jobs` threads. A failing run is
/// recorded in its entry and the rest continue.
SweepResult run_sweep(std::span<const ExperimentConfig> configs, std::size_t jobs = 0);

/// `seeds` copies of base with seed base.seed + i and output <output>_seed<seed>.
std::vector<ExperimentConfig> seed_sweep(const ExperimentConfig& base, std::size_t seeds);

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows);

}  // namespace psqp
