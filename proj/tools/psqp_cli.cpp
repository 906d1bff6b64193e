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

// psqp: run, sweep and check projected stochastic SQP experiments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "psqp/diagnostics.hpp"
#include "psqp/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalFailure = 2;

psqp::ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  psqp::ExperimentConfig cfg = path.empty() ? psqp::ExperimentConfig{} : psqp::ExperimentConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw psqp::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_run(const psqp::ExperimentConfig& cfg) {
  const psqp::RunResult r = psqp::run_experiment(cfg);
  if (cfg.output.empty()) psqp::write_trajectory_csv(std::cout, r.records);
  const auto& last = r.records.back();
  std::cerr << "iterations " << r.first_iteration << ".." << r.last_iteration << "  f " << last.f << "  cviol_l1 "
            << last.cviol_l1 << "  proj_grad_sq " << last.proj_grad_sq << "  tau " << r.tau << '\n';
  return kOk;
}

int cmd_sweep(const psqp::ExperimentConfig& cfg, std::size_t seeds, const std::string& summary_path) {
  const auto configs = psqp::seed_sweep(cfg, seeds);
  const psqp::SweepResult sweep = psqp::run_sweep(configs, cfg.jobs);
  bool any_failed = false;
  for (const auto& entry : sweep.runs) {
    if (!entry.result) {
      any_failed = true;
      std::cerr << "seed " << entry.config.seed << " failed: " << entry.error << '\n';
    }
  }
  if (summary_path.empty()) {
    psqp::write_summary_csv(std::cout, sweep.summary);
  } else {
    std::ofstream os(summary_path);
    if (!os) throw psqp::ConfigError("cannot write " + summary_path);
    psqp::write_summary_csv(os, sweep.summary);
  }
  return any_failed ? kNumericalFailure : kOk;
}

int cmd_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& line : psqp::run_self_checks(seed)) {
    std::cout << (line.passed ? "PASS " : "FAIL ") << line.name << " (" << line.detail << ")\n";
    ok = ok && line.passed;
  }
  return ok ? kOk : kNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected stochastic SQP experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path, "key=value config file");
  run->add_option("-s,--set", overrides, "override a config field, key=value");

  std::size_t seeds = 5;
  std::string summary_path;
  auto* sweep = app.add_subcommand("sweep", "Run consecutive seeds and summarize them");
  sweep->add_option("-c,--config", config_path, "key=value config file");
  sweep->add_option("-s,--set", overrides, "override a config field, key=value");
  sweep->add_option("-n,--seeds", seeds, "number of seeds, starting at the configured one")->check(CLI::PositiveNumber);
  sweep->add_option("--summary", summary_path, "summary CSV path (default stdout)");

  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("check", "Run internal consistency checks");
  check->add_option("--seed", check_seed, "seed for the random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return cmd_check(check_seed);
    const psqp::ExperimentConfig cfg = load_config(config_path, overrides);
    if (*run) return cmd_run(cfg);
    return cmd_sweep(cfg, seeds, summary_path);
  } catch (const psqp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const psqp::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}
