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

#include "psqp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "psqp/model.hpp"
#include "psqp/seeds.hpp"

namespace psqp {
namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_field(const std::string& key, const std::string& why) {
  throw ConfigError("config field '" + key + "': " + why);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_field(key, "expected a number, got '" + value + "'");
  }
  if (used != value.size() || !std::isfinite(v)) bad_field(key, "expected a finite number, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
    bad_field(key, "expected a nonnegative integer, got '" + value + "'");
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    bad_field(key, "integer out of range");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad_field(key, "expected a boolean, got '" + value + "'");
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os << format_double(xs[i]);
    } else {
      os << xs[i];
    }
  }
  return os.str();
}

void check_finite(const ProblemEval& e, std::size_t k) {
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!std::isfinite(e.f_est) || !finite(e.g) || !finite(e.c) || !e.J.all_finite())
    throw NumericalFailure(k, "non-finite problem evaluation");
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace

NumericalFailure::NumericalFailure(std::size_t iteration, const std::string& what)
    : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  try {
    if (key == "problem") {
      problem = value;
    } else if (key == "optimizer") {
      const auto kind = parse_optimizer(value);
      if (!kind) bad_field(key, "unknown optimizer '" + value + "'");
      optimizer = *kind;
    } else if (key == "iterations") {
      iterations = parse_u64(key, value);
    } else if (key == "epochs") {
      if (value.empty() || value == "none") {
        epochs.reset();
      } else {
        epochs = parse_u64(key, value);
      }
    } else if (key == "alpha") {
      hyper.alpha = parse_double(key, value);
    } else if (key == "beta") {
      hyper.beta = parse_double(key, value);
    } else if (key == "beta1") {
      hyper.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      hyper.beta2 = parse_double(key, value);
    } else if (key == "eps") {
      hyper.eps = parse_double(key, value);
    } else if (key == "rho") {
      hyper.rho = Schedule::parse(value);
    } else if (key == "h") {
      hyper.h = Schedule::parse(value);
    } else if (key == "jitter") {
      hyper.jitter = parse_bool(key, value);
    } else if (key == "batch_fraction") {
      batch_fraction = parse_double(key, value);
    } else if (key == "seed") {
      seed = parse_u64(key, value);
    } else if (key == "stride") {
      stride = parse_u64(key, value);
    } else if (key == "output") {
      output = value;
    } else if (key == "noise_sigma") {
      noise_sigma = parse_double(key, value);
    } else if (key == "tau") {
      if (value.empty() || value == "auto") {
        tau.reset();
      } else {
        tau = parse_double(key, value);
      }
    } else if (key == "x0") {
      x0.clear();
      if (!value.empty())
        for (const auto& item : split_commas(value)) x0.push_back(parse_double(key, item));
    } else if (key == "hidden") {
      hidden.clear();
      for (const auto& item : split_commas(value)) {
        const auto w = parse_u64(key, item);
        if (w < 1 || w > 100000) bad_field(key, "layer widths must be positive");
        hidden.push_back(static_cast<int>(w));
      }
    } else if (key == "residual_weight") {
      residual_weight = parse_double(key, value);
    } else if (key == "amplitude") {
      amplitude = parse_double(key, value);
    } else if (key == "phase") {
      phase = parse_double(key, value);
    } else if (key == "wall_clock") {
      wall_clock = parse_bool(key, value);
    } else if (key == "resume") {
      resume = value;
    } else if (key == "jobs") {
      jobs = parse_u64(key, value);
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    bad_field(key, e.what());
  }
}

void ExperimentConfig::validate() const {
  if (problem != "circle" && problem != "linear" && problem != "spring")
    bad_field("problem", "expected circle, linear or spring, got '" + problem + "'");
  try {
    hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!epochs && iterations < 1) bad_field("iterations", "must be at least 1");
  if (epochs && *epochs < 1) bad_field("epochs", "must be at least 1");
  if (stride < 1) bad_field("stride", "must be at least 1");
  if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) bad_field("batch_fraction", "must lie in (0, 1]");
  if (!(noise_sigma >= 0.0)) bad_field("noise_sigma", "must be nonnegative");
  if (tau && !(*tau > 0.0)) bad_field("tau", "must be positive");
  if (!x0.empty() && problem == "spring") bad_field("x0", "only analytic problems take a starting point");
  if (!x0.empty() && x0.size() != 2) bad_field("x0", "analytic problems have two variables");
  if (problem == "spring") {
    if (noise_sigma > 0.0) bad_field("noise_sigma", "the spring problem has no additive noise model");
    if (hidden.empty()) bad_field("hidden", "need at least one hidden layer");
    if (!(residual_weight >= 0.0)) bad_field("residual_weight", "must be nonnegative");
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << group_key();
  os << "seed=" << seed << '\n';
  os << "output=" << output << '\n';
  os << "resume=" << resume << '\n';
  os << "jobs=" << jobs << '\n';
  return os.str();
}

std::string ExperimentConfig::group_key() const {
  std::ostringstream os;
  os << "problem=" << problem << '\n';
  os << "optimizer=" << to_string(optimizer) << '\n';
  os << "iterations=" << iterations << '\n';
  os << "epochs=" << (epochs ? std::to_string(*epochs) : "none") << '\n';
  os << "alpha=" << format_double(hyper.alpha) << '\n';
  os << "beta=" << format_double(hyper.beta) << '\n';
  os << "beta1=" << format_double(hyper.beta1) << '\n';
  os << "beta2=" << format_double(hyper.beta2) << '\n';
  os << "eps=" << format_double(hyper.eps) << '\n';
  os << "rho=" << hyper.rho.to_string() << '\n';
  os << "h=" << hyper.h.to_string() << '\n';
  os << "jitter=" << (hyper.jitter ? "true" : "false") << '\n';
  os << "batch_fraction=" << format_double(batch_fraction) << '\n';
  os << "stride=" << stride << '\n';
  os << "noise_sigma=" << format_double(noise_sigma) << '\n';
  os << "tau=" << (tau ? format_double(*tau) : "auto") << '\n';
  os << "x0=" << join(x0) << '\n';
  os << "hidden=" << join(hidden) << '\n';
  os << "residual_weight=" << format_double(residual_weight) << '\n';
  os << "amplitude=" << format_double(amplitude) << '\n';
  os << "phase=" << format_double(phase) << '\n';
  os << "wall_clock=" << (wall_clock ? "true" : "false") << '\n';
  return os.str();
}

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    config.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse(is);
}

std::unique_ptr<Problem> make_problem(const ExperimentConfig& config) {
  if (config.problem == "circle") {
    return config.x0.empty() ? std::make_unique<CircleProblem>(config.noise_sigma)
                             : std::make_unique<CircleProblem>(config.noise_sigma, config.x0);
  }
  if (config.problem == "linear") {
    return config.x0.empty() ? std::make_unique<LinearProblem>(config.noise_sigma)
                             : std::make_unique<LinearProblem>(config.noise_sigma, config.x0);
  }
  if (config.problem == "spring") {
    SpringConfig sc;
    sc.hidden = config.hidden;
    sc.residual_weight = config.residual_weight;
    sc.amplitude = config.amplitude;
    sc.phase = config.phase;
    return std::make_unique<SpringProblem>(sc);
  }
  bad_field("problem", "unknown problem '" + config.problem + "'");
}

// ---------------------------------------------------------------------------
// Runs

void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRecord> records) {
  os << kTrajectoryHeader << '\n';
  for (const auto& r : records) {
    os << r.k << ',' << format_double(r.f) << ',' << format_double(r.cviol_l1) << ',' << format_double(r.proj_grad_sq)
       << ',' << format_double(r.merit) << ',' << format_double(r.dnorm) << ',' << format_double(r.eta) << ','
       << format_double(r.wall_s) << '\n';
  }
}

std::string trajectory_csv(std::span<const TrajectoryRecord> records) {
  std::ostringstream os;
  write_trajectory_csv(os, records);
  return os.str();
}

double tail_mean(std::span<const TrajectoryRecord> records, double h_max, double rho_min) {
  if (records.empty()) throw EmptyTrajectory("tail mean of an empty trajectory");
  const std::size_t count = std::max<std::size_t>(1, records.size() / 10);
  double s = 0.0;
  for (std::size_t i = records.size() - count; i < records.size(); ++i)
    s += stationarity_measure(records[i].proj_grad_sq, records[i].cviol_l1, h_max, rho_min);
  return s / static_cast<double>(count);
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::unique_ptr<Problem> problem = make_problem(config);
  const Hyper& hyper = config.hyper;
  Optimizer opt(config.optimizer, hyper);

  Vector x = problem->initial_point(derive_seed(config.seed, "init"));
  if (!config.resume.empty()) {
    std::ifstream is(config.resume, std::ios::binary);
    if (!is) throw ConfigError("config field 'resume': cannot open " + config.resume);
    StoredParams stored = read_params(is);
    if (stored.widths != problem->param_widths() || stored.theta.size() != problem->dim())
      throw ConfigError("config field 'resume': checkpoint does not match the problem");
    x = std::move(stored.theta);
    opt.read_state(is);
  }

  const BatchSampler sampler(problem->num_samples(), config.batch_fraction, derive_seed(config.seed, "batch"));
  const std::uint64_t noise_seed = derive_seed(config.seed, "noise");
  const std::size_t last = config.epochs ? *config.epochs * sampler.batches_per_epoch() : config.iterations;
  const std::size_t first = opt.iteration() + 1;
  if (first > last) throw ConfigError("config field 'iterations': checkpoint is already past the budget");
  const bool constrained = uses_constraints(config.optimizer);

  RunResult result;
  result.first_iteration = first;
  result.last_iteration = last;
  result.batches_per_epoch = sampler.batches_per_epoch();

  RunningAverage average(hyper.h.max(), hyper.rho.min());
  ConstantsEstimator constants;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t k = first; k <= last; ++k) {
    Batch batch;
    batch.indices = sampler.indices_for_iteration(k);
    batch.noise_key = mix_seed(noise_seed, k);
    const ProblemEval eval = problem->evaluate(x, batch, constrained);
    check_finite(eval, k);

    Direction dir;
    try {
      dir = opt.step(eval);
    } catch (const NotPositiveDefinite& e) {
      throw NumericalFailure(k, e.what());
    }

    if (constrained && !eval.c.empty()) {
      Vector lin = multiply(eval.J, dir.d);
      axpy(dir.rho, eval.c, lin);
      result.max_linearized_residual =
          std::max(result.max_linearized_residual, norm_inf(lin) / (1.0 + norm_inf(eval.c)));
    }

    axpy(hyper.alpha, dir.d, x);
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
      throw NumericalFailure(k, "iterate became non-finite");

    if (k % config.stride == 0 || k == last) {
      Stationarity st;
      try {
        st = stationarity(*problem, x);
      } catch (const NotPositiveDefinite& e) {
        throw NumericalFailure(k, e.what());
      }
      constants.observe(st.sigma_min, st.grad_norm);
      TrajectoryRecord rec;
      rec.k = k;
      rec.f = st.f;
      rec.cviol_l1 = st.cviol_l1;
      rec.proj_grad_sq = st.proj_grad_sq;
      rec.dnorm = norm2(dir.d);
      rec.eta = dir.eta;
      rec.running_avg = average.add(st.proj_grad_sq, st.cviol_l1);
      if (config.wall_clock)
        rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(rec);
    }
  }

  result.constants = constants.finish(hyper.rho);
  result.tau = config.tau ? *config.tau : tau_from_constants(result.constants);
  for (auto& rec : result.records) rec.merit = result.tau * rec.f + rec.cviol_l1;
  result.x_final = x;

  if (!config.output.empty()) {
    const std::filesystem::path prefix(config.output);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
    {
      std::ofstream os(config.output + ".csv", std::ios::binary);
      if (!os) throw ConfigError("config field 'output': cannot write " + config.output + ".csv");
      write_trajectory_csv(os, result.records);
    }
    {
      std::ofstream os(config.output + ".ckpt", std::ios::binary);
      write_params(os, problem->param_widths(), x);
      opt.write_state(os);
    }
    if (const auto* spring = dynamic_cast<const SpringProblem*>(problem.get())) {
      std::ofstream os(config.output + "_data.csv", std::ios::binary);
      spring->write_training_data(os);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

SummaryRow summarize_group(const std::string& group, std::span<const RunResult> runs, const Hyper& hyper) {
  if (runs.empty()) throw EmptyGroup("group '" + group + "' has no completed runs");
  std::vector<double> f, cv, pg, avg, tail;
  for (const auto& r : runs) {
    if (r.records.empty()) throw EmptyGroup("group '" + group + "' contains an empty trajectory");
    const auto& last = r.records.back();
    f.push_back(last.f);
    cv.push_back(last.cviol_l1);
    pg.push_back(last.proj_grad_sq);
    avg.push_back(last.running_avg);
    tail.push_back(tail_mean(r.records, hyper.h.max(), hyper.rho.min()));
  }
  SummaryRow row;
  row.group = group;
  row.runs = runs.size();
  const auto a = mean_std(f), b = mean_std(cv), c = mean_std(pg), d = mean_std(avg), e = mean_std(tail);
  row.f_mean = a.mean;
  row.f_std = a.std;
  row.cviol_mean = b.mean;
  row.cviol_std = b.std;
  row.proj_grad_sq_mean = c.mean;
  row.proj_grad_sq_std = c.std;
  row.running_avg_mean = d.mean;
  row.running_avg_std = d.std;
  row.tail_mean = e.mean;
  row.tail_std = e.std;
  return row;
}

SweepResult run_sweep(std::span<const ExperimentConfig> configs, std::size_t jobs) {
  if (configs.empty()) throw std::invalid_argument("sweep needs at least one config");
  SweepResult out;
  out.runs.resize(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) out.runs[i].config = configs[i];

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out.runs[i].result = run_experiment(configs[i]);
      } catch (const std::exception& e) {
        out.runs[i].error = e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, configs.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  // Groups in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string key = configs[i].group_key();
    if (!members.contains(key)) order.push_back(key);
    members[key].push_back(i);
  }
  for (const auto& key : order) {
    std::vector<RunResult> done;
    std::size_t failed = 0;
    for (std::size_t i : members[key]) {
      if (out.runs[i].result) {
        done.push_back(*out.runs[i].result);
      } else {
        ++failed;
      }
    }
    std::string label = key;
    std::replace(label.begin(), label.end(), '\n', ';');
    SummaryRow row;
    if (done.empty()) {
      row.group = label;
      const double nan = std::nan("");
      row.f_mean = row.f_std = row.cviol_mean = row.cviol_std = nan;
      row.proj_grad_sq_mean = row.proj_grad_sq_std = row.running_avg_mean = row.running_avg_std = nan;
      row.tail_mean = row.tail_std = nan;
    } else {
      row = summarize_group(label, done, configs[members[key].front()].hyper);
    }
    row.failed = failed;
    out.summary.push_back(std::move(row));
  }
  return out;
}

std::vector<ExperimentConfig> seed_sweep(const ExperimentConfig& base, std::size_t seeds) {
  if (seeds < 1) throw ConfigError("sweep needs at least one seed");
  std::vector<ExperimentConfig> out;
  for (std::size_t i = 0; i < seeds; ++i) {
    ExperimentConfig c = base;
    c.seed = base.seed + i;
    if (!base.output.empty()) c.output = base.output + "_seed" + std::to_string(c.seed);
    out.push_back(std::move(c));
  }
  return out;
}

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << "group,runs,failed,f_mean,f_std,cviol_l1_mean,cviol_l1_std,proj_grad_sq_mean,proj_grad_sq_std,"
        "running_avg_mean,running_avg_std,tail_mean,tail_std\n";
  for (const auto& r : rows) {
    os << '"' << r.group << '"' << ',' << r.runs << ',' << r.failed;
    for (double v : {r.f_mean, r.f_std, r.cviol_mean, r.cviol_std, r.proj_grad_sq_mean, r.proj_grad_sq_std,
                     r.running_avg_mean, r.running_avg_std, r.tail_mean, r.tail_std})
      os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace psqp
