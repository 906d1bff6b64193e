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

#include "psqp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "psqp/autodiff.hpp"
#include "psqp/seeds.hpp"

namespace psqp {
namespace {

std::vector<double> linspace(double a, double b, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

void check_dim(std::span<const double> x, std::size_t n) {
  if (x.size() != n) {
    std::ostringstream os;
    os << "iterate has length " << x.size() << ", problem dimension is " << n;
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// BatchSampler

BatchSampler::BatchSampler(std::size_t population, double fraction, std::uint64_t seed)
    : population_(population), seed_(seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("batch fraction must lie in (0, 1]");
  if (population == 0) {
    batch_size_ = 0;
    batches_per_epoch_ = 1;
    return;
  }
  batch_size_ = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(population)));
  if (batch_size_ < 1) throw std::invalid_argument("batch fraction selects no samples");
  batch_size_ = std::min(batch_size_, population);
  batches_per_epoch_ = (population + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchSampler::indices_for_iteration(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("iterations are counted from 1");
  if (is_full()) return {};
  const std::size_t epoch = (k - 1) / batches_per_epoch_;
  const std::size_t slot = (k - 1) % batches_per_epoch_;

  std::vector<std::size_t> perm(population_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 gen(mix_seed(seed_, epoch));
  for (std::size_t i = population_ - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(gen)]);
  }
  const std::size_t begin = slot * batch_size_;
  const std::size_t end = std::min(population_, begin + batch_size_);
  std::vector<std::size_t> out(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                               perm.begin() + static_cast<std::ptrdiff_t>(end));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Analytic problems

AnalyticProblem::AnalyticProblem(double noise_sigma, Vector start)
    : noise_sigma_(noise_sigma), start_(std::move(start)) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");
  check_dim(start_, 2);
}

Vector AnalyticProblem::initial_point(std::uint64_t /*seed*/) const { return start_; }

ProblemEval AnalyticProblem::evaluate(std::span<const double> x, const Batch& batch, bool with_constraints) const {
  check_dim(x, dim());
  ProblemEval e;
  e.f_est = f(x);
  e.g = gradient(x);
  if (noise_sigma_ > 0.0 && batch.noise_key) {
    std::mt19937_64 gen(*batch.noise_key);
    std::normal_distribution<double> noise(0.0, noise_sigma_);
    for (double& gi : e.g) gi += noise(gen);
  }
  if (with_constraints) {
    e.c = {c(x)};
    e.J = jacobian(x);
  } else {
    e.J = Matrix(0, dim());
  }
  return e;
}

double AnalyticProblem::objective(std::span<const double> x) const {
  check_dim(x, dim());
  return f(x);
}

Vector AnalyticProblem::constraints(std::span<const double> x) const {
  check_dim(x, dim());
  return {c(x)};
}

CircleProblem::CircleProblem(double noise_sigma, Vector start) : AnalyticProblem(noise_sigma, std::move(start)) {}

double CircleProblem::f(std::span<const double> x) const { return (x[0] - 2.0) * (x[0] - 2.0) + x[1] * x[1]; }
double CircleProblem::c(std::span<const double> x) const { return x[0] * x[0] + x[1] * x[1] - 1.0; }
Vector CircleProblem::gradient(std::span<const double> x) const { return {2.0 * (x[0] - 2.0), 2.0 * x[1]}; }
Matrix CircleProblem::jacobian(std::span<const double> x) const { return Matrix(1, 2, {2.0 * x[0], 2.0 * x[1]}); }

LinearProblem::LinearProblem(double noise_sigma, Vector start) : AnalyticProblem(noise_sigma, std::move(start)) {}

double LinearProblem::f(std::span<const double> x) const { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }
double LinearProblem::c(std::span<const double> x) const { return x[0] + x[1] - 1.0; }
Vector LinearProblem::gradient(std::span<const double> x) const { return {x[0], x[1]}; }
Matrix LinearProblem::jacobian(std::span<const double> /*x*/) const { return Matrix(1, 2, {1.0, 1.0}); }

std::unique_ptr<AnalyticProblem> circle_problem(double noise_sigma) {
  return std::make_unique<CircleProblem>(noise_sigma);
}

std::unique_ptr<AnalyticProblem> linear_problem(double noise_sigma) {
  return std::make_unique<LinearProblem>(noise_sigma);
}

// ---------------------------------------------------------------------------
// Spring

double SpringConfig::natural_frequency() const { return std::sqrt(stiffness / mass); }

double SpringConfig::damped_frequency() const {
  const double w0 = natural_frequency();
  const double d = delta();
  if (!(w0 * w0 > d * d)) {
    std::ostringstream os;
    os << "spring is not under-damped: w0^2 = " << w0 * w0 << ", delta^2 = " << d * d;
    throw Overdamped(os.str());
  }
  return std::sqrt(w0 * w0 - d * d);
}

void SpringConfig::validate() const {
  if (!(mass > 0.0) || !(stiffness > 0.0) || !(friction >= 0.0))
    throw std::invalid_argument("spring needs positive mass and stiffness and nonnegative friction");
  damped_frequency();
  if (residual_points < 1 || data_points < 1) throw std::invalid_argument("spring needs residual and data points");
  if (!(residual_weight >= 0.0)) throw std::invalid_argument("residual weight must be nonnegative");
  MlpSpec spec;
  spec.widths.push_back(1);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(1);
  spec.validate();
}

double spring_exact(double t, const SpringConfig& config) {
  const double omega = config.damped_frequency();
  return std::exp(-config.delta() * t) * (2.0 * config.amplitude * std::cos(config.phase + t * omega));
}

JetValue spring_exact_jet(double t, const SpringConfig& config) {
  const double omega = config.damped_frequency();
  const double d = config.delta();
  const double scale = 2.0 * config.amplitude * std::exp(-d * t);
  const double cs = std::cos(config.phase + t * omega);
  const double sn = std::sin(config.phase + t * omega);
  return {scale * cs, scale * (-d * cs - omega * sn), scale * ((d * d - omega * omega) * cs + 2.0 * d * omega * sn)};
}

SpringProblem::SpringProblem(SpringConfig config) : config_(std::move(config)) {
  config_.validate();
  spec_.widths.push_back(1);
  spec_.widths.insert(spec_.widths.end(), config_.hidden.begin(), config_.hidden.end());
  spec_.widths.push_back(1);
  residual_times_ = linspace(0.0, 1.0, config_.residual_points);
  data_times_ = linspace(0.0, config_.data_end, config_.data_points);
  data_targets_.reserve(data_times_.size());
  for (double t : data_times_) data_targets_.push_back(spring_exact(t, config_));
}

Vector SpringProblem::initial_point(std::uint64_t seed) const { return init_params(spec_, seed); }

ProblemEval SpringProblem::evaluate(std::span<const double> x, const Batch& batch, bool with_constraints) const {
  check_dim(x, dim());
  for (std::size_t i : batch.indices)
    if (i >= residual_times_.size()) throw std::out_of_range("batch index outside the residual points");

  thread_local Tape tape;
  thread_local std::vector<double> adjoint;
  tape.clear();
  const std::vector<Var> theta = tape.leaves(x);

  auto ode_residual = [&](double t) {
    const Jet2 u = forward_jet(spec_, theta, t);
    return Var(config_.mass) * u.d2 + Var(config_.friction) * u.d1 + Var(config_.stiffness) * u.val;
  };

  // Constraints first: their reverse sweeps then only cover a short prefix.
  std::vector<Var> cons;
  if (with_constraints) {
    cons.reserve(config_.constraint_times.size());
    for (double t : config_.constraint_times) cons.push_back(ode_residual(t));
  }

  std::vector<Var> misfit;
  misfit.reserve(data_times_.size());
  for (std::size_t j = 0; j < data_times_.size(); ++j) {
    const Var input[1] = {Var(data_times_[j])};
    misfit.push_back(forward(spec_, theta, input).front() - Var(data_targets_[j]));
  }

  std::vector<Var> res;
  if (batch.full()) {
    res.reserve(residual_times_.size());
    for (double t : residual_times_) res.push_back(ode_residual(t));
  } else {
    res.reserve(batch.indices.size());
    for (std::size_t i : batch.indices) res.push_back(ode_residual(residual_times_[i]));
  }

  const Var f = mean_square(misfit) + Var(config_.residual_weight) * mean_square(res);

  ProblemEval e;
  e.f_est = f.value();
  e.g.assign(x.size(), 0.0);
  tape.backward_into(f, e.g, adjoint);
  e.J = Matrix(cons.size(), x.size());
  e.c.resize(cons.size());
  for (std::size_t i = 0; i < cons.size(); ++i) {
    e.c[i] = cons[i].value();
    tape.backward_into(cons[i], e.J.row(i), adjoint);
  }
  return e;
}

double SpringProblem::residual(std::span<const double> x, double t) const {
  const JetValue u = forward_jet_values(spec_, x, t);
  return config_.mass * u.d2 + config_.friction * u.d1 + config_.stiffness * u.val;
}

double SpringProblem::objective(std::span<const double> x) const {
  check_dim(x, dim());
  double fit = 0.0;
  for (std::size_t j = 0; j < data_times_.size(); ++j) {
    const double input[1] = {data_times_[j]};
    const double e = forward(spec_, x, input).front() - data_targets_[j];
    fit += e * e;
  }
  double res = 0.0;
  for (double t : residual_times_) {
    const double r = residual(x, t);
    res += r * r;
  }
  return fit / static_cast<double>(data_times_.size()) +
         config_.residual_weight * res / static_cast<double>(residual_times_.size());
}

Vector SpringProblem::constraints(std::span<const double> x) const {
  check_dim(x, dim());
  Vector c;
  c.reserve(config_.constraint_times.size());
  for (double t : config_.constraint_times) c.push_back(residual(x, t));
  return c;
}

double SpringProblem::test_mse(std::span<const double> x, std::size_t points) const {
  check_dim(x, dim());
  const std::vector<double> grid = linspace(0.0, 1.0, points);
  double s = 0.0;
  for (double t : grid) {
    const double input[1] = {t};
    const double e = forward(spec_, x, input).front() - spring_exact(t, config_);
    s += e * e;
  }
  return s / static_cast<double>(points);
}

void SpringProblem::write_training_data(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  os << "kind,t,target\n";
  for (std::size_t j = 0; j < data_times_.size(); ++j) os << "data," << data_times_[j] << ',' << data_targets_[j] << '\n';
  for (double t : residual_times_) os << "residual," << t << ",0\n";
  for (double t : config_.constraint_times) os << "constraint," << t << ",0\n";
  os.precision(old_precision);
}

}  // namespace psqp
