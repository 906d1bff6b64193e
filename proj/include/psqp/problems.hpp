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
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psqp/linalg.hpp"
#include "psqp/model.hpp"

namespace psqp {

/// One stochastic evaluation at an iterate.
struct ProblemEval {
  double f_est = 0.0;
  Vector g;  // gradient estimate
  Vector c;  // constraint values, never subsampled
  Matrix J;  // m x n constraint Jacobian
};

/// Selects the sampled objective terms of one evaluation.
struct Batch {
  std::vector<std::size_t> indices;         // empty: every term
  std::optional<std::uint64_t> noise_key;  // seeds additive gradient noise; none: exact gradient

  bool full() const noexcept { return indices.empty(); }
};

/// Epoch-based sampling without replacement. Every epoch is an independent
/// shuffle derived from (seed, epoch), so the batch of iteration k can be
/// rebuilt without replaying earlier iterations.
class BatchSampler {
 public:
  BatchSampler(std::size_t population, double fraction, std::uint64_t seed);

  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  bool is_full() const noexcept { return batch_size_ >= population_; }

  /// Batch used at iteration k (1-based). Empty indices when the batch is the
  /// whole population.
  std::vector<std::size_t> indices_for_iteration(std::size_t k) const;

 private:
  std::size_t population_;
  std::size_t batch_size_;
  std::size_t batches_per_epoch_;
  std::uint64_t seed_;
};

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_constraints() const = 0;

  /// Number of objective terms a batch samples from; 0 when the objective is
  /// not a finite sum.
  virtual std::size_t num_samples() const { return 0; }

  virtual Vector initial_point(std::uint64_t seed) const = 0;

  /// f estimate and its gradient over `batch`, plus the exact constraints and
  /// Jacobian unless `with_constraints` is false (then c is empty and J is 0 x n).
  virtual ProblemEval evaluate(std::span<const double> x, const Batch& batch, bool with_constraints = true) const = 0;

  /// Tape-free full objective and constraint values.
  virtual double objective(std::span<const double> x) const = 0;
  virtual Vector constraints(std::span<const double> x) const = 0;

  /// Layer widths stored in checkpoints; a single entry {n} for plain vectors.
  virtual std::vector<int> param_widths() const { return {static_cast<int>(dim())}; }
};

/// Two-variable analytic problems with exact gradients and optional isotropic
/// Gaussian noise on g.
class AnalyticProblem : public Problem {
 public:
  AnalyticProblem(double noise_sigma, Vector start);

  std::size_t dim() const override { return 2; }
  std::size_t num_constraints() const override { return 1; }
  Vector initial_point(std::uint64_t seed) const override;
  ProblemEval evaluate(std::span<const double> x, const Batch& batch, bool with_constraints = true) const override;
  double objective(std::span<const double> x) const override;
  Vector constraints(std::span<const double> x) const override;

  double noise_sigma() const noexcept { return noise_sigma_; }

  virtual Vector gradient(std::span<const double> x) const = 0;
  virtual Matrix jacobian(std::span<const double> x) const = 0;

 protected:
  virtual double f(std::span<const double> x) const = 0;
  virtual double c(std::span<const double> x) const = 0;

 private:
  double noise_sigma_;
  Vector start_;
};

/// f(x) = (x1 - 2)^2 + x2^2 subject to x1^2 + x2^2 = 1. Minimizer (1, 0), y = 1.
class CircleProblem final : public AnalyticProblem {
 public:
  explicit CircleProblem(double noise_sigma = 0.0, Vector start = {0.5, 1.5});
  std::string name() const override { return "circle"; }
  Vector gradient(std::span<const double> x) const override;
  Matrix jacobian(std::span<const double> x) const override;

 protected:
  double f(std::span<const double> x) const override;
  double c(std::span<const double> x) const override;
};

/// f(x) = 0.5 ||x||^2 subject to x1 + x2 = 1. Minimizer (0.5, 0.5), y = -0.5.
class LinearProblem final : public AnalyticProblem {
 public:
  explicit LinearProblem(double noise_sigma = 0.0, Vector start = {2.0, -1.0});
  std::string name() const override { return "linear"; }
  Vector gradient(std::span<const double> x) const override;
  Matrix jacobian(std::span<const double> x) const override;

 protected:
  double f(std::span<const double> x) const override;
  double c(std::span<const double> x) const override;
};

std::unique_ptr<AnalyticProblem> circle_problem(double noise_sigma = 0.0);
std::unique_ptr<AnalyticProblem> linear_problem(double noise_sigma = 0.0);

class Overdamped : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Damped spring m u'' + mu u' + k u = 0 on [0, 1].
struct SpringConfig {
  double mass = 1.0;
  double friction = 4.0;
  double stiffness = 400.0;
  double amplitude = 0.5;
  double phase = 0.0;
  std::size_t residual_points = 30;  // evenly spaced on [0, 1]
  std::size_t data_points = 10;      // evenly spaced on [0, 0.4]
  double data_end = 0.4;
  std::vector<double> constraint_times{4.0 / 29.0, 12.0 / 29.0, 21.0 / 29.0};
  double residual_weight = 1e-4;
  std::vector<int> hidden{32, 32, 32};

  double delta() const noexcept { return friction / (2.0 * mass); }
  double natural_frequency() const;
  /// sqrt(w0^2 - delta^2); throws Overdamped unless w0^2 > delta^2.
  double damped_frequency() const;
  void validate() const;
};

/// 2A e^{-delta t} cos(phase + t sqrt(w0^2 - delta^2)).
double spring_exact(double t, const SpringConfig& config);

/// Closed-form (u, u', u'') of the exact solution.
JetValue spring_exact_jet(double t, const SpringConfig& config);

/// Physics-informed spring fit with hard ODE-residual constraints.
///
/// f = mean over data points of (u(t) - u*(t))^2
///   + residual_weight * mean over sampled residual points of r(t)^2,
/// c_i = r(constraint_times[i]), with r = m u'' + mu u' + k u.
/// Batches sample residual points only; the data term always uses every point.
class SpringProblem final : public Problem {
 public:
  explicit SpringProblem(SpringConfig config = {});

  std::string name() const override { return "spring"; }
  std::size_t dim() const override { return spec_.param_count(); }
  std::size_t num_constraints() const override { return config_.constraint_times.size(); }
  std::size_t num_samples() const override { return residual_times_.size(); }
  Vector initial_point(std::uint64_t seed) const override;
  ProblemEval evaluate(std::span<const double> x, const Batch& batch, bool with_constraints = true) const override;
  double objective(std::span<const double> x) const override;
  Vector constraints(std::span<const double> x) const override;
  std::vector<int> param_widths() const override { return spec_.widths; }

  const SpringConfig& config() const noexcept { return config_; }
  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<double>& residual_times() const noexcept { return residual_times_; }
  const std::vector<double>& data_times() const noexcept { return data_times_; }
  const std::vector<double>& data_targets() const noexcept { return data_targets_; }

  /// ODE residual of the network at t.
  double residual(std::span<const double> x, double t) const;

  /// Mean squared error against the exact solution on `points` evenly spaced
  /// times in [0, 1].
  double test_mse(std::span<const double> x, std::size_t points = 200) const;

  /// Writes `kind,t,target` rows for data, residual and constraint points.
  void write_training_data(std::ostream& os) const;

 private:
  SpringConfig config_;
  MlpSpec spec_;
  std::vector<double> residual_times_;
  std::vector<double> data_times_;
  std::vector<double> data_targets_;
};

}  // namespace psqp
