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

#include <span>
#include <stdexcept>

#include "psqp/linalg.hpp"
#include "psqp/optimizers.hpp"
#include "psqp/problems.hpp"

namespace psqp {

class EmptyTrajectory : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// phi(x, tau) = tau f(x) + ||c(x)||_1.
double merit(double f_value, std::span<const double> c, double tau);

/// Constants entering the merit parameter. Either supplied or estimated from
/// a trajectory (see ConstantsEstimator); estimates are empirical proxies.
struct TauConstants {
  double sigma_min = 1.0;   // lower bound on the smallest singular value of J
  double rho_min = 1.0;
  double rho_max = 1.0;
  double kappa_grad = 1.0;  // upper bound on ||grad f||_2

  void validate() const;
};

/// tau = sigma_min rho_min / (sigma_min rho_min + kappa_grad rho_max).
double tau_from_constants(const TauConstants& k);

/// Smallest singular value of a full-row-rank J, from the eigenvalues of J J^T.
double smallest_singular_value(const Matrix& j);

/// Full-batch first-order quantities at one iterate.
struct Stationarity {
  double f = 0.0;
  double proj_grad_sq = 0.0;  // ||P(x) grad f(x)||_2^2
  double cviol_l1 = 0.0;      // ||c(x)||_1
  double grad_norm = 0.0;     // ||grad f(x)||_2
  double sigma_min = 0.0;     // smallest singular value of J(x)
};

/// Uses the exact gradient: full batch and no gradient noise, whatever the
/// training run samples.
Stationarity stationarity(const Problem& problem, std::span<const double> x);

/// Same quantities from an exact (full-batch, noiseless) evaluation.
Stationarity stationarity_from_eval(const ProblemEval& exact);

/// Running extremes behind estimate_constants.
class ConstantsEstimator {
 public:
  void observe(const ProblemEval& exact);
  void observe(double sigma_min, double grad_norm);
  bool empty() const noexcept { return count_ == 0; }

  /// Throws EmptyTrajectory if nothing was observed.
  TauConstants finish(const Schedule& rho) const;

 private:
  std::size_t count_ = 0;
  double sigma_min_ = 0.0;
  double kappa_grad_ = 0.0;
};

/// sigma_min = min over evals of the smallest singular value of J,
/// kappa_grad = max ||g||_2, rho bounds from the schedule. The evaluations
/// must carry exact gradients.
TauConstants estimate_constants(std::span<const ProblemEval> trajectory, const Schedule& rho);

/// h_max^{-1} ||P grad f||^2 + rho_min ||c||_1.
double stationarity_measure(double proj_grad_sq, double cviol_l1, double h_max, double rho_min);

/// Mean of stationarity_measure over the iterates seen so far.
class RunningAverage {
 public:
  RunningAverage(double h_max, double rho_min) : h_max_(h_max), rho_min_(rho_min) {}

  double add(double proj_grad_sq, double cviol_l1);
  double value() const noexcept { return count_ == 0 ? 0.0 : sum_ / static_cast<double>(count_); }
  std::size_t count() const noexcept { return count_; }

 private:
  double h_max_;
  double rho_min_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace psqp
