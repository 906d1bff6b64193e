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

#include "psqp/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace psqp {

double merit(double f_value, std::span<const double> c, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("merit parameter must be positive");
  return tau * f_value + norm1(c);
}

void TauConstants::validate() const {
  if (!(sigma_min > 0.0) || !(rho_min > 0.0) || !(rho_max > 0.0) || !(kappa_grad > 0.0))
    throw std::invalid_argument("tau constants must be strictly positive");
  if (!(rho_min <= rho_max && rho_max <= 1.0)) throw std::invalid_argument("need rho_min <= rho_max <= 1");
}

double tau_from_constants(const TauConstants& k) {
  k.validate();
  const double a = k.sigma_min * k.rho_min;
  return a / (a + k.kappa_grad * k.rho_max);
}

double smallest_singular_value(const Matrix& j) {
  const std::size_t m = j.rows();
  if (m == 0) return std::numeric_limits<double>::infinity();
  const Matrix g = gram(j);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = g(r, c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve of J J^T failed");
  return std::sqrt(std::max(0.0, es.eigenvalues()(0)));
}

Stationarity stationarity_from_eval(const ProblemEval& exact) {
  Stationarity s;
  s.f = exact.f_est;
  s.cviol_l1 = norm1(exact.c);
  s.grad_norm = norm2(exact.g);
  const Matrix j = exact.J.rows() == 0 ? Matrix(0, exact.g.size()) : exact.J;
  const Vector pg = NullSpaceProjector(j).project(exact.g);
  s.proj_grad_sq = dot(pg, pg);
  s.sigma_min = smallest_singular_value(j);
  return s;
}

Stationarity stationarity(const Problem& problem, std::span<const double> x) {
  return stationarity_from_eval(problem.evaluate(x, Batch{}, true));
}

void ConstantsEstimator::observe(double sigma_min, double grad_norm) {
  if (count_ == 0) {
    sigma_min_ = sigma_min;
    kappa_grad_ = grad_norm;
  } else {
    sigma_min_ = std::min(sigma_min_, sigma_min);
    kappa_grad_ = std::max(kappa_grad_, grad_norm);
  }
  ++count_;
}

void ConstantsEstimator::observe(const ProblemEval& exact) {
  const Matrix j = exact.J.rows() == 0 ? Matrix(0, exact.g.size()) : exact.J;
  observe(smallest_singular_value(j), norm2(exact.g));
}

TauConstants ConstantsEstimator::finish(const Schedule& rho) const {
  if (count_ == 0) throw EmptyTrajectory("cannot estimate constants from an empty trajectory");
  TauConstants k;
  k.sigma_min = sigma_min_;
  k.kappa_grad = kappa_grad_;
  k.rho_min = rho.min();
  k.rho_max = rho.max();
  return k;
}

TauConstants estimate_constants(std::span<const ProblemEval> trajectory, const Schedule& rho) {
  ConstantsEstimator est;
  for (const auto& e : trajectory) est.observe(e);
  return est.finish(rho);
}

double stationarity_measure(double proj_grad_sq, double cviol_l1, double h_max, double rho_min) {
  return proj_grad_sq / h_max + rho_min * cviol_l1;
}

double RunningAverage::add(double proj_grad_sq, double cviol_l1) {
  sum_ += stationarity_measure(proj_grad_sq, cviol_l1, h_max_, rho_min_);
  ++count_;
  return value();
}

}  // namespace psqp
