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

#include "psqp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "psqp/harness.hpp"
#include "psqp/linalg.hpp"
#include "psqp/metrics.hpp"
#include "psqp/optimizers.hpp"
#include "psqp/problems.hpp"

namespace psqp {
namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a(i, j) = n(rng);
  return a;
}

Vector random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

CheckLine kkt_decomposition(std::mt19937_64& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + trial % 6;
    const std::size_t m = 1 + trial % 3;
    const Matrix j = random_matrix(rng, m, n);
    const Vector q = random_vector(rng, n);
    const Vector c = random_vector(rng, m);
    const NullSpaceProjector proj(j, false);
    const Vector s = add(proj.normal_step(c, 1.0), scaled(proj.project(q), -1.0));
    const KktSolution direct = kkt_solve_direct(j, q, c);
    worst = std::max(worst, norm_inf(subtract(s, direct.s)) / (1.0 + norm_inf(direct.s)));
  }
  return {"kkt decomposition matches direct solve", worst <= 1e-9, "max rel err " + sci(worst)};
}

CheckLine spring_gradients(std::mt19937_64& rng) {
  SpringConfig cfg;
  cfg.hidden = {4, 4};
  const SpringProblem problem(cfg);
  const Vector x = problem.initial_point(rng());
  const ProblemEval e = problem.evaluate(x, Batch{}, true);
  const double h = 1e-6;
  double worst = 0.0;
  Vector xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const double fd = (problem.objective(xp) - problem.objective(xm)) / (2 * h);
    worst = std::max(worst, std::abs(fd - e.g[i]) / (1.0 + std::abs(fd)));
    const Vector cp = problem.constraints(xp), cm = problem.constraints(xm);
    for (std::size_t r = 0; r < cp.size(); ++r) {
      const double fdc = (cp[r] - cm[r]) / (2 * h);
      worst = std::max(worst, std::abs(fdc - e.J(r, i)) / (1.0 + std::abs(fdc)));
    }
    xp[i] = xm[i] = x[i];
  }
  return {"spring gradient and jacobian match finite differences", worst <= 1e-5, "max rel err " + sci(worst)};
}

CheckLine series_bounds() {
  // The closed-form bounds equal the infinite sums, so a double partial sum can
  // land on or a rounding error above them; the exact slack is checked in the tests.
  bool ok = true;
  double excess = -INFINITY;
  for (double beta : {0.5, 0.9, 0.99}) {
    double s0 = 0, s1 = 0, s2 = 0, h1 = 0, h2 = 0, p = 1;
    for (int k = 0; k < 100000; ++k, p *= beta) {
      s0 += p;
      s1 += p * k;
      s2 += p * k * k;
      h1 += p * std::sqrt(k + 1.0);
      h2 += p * std::sqrt(static_cast<double>(k)) * (k + 1.0);
    }
    const double q = 1.0 - beta;
    const double bounds[] = {1 / q, beta / (q * q), beta * (1 + beta) / (q * q * q), 2 / std::pow(q, 1.5),
                             4 * beta / std::pow(q, 2.5)};
    const double sums[] = {s0, s1, s2, h1, h2};
    for (int i = 0; i < 5; ++i) {
      ok = ok && sums[i] <= bounds[i] * (1 + 1e-12);
      excess = std::max(excess, (sums[i] - bounds[i]) / bounds[i]);
    }
  }
  return {"momentum series stay below their bounds to double rounding", ok, "max relative excess " + sci(excess)};
}

CheckLine tau_identity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    TauConstants k{u(rng), 0.0, 0.0, u(rng)};
    const double a = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const double b = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    k.rho_min = std::min(a, b);
    k.rho_max = std::max(a, b);
    const double tau = tau_from_constants(k);
    // The defining balance: sigma rho_min (1 - tau) = tau kappa rho_max.
    const double lhs = k.sigma_min * k.rho_min * (1.0 - tau);
    const double rhs = tau * k.kappa_grad * k.rho_max;
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  return {"merit parameter balances its defining identity", worst <= 1e-12, "max rel err " + sci(worst)};
}

CheckLine eta_monotone() {
  double prev = 0.0;
  bool ok = true;
  for (std::size_t k = 1; k <= 20000; ++k) {
    const double e = bias_correction(k, 0.9, 0.999);
    ok = ok && e >= prev;
    prev = e;
  }
  const double limit = 0.1 / std::sqrt(0.001);
  ok = ok && prev <= limit && limit - prev < 1e-6;
  return {"adam bias correction increases to its limit", ok, "eta(20000) " + sci(prev)};
}

CheckLine short_run_feasibility() {
  double worst = 0.0;
  for (auto kind : {OptimizerKind::kSqpHeavyball, OptimizerKind::kSqpAdam, OptimizerKind::kAdamCon}) {
    ExperimentConfig cfg;
    cfg.problem = "circle";
    cfg.optimizer = kind;
    cfg.iterations = 200;
    cfg.hyper.alpha = 0.01;
    cfg.noise_sigma = 0.1;
    const RunResult r = run_experiment(cfg);
    worst = std::max(worst, r.max_linearized_residual);
  }
  return {"directions satisfy the linearized constraint", worst <= 1e-10, "max residual " + sci(worst)};
}

}  // namespace

std::vector<CheckLine> run_self_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckLine> out;
  auto guarded = [&](auto&& fn, const char* name) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded([&] { return kkt_decomposition(rng); }, "kkt decomposition");
  guarded([&] { return spring_gradients(rng); }, "spring gradients");
  guarded([] { return series_bounds(); }, "series bounds");
  guarded([&] { return tau_identity(rng); }, "tau identity");
  guarded([] { return eta_monotone(); }, "eta monotone");
  guarded([] { return short_run_feasibility(); }, "feasibility");
  return out;
}

}  // namespace psqp
