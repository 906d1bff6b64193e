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

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "psqp/model.hpp"
#include "psqp/problems.hpp"
#include "psqp/seeds.hpp"

using namespace psqp;

namespace {

oracle::Taylor2 exact_taylor(double t, const SpringConfig& cfg) {
  const auto tt = oracle::Taylor2::variable(t);
  const oracle::Taylor2 decay = oracle::exp(-cfg.delta() * tt);
  const oracle::Taylor2 wave = oracle::cos(oracle::Taylor2::constant(cfg.phase) + cfg.damped_frequency() * tt);
  return 2.0 * cfg.amplitude * (decay * wave);
}

}  // namespace

TEST_CASE("batch sampler partitions each epoch") {
  const BatchSampler s(30, 0.5, 99);
  CHECK(s.batch_size() == 15);
  CHECK(s.batches_per_epoch() == 2);
  for (std::size_t epoch = 0; epoch < 5; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::size_t b = 1; b <= 2; ++b) {
      const auto idx = s.indices_for_iteration(epoch * 2 + b);
      CHECK(idx.size() == 15);
      CHECK(std::is_sorted(idx.begin(), idx.end()));
      seen.insert(idx.begin(), idx.end());
    }
    CHECK(seen.size() == 30);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 30);
  }
  CHECK(s.indices_for_iteration(7) == BatchSampler(30, 0.5, 99).indices_for_iteration(7));
  CHECK(s.indices_for_iteration(1) != s.indices_for_iteration(3));

  const BatchSampler third(10, 0.3, 1);
  CHECK(third.batch_size() == 3);
  CHECK(third.batches_per_epoch() == 4);
  CHECK(third.indices_for_iteration(4).size() == 1);  // ragged last batch

  CHECK(BatchSampler(30, 1.0, 5).indices_for_iteration(3).empty());
  CHECK(BatchSampler(0, 0.5, 5).is_full());
  CHECK_THROWS_AS(BatchSampler(30, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(BatchSampler(30, 1.5, 1), std::invalid_argument);
}

TEST_CASE("circle problem stationarity at known points") {
  const auto p = circle_problem();
  const ProblemEval at_min = p->evaluate(Vector{1.0, 0.0}, Batch{}, true);
  CHECK(at_min.c == Vector{0.0});
  CHECK(norm2(project_null(at_min.J, at_min.g)) == 0.0);
  // Multiplier y = 1: grad f + J^T y = 0.
  CHECK(norm_inf(add(at_min.g, multiply_transpose(at_min.J, Vector{1.0}))) == 0.0);

  const ProblemEval top = p->evaluate(Vector{0.0, 1.0}, Batch{}, true);
  CHECK(top.c == Vector{0.0});
  CHECK(top.g == Vector{-4.0, 2.0});
  CHECK(norm2(project_null(top.J, top.g)) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(p->initial_point(0) == Vector{0.5, 1.5});
}

TEST_CASE("linear problem minimizer and constant projection") {
  const auto p = linear_problem();
  const Vector xs{0.5, 0.5};
  const ProblemEval e = p->evaluate(xs, Batch{}, true);
  CHECK(p->objective(xs) == 0.25);
  CHECK(e.c == Vector{0.0});
  const KktSolution k = kkt_solve_direct(e.J, e.g, e.c);
  CHECK(norm_inf(k.s) <= 1e-15);
  CHECK(k.y[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(p->evaluate(Vector{3.0, -7.0}, Batch{}, true).J == e.J);
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(2);
  for (const auto& p : {circle_problem(), linear_problem()}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = oracle::random_vector(rng, 2);
      const ProblemEval e = p->evaluate(x, Batch{}, true);
      const Vector fd = oracle::gradient([&](const Vector& v) { return p->objective(v); }, x, 1e-6);
      CHECK(norm_inf(subtract(e.g, fd)) <= 1e-5 * (1.0 + norm_inf(fd)));
      const Vector jfd = oracle::gradient([&](const Vector& v) { return p->constraints(v)[0]; }, x, 1e-6);
      CHECK(norm_inf(subtract(e.J.row(0), jfd)) <= 1e-5 * (1.0 + norm_inf(jfd)));
    }
  }
}

TEST_CASE("gradient noise is keyed, reproducible and centred") {
  const auto quiet = circle_problem(0.0);
  const Vector x{0.3, 0.8};
  Batch keyed;
  keyed.noise_key = 17;
  CHECK(quiet->evaluate(x, keyed).g == quiet->evaluate(x, keyed).g);

  const auto noisy = circle_problem(0.1);
  CHECK(noisy->evaluate(x, keyed).g == noisy->evaluate(x, keyed).g);
  CHECK(noisy->evaluate(x, Batch{}).g == quiet->evaluate(x, Batch{}).g);  // no key: exact
  const Vector exact = quiet->evaluate(x, Batch{}).g;
  Vector mean(2, 0.0);
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    Batch b;
    b.noise_key = mix_seed(5, static_cast<std::uint64_t>(k));
    axpy(1.0 / draws, subtract(noisy->evaluate(x, b).g, exact), mean);
  }
  const double se = 0.1 / std::sqrt(static_cast<double>(draws));
  for (double m : mean) CHECK(std::abs(m) <= 4.0 * se);
}

TEST_CASE("spring closed form") {
  const SpringConfig cfg;
  CHECK(spring_exact(0.0, cfg) == 1.0);
  CHECK(cfg.delta() == 2.0);
  CHECK(cfg.natural_frequency() == 20.0);
  CHECK(cfg.damped_frequency() == doctest::Approx(std::sqrt(396.0)).epsilon(1e-15));

  SpringConfig heavy = cfg;
  heavy.friction = 40.0;  // delta = 20 = w0
  CHECK_THROWS_AS(heavy.damped_frequency(), Overdamped);
  CHECK_THROWS_AS(SpringProblem{heavy}, Overdamped);

  const SpringProblem p(cfg);
  for (double t : p.residual_times()) {
    const JetValue j = spring_exact_jet(t, cfg);
    const oracle::Taylor2 ref = exact_taylor(t, cfg);
    CHECK(j.val == doctest::Approx(ref.v).epsilon(1e-13));
    CHECK(j.d1 == doctest::Approx(ref.d1).epsilon(1e-12));
    CHECK(j.d2 == doctest::Approx(ref.d2).epsilon(1e-12));
    CHECK(std::abs(cfg.mass * j.d2 + cfg.friction * j.d1 + cfg.stiffness * j.val) <= 1e-9);
    CHECK(std::abs(cfg.mass * ref.d2 + cfg.friction * ref.d1 + cfg.stiffness * ref.v) <= 1e-9);
  }
  for (double t : cfg.constraint_times) {
    const JetValue j = spring_exact_jet(t, cfg);
    CHECK(std::abs(cfg.mass * j.d2 + cfg.friction * j.d1 + cfg.stiffness * j.val) <= 1e-9);
  }
}

TEST_CASE("spring training data layout") {
  const SpringProblem p;
  REQUIRE(p.residual_times().size() == 30);
  REQUIRE(p.data_times().size() == 10);
  CHECK(p.residual_times().front() == 0.0);
  CHECK(p.residual_times().back() == 1.0);
  CHECK(p.residual_times()[29 - 1] == doctest::Approx(28.0 / 29.0).epsilon(1e-15));
  CHECK(p.data_times().back() == doctest::Approx(0.4).epsilon(1e-15));
  for (std::size_t j = 0; j < 10; ++j) CHECK(p.data_targets()[j] == spring_exact(p.data_times()[j], p.config()));
  CHECK(p.num_constraints() == 3);
  CHECK(p.dim() == 2209);

  std::ostringstream os;
  p.write_training_data(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("kind,t,target\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 10 + 30 + 3);
}

TEST_CASE("spring evaluation is deterministic and consistent with the plain objective") {
  SpringConfig cfg;
  cfg.hidden = {8, 8};
  const SpringProblem p(cfg);
  const Vector x = p.initial_point(3);
  const ProblemEval a = p.evaluate(x, Batch{}, true), b = p.evaluate(x, Batch{}, true);
  CHECK(a.f_est == b.f_est);
  CHECK(a.g == b.g);
  CHECK(a.c == b.c);
  CHECK(a.J == b.J);
  CHECK(a.f_est == doctest::Approx(p.objective(x)).epsilon(1e-13));
  const Vector c = p.constraints(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.c[i] == doctest::Approx(c[i]).epsilon(1e-12));

  const ProblemEval unc = p.evaluate(x, Batch{}, false);
  CHECK(unc.c.empty());
  CHECK(unc.J.rows() == 0);
  CHECK(unc.g == a.g);

  Batch bad;
  bad.indices = {30};
  CHECK_THROWS_AS(p.evaluate(x, bad), std::out_of_range);
  CHECK_THROWS_AS(p.evaluate(Vector(3, 0.0), Batch{}), DimensionMismatch);
}

TEST_CASE("spring gradients and jacobian rows match finite differences") {
  const SpringProblem p;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = p.initial_point(rng());
    const ProblemEval e = p.evaluate(x, Batch{}, true);
    const Vector fd = oracle::gradient([&](const Vector& v) { return p.objective(v); }, x, 1e-6);
    CHECK(norm_inf(subtract(e.g, fd)) <= 1e-5 * (1.0 + norm_inf(fd)));
    for (std::size_t i = 0; i < 3; ++i) {
      const Vector jfd = oracle::gradient([&](const Vector& v) { return p.constraints(v)[i]; }, x, 1e-6);
      CHECK(norm_inf(subtract(e.J.row(i), jfd)) <= 1e-5 * (1.0 + norm_inf(jfd)));
    }
  }
}

TEST_CASE("half batches give unbiased spring gradients") {
  const SpringProblem p;
  const Vector x = p.initial_point(21);
  const ProblemEval full = p.evaluate(x, Batch{}, true);
  const NullSpaceProjector proj(full.J);
  const std::size_t n = x.size();
  const BatchSampler sampler(30, 0.5, 77);

  // Within an epoch the two halves average to the full gradient exactly.
  const ProblemEval h1 = p.evaluate(x, Batch{sampler.indices_for_iteration(1), std::nullopt}, false);
  const ProblemEval h2 = p.evaluate(x, Batch{sampler.indices_for_iteration(2), std::nullopt}, false);
  double pair_err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    pair_err = std::max(pair_err, std::abs(0.5 * (h1.g[i] + h2.g[i]) - full.g[i]));
  CHECK(pair_err <= 1e-12 * (1.0 + norm_inf(full.g)));

  // Independent draws: the first half-batch of 2000 different epochs.
  const int draws = 2000;
  Vector mean(n, 0.0), m2(n, 0.0);
  std::vector<double> dev_sq;
  for (int d = 0; d < draws; ++d) {
    const auto idx = sampler.indices_for_iteration(2 * static_cast<std::size_t>(d) + 1);
    const ProblemEval e = p.evaluate(x, Batch{idx, std::nullopt}, false);
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = e.g[i] - mean[i];
      mean[i] += delta / (d + 1);
      m2[i] += delta * (e.g[i] - mean[i]);
    }
    const Vector pd = proj.project(subtract(e.g, full.g));
    dev_sq.push_back(dot(pd, pd));
  }
  std::size_t beyond3 = 0;
  double max_z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double se = std::sqrt(m2[i] / (draws - 1) / draws);
    const double z = se > 0 ? std::abs(mean[i] - full.g[i]) / se : (mean[i] == full.g[i] ? 0.0 : INFINITY);
    max_z = std::max(max_z, z);
    beyond3 += z > 3.0;
  }
  // With ~2200 components, about 0.27% exceed 3 standard errors by chance.
  MESSAGE("components beyond 3 SE: " << beyond3 << " of " << n << ", max |z| = " << max_z);
  CHECK(static_cast<double>(beyond3) <= 0.01 * static_cast<double>(n));
  CHECK(max_z <= 5.0);  // two-sided Bonferroni bound for n tests at level 1e-3

  double mean_dev = 0.0;
  for (double v : dev_sq) mean_dev += v / draws;
  double var_dev = 0.0;
  for (double v : dev_sq) var_dev += (v - mean_dev) * (v - mean_dev) / (draws - 1);
  MESSAGE("projected deviation: mean ||P(g - grad f)||^2 = " << mean_dev << ", sample variance " << var_dev);
  CHECK(std::isfinite(var_dev));
}

TEST_CASE("a network fitted to the exact solution nearly satisfies the constraints") {
  const std::filesystem::path file = std::filesystem::path(PSQP_TEST_DATA) / "spring_fit.bin";
  REQUIRE(std::filesystem::exists(file));
  const StoredParams stored = load_params(file);
  const SpringProblem p;
  REQUIRE(stored.widths == p.param_widths());

  // Premise: the fit reproduces the closed form to 1e-6 on a dense grid.
  double fit_err = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    fit_err = std::max(fit_err, std::abs(forward(p.spec(), stored.theta, Vector{t}).front() - spring_exact(t, p.config())));
  }
  MESSAGE("max |u - u*| of the fixture: " << fit_err);
  REQUIRE(fit_err <= 1e-6);

  const ProblemEval e = p.evaluate(stored.theta, Batch{}, true);
  CHECK(norm_inf(e.c) <= 1e-3);
}
