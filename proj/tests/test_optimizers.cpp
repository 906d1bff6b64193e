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

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "oracles.hpp"
#include "psqp/linalg.hpp"
#include "psqp/optimizers.hpp"
#include "psqp/problems.hpp"
#include "series.hpp"

using namespace psqp;

namespace {

ProblemEval random_eval(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  ProblemEval e;
  e.J = oracle::random_matrix(rng, m, n);
  e.g = oracle::random_vector(rng, n);
  e.c = oracle::random_vector(rng, m);
  e.f_est = 0.0;
  return e;
}

double linearized_residual(const ProblemEval& e, const Direction& dir) {
  Vector r = multiply(e.J, dir.d);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += dir.rho * e.c[i];
  return norm_inf(r) / (1.0 + norm_inf(e.c));
}

Hyper plain(double beta = 0.9) {
  Hyper h;
  h.beta = beta;
  return h;
}

}  // namespace

TEST_CASE("bias correction") {
  for (double b2 : {0.9, 0.99, 0.999, 0.99999}) CHECK(bias_correction(1, 0.9, b2) == doctest::Approx(0.1).epsilon(1e-15));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const double b1 = 0.99 * unit(rng);
    const double b2 = b1 + (1.0 - b1) * (0.01 + 0.98 * unit(rng));
    CHECK(bias_correction(2, b1, b2) > bias_correction(1, b1, b2));
  }
  double prev = 0.0;
  for (std::size_t k = 1; k <= 20000; ++k) {
    const double eta = bias_correction(k, 0.9, 0.999);
    REQUIRE(eta >= prev);
    prev = eta;
  }
  CHECK(bias_correction(100000, 0.9, 0.999) == doctest::Approx(0.1 / std::sqrt(0.001)).epsilon(1e-12));
  CHECK(0.1 / std::sqrt(0.001) == doctest::Approx(3.16228).epsilon(1e-6));
}

TEST_CASE("heavy-ball without momentum is the KKT step") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = 1 + t % 3, n = m + 1 + t % 7;
    const ProblemEval e = random_eval(rng, m, n);
    HeavyBallState st;
    const Direction dir = heavyball_step(st, e, plain(0.0));
    CHECK(oracle::max_abs_diff(dir.d, oracle::kkt_step(e.J, e.g, e.c)) <= 1e-10);
  }
}

TEST_CASE("heavy-ball at a stationary feasible point") {
  std::mt19937_64 rng(12);
  ProblemEval e = random_eval(rng, 2, 5);
  e.g.assign(5, 0.0);
  e.c.assign(2, 0.0);
  HeavyBallState st;
  Direction dir = heavyball_step(st, e, plain());
  CHECK(oracle::max_abs(dir.d) == 0.0);
  CHECK(st.k == 1);

  st.r = oracle::random_vector(rng, 5);
  const Vector before = st.r;
  dir = heavyball_step(st, e, plain(0.7));
  for (std::size_t i = 0; i < 5; ++i) CHECK(st.r[i] == doctest::Approx(0.7 * before[i]).epsilon(1e-15));
}

TEST_CASE("constrained steppers keep linearized feasibility and orthogonality") {
  std::mt19937_64 rng(13);
  Hyper hy;
  hy.rho = Schedule({0.3, 0.7, 1.0});
  hy.h = Schedule({2.0, 0.5});
  HeavyBallState hb;
  AdamState as, ac;
  double worst = 0.0, worst_orth = 0.0;
  for (int t = 0; t < 60; ++t) {
    const ProblemEval e = random_eval(rng, 3, 9);
    for (const Direction& dir : {heavyball_step(hb, e, hy), adam_sqp_step(as, e, hy), adam_con_step(ac, e, hy)}) {
      worst = std::max(worst, linearized_residual(e, dir));
      const Vector t_part = subtract(dir.d, dir.v);
      worst_orth = std::max(worst_orth, std::abs(dot(dir.v, t_part)) / (1.0 + norm2(dir.v) * norm2(t_part)));
    }
  }
  CHECK(worst <= 1e-8);
  CHECK(worst_orth <= 1e-8);
  CHECK(hb.k == 60);
}

TEST_CASE("Adam first step closed form") {
  std::mt19937_64 rng(14);
  const ProblemEval e = random_eval(rng, 2, 6);
  Hyper hy;
  hy.h = Schedule(2.0);
  AdamState st;
  const Direction dir = adam_sqp_step(st, e, hy);

  const Matrix p = oracle::projection(e.J);
  Vector u = oracle::mat_vec(p, e.g);
  for (double& x : u) x /= -2.0;
  Vector scaled_u(6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(st.r[i] == doctest::Approx(u[i]).epsilon(1e-13));
    CHECK(st.s[i] == doctest::Approx(u[i] * u[i]).epsilon(1e-13));
    scaled_u[i] = u[i] / std::sqrt(u[i] * u[i] + hy.eps);
  }
  const Vector tangential = oracle::mat_vec(p, scaled_u);
  const Vector v = oracle::kkt_step(e.J, Vector(6, 0.0), e.c);  // normal step alone
  CHECK(dir.eta == doctest::Approx(1.0 - hy.beta1).epsilon(1e-15));
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(dir.d[i] == doctest::Approx(v[i] + (1.0 - hy.beta1) * tangential[i]).epsilon(1e-10));
}

TEST_CASE("unconstrained Adam") {
  Hyper hy;
  AdamState st;
  const Vector one{1.0};
  const Direction dir = adam_unc_step(st, one, hy);
  CHECK(dir.d[0] == doctest::Approx(-(1.0 - hy.beta1) / std::sqrt(1.0 + hy.eps)).epsilon(1e-15));

  std::mt19937_64 rng(15);
  AdamState a, b;
  for (int t = 0; t < 20; ++t) {
    ProblemEval e;
    e.g = oracle::random_vector(rng, 4);
    e.J = Matrix(0, 4);
    const Direction x = adam_unc_step(a, e.g, hy);
    const Direction y = adam_sqp_step(b, e, hy);
    REQUIRE(x.d == y.d);
  }

  // f(x) = x^2 / 2 from x = 1.
  Hyper small;
  small.alpha = 0.1;
  AdamState s;
  Vector x{1.0};
  for (int t = 0; t < 100; ++t) axpy(small.alpha, adam_unc_step(s, x, small).d, x);
  CHECK(std::abs(x[0]) < 1.0);
  CHECK(std::abs(x[0]) < 0.5);
}

TEST_CASE("constrained Adam momentum bookkeeping") {
  std::mt19937_64 rng(16);
  const Matrix j = oracle::random_matrix(rng, 2, 7);
  const Matrix p = oracle::projection(j);
  Hyper hy;

  SUBCASE("gradient in the null space") {
    ProblemEval e;
    e.J = j;
    e.c = oracle::random_vector(rng, 2);
    e.g = oracle::mat_vec(p, oracle::random_vector(rng, 7));
    AdamState a, b;
    const Direction x = adam_sqp_step(a, e, hy);
    const Direction y = adam_con_step(b, e, hy);
    CHECK(oracle::max_abs_diff(x.d, y.d) <= 1e-12);
  }

  SUBCASE("row-space parts accumulate in the momentum") {
    AdamState a, b;
    Vector expected(7, 0.0);
    for (int t = 0; t < 25; ++t) {
      ProblemEval e;
      e.J = j;
      e.c = oracle::random_vector(rng, 2);
      e.g = oracle::random_vector(rng, 7);
      adam_sqp_step(a, e, hy);
      const Direction dir = adam_con_step(b, e, hy);
      CHECK(linearized_residual(e, dir) <= 1e-8);
      const Vector row_part = subtract(e.g, oracle::mat_vec(p, e.g));
      for (std::size_t i = 0; i < 7; ++i) expected[i] = hy.beta1 * expected[i] - row_part[i];
    }
    CHECK(oracle::max_abs_diff(subtract(b.r, a.r), expected) <= 1e-10);
  }
}

TEST_CASE("heavy-ball momentum is the discounted sum of projected steps") {
  std::mt19937_64 rng(17);
  Hyper hy = plain(0.85);
  hy.h = Schedule({1.0, 3.0, 0.5, 2.0});
  HeavyBallState st;
  std::vector<Vector> us;
  const std::size_t steps = 40;
  for (std::size_t k = 1; k <= steps; ++k) {
    const ProblemEval e = random_eval(rng, 2, 6);  // a fresh J each time
    Vector u = oracle::mat_vec(oracle::projection(e.J), e.g);
    for (double& x : u) x /= -hy.h.at(k);
    us.push_back(u);
    heavyball_step(st, e, hy);
  }
  Vector sum(6, 0.0);
  for (std::size_t i = 1; i <= steps; ++i)
    for (std::size_t c = 0; c < 6; ++c) sum[c] += std::pow(hy.beta, static_cast<double>(steps - i)) * us[i - 1][c];
  CHECK(oracle::max_abs_diff(st.r, sum) <= 1e-10);
}

TEST_CASE("momentum series bounds") {
  const auto tight = series::power_sums(0.9, 100000);
  REQUIRE(tight.size() == 3);
  CHECK(tight[0].bound == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(tight[1].bound == doctest::Approx(90.0).epsilon(1e-14));
  CHECK(tight[2].bound == doctest::Approx(1710.0).epsilon(1e-14));
  for (const auto& o : tight) {
    INFO(o.name);
    CHECK(o.positive);
    CHECK(o.log10_slack > -5000.0);  // the tail beta^K K^p, resolved rather than rounded away
  }
  for (double beta : {0.5, 0.9, 0.99})
    for (const auto& o : series::root_sums(beta, 100000)) {
      INFO(o.name << " beta " << beta);
      CHECK(o.positive);
      CHECK(o.sum < o.bound);
    }
}

TEST_CASE("Adam second moment stays under its cap") {
  std::mt19937_64 rng(18);
  const double cap_u = 2.5;
  std::uniform_real_distribution<double> draw(-cap_u, cap_u);
  Hyper hy;
  hy.beta2 = 0.99;
  AdamState st;
  const double cap = cap_u * cap_u / (1.0 - hy.beta2);
  double worst = 0.0;
  for (int t = 0; t < 3000; ++t) {
    Vector g(5);
    for (double& x : g) x = draw(rng);
    if (t > 1000) g.assign(5, cap_u);  // saturate to approach the cap
    adam_unc_step(st, g, hy);
    for (double s : st.s) {
      REQUIRE(s >= 0.0);
      worst = std::max(worst, s);
    }
  }
  CHECK(worst <= cap);
  CHECK(worst >= 0.99 * cap);
}

TEST_CASE("heavy-ball without momentum reproduces the baseline along a run") {
  CircleProblem circle;
  Vector x = circle.initial_point(0);
  Optimizer hb(OptimizerKind::kSqpHeavyball, plain(0.0));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const ProblemEval e = circle.evaluate(x, Batch{});
    const Direction d = hb.step(e);
    const KktSolution ref = kkt_solve_direct(e.J, e.g, e.c);
    worst = std::max(worst, oracle::max_abs_diff(d.d, ref.s));
    axpy(0.05, d.d, x);
  }
  CHECK(worst <= 1e-7);
}

TEST_CASE("rank-deficient Jacobian") {
  ProblemEval e;
  e.J = Matrix(2, 3, std::vector<double>{1, 2, 3, 2, 4, 6});
  e.g = {1, 1, 1};
  e.c = {0.1, 0.2};
  HeavyBallState hb;
  AdamState ad;
  CHECK_THROWS_AS(heavyball_step(hb, e, plain()), NotPositiveDefinite);
  CHECK_THROWS_AS(adam_sqp_step(ad, e, Hyper{}), NotPositiveDefinite);
  Hyper jit;
  jit.jitter = true;
  CHECK_NOTHROW(heavyball_step(hb, e, jit));
}

TEST_CASE("schedules") {
  const Schedule s = Schedule::parse("0.5, 0.25,1");
  CHECK(s.at(1) == 0.5);
  CHECK(s.at(2) == 0.25);
  CHECK(s.at(3) == 1.0);
  CHECK(s.at(100) == 1.0);
  CHECK(s.min() == 0.25);
  CHECK(s.max() == 1.0);
  CHECK(Schedule::parse(s.to_string()) == s);
  CHECK(Schedule(0.3).at(7) == 0.3);
  CHECK_THROWS_AS(s.at(0), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::parse("1,,2"), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::parse("0.5x"), std::invalid_argument);
}

TEST_CASE("hyperparameter ranges") {
  CHECK_NOTHROW(Hyper{}.validate());
  auto rejects = [](auto mutate, const char* field) {
    Hyper h;
    mutate(h);
    try {
      h.validate();
      return false;
    } catch (const std::invalid_argument& e) {
      return std::string(e.what()).find(field) != std::string::npos;
    }
  };
  CHECK(rejects([](Hyper& h) { h.alpha = 0.0; }, "alpha"));
  CHECK(rejects([](Hyper& h) { h.alpha = 1.5; }, "alpha"));
  CHECK(rejects([](Hyper& h) { h.beta = 1.0; }, "beta"));
  CHECK(rejects([](Hyper& h) { h.beta2 = h.beta1; }, "beta2"));
  CHECK(rejects([](Hyper& h) { h.eps = 0.0; }, "eps"));
  CHECK(rejects([](Hyper& h) { h.rho = Schedule({0.5, 1.5}); }, "rho"));
  CHECK(rejects([](Hyper& h) { h.h = Schedule(0.0); }, "h values"));
}

TEST_CASE("optimizer names and state round-trip") {
  for (auto kind : {OptimizerKind::kSqpHeavyball, OptimizerKind::kSqpAdam, OptimizerKind::kSqpBaseline,
                    OptimizerKind::kAdamUnc, OptimizerKind::kAdamCon})
    CHECK(parse_optimizer(to_string(kind)) == kind);
  CHECK_FALSE(parse_optimizer("sgd").has_value());
  CHECK_FALSE(uses_constraints(OptimizerKind::kAdamUnc));
  CHECK(is_adam(OptimizerKind::kAdamCon));

  for (auto kind : {OptimizerKind::kSqpHeavyball, OptimizerKind::kSqpAdam, OptimizerKind::kAdamCon}) {
    std::mt19937_64 rng(19);
    Optimizer a(kind, Hyper{});
    for (int t = 0; t < 7; ++t) a.step(random_eval(rng, 2, 5));
    std::stringstream buf;
    a.write_state(buf);
    Optimizer b(kind, Hyper{});
    b.read_state(buf);
    CHECK(b.iteration() == 7);
    CHECK(b.momentum() == a.momentum());
    CHECK(b.second_moment() == a.second_moment());
    const ProblemEval e = random_eval(rng, 2, 5);
    CHECK(a.step(e).d == b.step(e).d);
  }

  std::stringstream buf;
  Optimizer(OptimizerKind::kSqpAdam, Hyper{}).write_state(buf);
  Optimizer other(OptimizerKind::kSqpHeavyball, Hyper{});
  CHECK_THROWS(other.read_state(buf));
}
