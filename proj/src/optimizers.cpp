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

#include "psqp/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "psqp/model.hpp"

namespace psqp {
namespace {

void check_eval(const ProblemEval& eval) {
  const std::size_t n = eval.g.size();
  if (eval.J.cols() != n && !(eval.J.rows() == 0 && eval.J.cols() == 0))
    throw DimensionMismatch("Jacobian columns do not match gradient length");
  if (eval.c.size() != eval.J.rows()) throw DimensionMismatch("constraint count does not match Jacobian rows");
}

Matrix jacobian_or_empty(const ProblemEval& eval) {
  if (eval.J.rows() == 0) return Matrix(0, eval.g.size());
  return eval.J;
}

void ensure_size(Vector& v, std::size_t n) {
  if (v.empty()) {
    v.assign(n, 0.0);
  } else if (v.size() != n) {
    throw DimensionMismatch("optimizer state dimension does not match the problem");
  }
}

// Shared tail of the Adam variants: updates the moments with u and forms
// d = v + eta P diag(s + eps)^{-1/2} r.
Direction adam_finish(AdamState& state, std::size_t k, const NullSpaceProjector& proj, Vector v, const Vector& u,
                      double rho, const Hyper& hyper) {
  const std::size_t n = u.size();
  Vector r = state.r;
  Vector s = state.s;
  ensure_size(r, n);
  ensure_size(s, n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = hyper.beta1 * r[i] + u[i];
    s[i] = hyper.beta2 * s[i] + u[i] * u[i];
  }
  const double eta = bias_correction(k, hyper.beta1, hyper.beta2);
  Vector scaled_r(n);
  for (std::size_t i = 0; i < n; ++i) scaled_r[i] = r[i] / std::sqrt(s[i] + hyper.eps);
  const Vector p = proj.project(scaled_r);

  Direction out;
  out.d = v;
  axpy(eta, p, out.d);
  out.v = std::move(v);
  out.eta = eta;
  out.rho = rho;

  state.r = std::move(r);
  state.s = std::move(s);
  state.k = k;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedule

Schedule::Schedule(double constant) : values_{constant} {}

Schedule::Schedule(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("schedule needs at least one value");
}

double Schedule::at(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("schedules are indexed from k = 1");
  return values_[std::min(k, values_.size()) - 1];
}

double Schedule::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Schedule::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::string Schedule::to_string() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? "," : "") << values_[i];
  return os.str();
}

Schedule Schedule::parse(std::string_view text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item(text.substr(pos, comma - pos));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw std::invalid_argument("bad schedule value '" + item + "'");
    values.push_back(v);
    pos = comma + 1;
  }
  return Schedule(std::move(values));
}

// ---------------------------------------------------------------------------
// Hyper

void Hyper::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0, 1]");
  if (!(beta >= 0.0 && beta < 1.0)) fail("beta must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 > beta1 && beta2 < 1.0)) fail("beta2 must lie in (beta1, 1)");
  if (!(eps > 0.0)) fail("eps must be positive");
  for (double r : rho.values())
    if (!(r > 0.0 && r <= 1.0)) fail("rho values must lie in (0, 1]");
  for (double v : h.values())
    if (!(v > 0.0) || !std::isfinite(v)) fail("h values must be positive");
}

// ---------------------------------------------------------------------------
// Kinds

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSqpHeavyball: return "sqp_heavyball";
    case OptimizerKind::kSqpAdam: return "sqp_adam";
    case OptimizerKind::kSqpBaseline: return "sqp_baseline";
    case OptimizerKind::kAdamUnc: return "adam_unc";
    case OptimizerKind::kAdamCon: return "adam_con";
  }
  return "unknown";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (auto kind : {OptimizerKind::kSqpHeavyball, OptimizerKind::kSqpAdam, OptimizerKind::kSqpBaseline,
                    OptimizerKind::kAdamUnc, OptimizerKind::kAdamCon})
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

bool uses_constraints(OptimizerKind kind) { return kind != OptimizerKind::kAdamUnc; }

bool is_adam(OptimizerKind kind) {
  return kind == OptimizerKind::kSqpAdam || kind == OptimizerKind::kAdamUnc || kind == OptimizerKind::kAdamCon;
}

// ---------------------------------------------------------------------------
// Steps

double bias_correction(std::size_t k, double beta1, double beta2) {
  if (k == 0) throw std::invalid_argument("bias correction is defined for k >= 1");
  return (1.0 - beta1) * std::sqrt(1.0 - std::pow(beta2, static_cast<double>(k))) / std::sqrt(1.0 - beta2);
}

Direction heavyball_step(HeavyBallState& state, const ProblemEval& eval, const Hyper& hyper) {
  check_eval(eval);
  const std::size_t n = eval.g.size();
  const std::size_t k = state.k + 1;
  const double rho = hyper.rho.at(k);
  const double h = hyper.h.at(k);
  const NullSpaceProjector proj(jacobian_or_empty(eval), hyper.jitter);

  Vector v = proj.normal_step(eval.c, rho);
  const Vector pg = proj.project(eval.g);
  Vector r = state.r;
  ensure_size(r, n);
  for (std::size_t i = 0; i < n; ++i) r[i] = hyper.beta * r[i] - pg[i] / h;

  Direction out;
  out.d = add(v, proj.project(r));
  out.v = std::move(v);
  out.rho = rho;
  state.r = std::move(r);
  state.k = k;
  return out;
}

Direction adam_sqp_step(AdamState& state, const ProblemEval& eval, const Hyper& hyper) {
  check_eval(eval);
  const std::size_t k = state.k + 1;
  const double rho = hyper.rho.at(k);
  const double h = hyper.h.at(k);
  const NullSpaceProjector proj(jacobian_or_empty(eval), hyper.jitter);
  Vector v = proj.normal_step(eval.c, rho);
  const Vector u = scaled(proj.project(eval.g), -1.0 / h);
  return adam_finish(state, k, proj, std::move(v), u, rho, hyper);
}

Direction adam_unc_step(AdamState& state, std::span<const double> g, const Hyper& hyper) {
  ProblemEval eval;
  eval.g.assign(g.begin(), g.end());
  eval.J = Matrix(0, g.size());
  return adam_sqp_step(state, eval, hyper);
}

Direction adam_con_step(AdamState& state, const ProblemEval& eval, const Hyper& hyper) {
  check_eval(eval);
  const std::size_t k = state.k + 1;
  const double rho = hyper.rho.at(k);
  const double h = hyper.h.at(k);
  const NullSpaceProjector proj(jacobian_or_empty(eval), hyper.jitter);
  Vector v = proj.normal_step(eval.c, rho);
  const Vector u = scaled(eval.g, -1.0 / h);
  return adam_finish(state, k, proj, std::move(v), u, rho, hyper);
}

Direction sqp_baseline_step(const ProblemEval& eval) {
  check_eval(eval);
  const Matrix j = jacobian_or_empty(eval);
  KktSolution sol = kkt_solve_direct(j, eval.g, eval.c);
  Direction out;
  out.d = std::move(sol.s);
  // Normal component for reporting: the part of d in range(J^T).
  out.v = j.rows() == 0 ? Vector(out.d.size(), 0.0) : subtract(out.d, NullSpaceProjector(j).project(out.d));
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(OptimizerKind kind, Hyper hyper) : kind_(kind), hyper_(std::move(hyper)) {
  hyper_.validate();
  if (is_adam(kind_)) state_ = AdamState{};
}

std::size_t Optimizer::iteration() const noexcept {
  if (kind_ == OptimizerKind::kSqpBaseline) return baseline_k_;
  return std::visit([](const auto& s) { return s.k; }, state_);
}

Direction Optimizer::step(const ProblemEval& eval) {
  switch (kind_) {
    case OptimizerKind::kSqpHeavyball: return heavyball_step(std::get<HeavyBallState>(state_), eval, hyper_);
    case OptimizerKind::kSqpAdam: return adam_sqp_step(std::get<AdamState>(state_), eval, hyper_);
    case OptimizerKind::kAdamUnc: return adam_unc_step(std::get<AdamState>(state_), eval.g, hyper_);
    case OptimizerKind::kAdamCon: return adam_con_step(std::get<AdamState>(state_), eval, hyper_);
    case OptimizerKind::kSqpBaseline: {
      Direction d = sqp_baseline_step(eval);
      ++baseline_k_;
      return d;
    }
  }
  throw std::logic_error("unknown optimizer kind");
}

const Vector& Optimizer::momentum() const {
  return std::visit([](const auto& s) -> const Vector& { return s.r; }, state_);
}

const Vector& Optimizer::second_moment() const {
  static const Vector kEmpty;
  if (const auto* a = std::get_if<AdamState>(&state_)) return a->s;
  return kEmpty;
}

void Optimizer::write_state(std::ostream& os) const {
  const Vector& r = momentum();
  write_i32(os, static_cast<std::int32_t>(kind_));
  write_i32(os, static_cast<std::int32_t>(iteration()));
  write_i32(os, static_cast<std::int32_t>(r.size()));
  for (double x : r) write_f64(os, x);
  if (const auto* a = std::get_if<AdamState>(&state_))
    for (double x : a->s) write_f64(os, x);
}

void Optimizer::read_state(std::istream& is) {
  const auto kind = static_cast<OptimizerKind>(read_i32(is));
  if (kind != kind_) throw std::runtime_error("checkpoint was written by a different optimizer");
  const std::int32_t k = read_i32(is);
  const std::int32_t n = read_i32(is);
  if (k < 0 || n < 0) throw std::runtime_error("corrupt optimizer state");
  Vector r(static_cast<std::size_t>(n));
  for (double& x : r) x = read_f64(is);
  if (auto* a = std::get_if<AdamState>(&state_)) {
    Vector s(static_cast<std::size_t>(n));
    for (double& x : s) x = read_f64(is);
    *a = AdamState{std::move(r), std::move(s), static_cast<std::size_t>(k)};
  } else if (kind_ == OptimizerKind::kSqpBaseline) {
    baseline_k_ = static_cast<std::size_t>(k);
  } else {
    state_ = HeavyBallState{std::move(r), static_cast<std::size_t>(k)};
  }
}

}  // namespace psqp
