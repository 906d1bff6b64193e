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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psqp/linalg.hpp"
#include "psqp/problems.hpp"

namespace psqp {

/// Per-iteration positive scalar sequence. Constant by default; an explicit
/// list gives values for k = 1, 2, ... and holds the last value afterwards.
class Schedule {
 public:
  Schedule(double constant = 1.0);  // NOLINT: a plain number is the common case
  explicit Schedule(std::vector<double> values);

  double at(std::size_t k) const;
  double min() const;
  double max() const;
  std::span<const double> values() const noexcept { return values_; }

  /// Comma-separated form accepted by parse.
  std::string to_string() const;
  static Schedule parse(std::string_view text);

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  std::vector<double> values_;
};

struct Hyper {
  double alpha = 5e-4;
  double beta = 0.9;    // heavy-ball momentum
  double beta1 = 0.9;   // Adam first moment
  double beta2 = 0.999; // Adam second moment
  double eps = 1e-7;
  Schedule rho{1.0};  // values in (0, 1]
  Schedule h{1.0};    // values > 0
  bool jitter = false;  // diagonal shift on J J^T, see NullSpaceProjector

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class OptimizerKind { kSqpHeavyball, kSqpAdam, kSqpBaseline, kAdamUnc, kAdamCon };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);
bool uses_constraints(OptimizerKind kind);
bool is_adam(OptimizerKind kind);

struct HeavyBallState {
  Vector r;
  std::size_t k = 0;
};

struct AdamState {
  Vector r;
  Vector s;
  std::size_t k = 0;
};

/// Search direction of one iteration; the caller applies x += alpha * d.
struct Direction {
  Vector d;
  Vector v;          // normal component
  double eta = 0.0;  // Adam bias correction; 0 for the other steppers
  double rho = 1.0;  // rho_k used for v
};

/// (1 - beta1) sqrt(1 - beta2^k) / sqrt(1 - beta2), for k >= 1.
double bias_correction(std::size_t k, double beta1, double beta2);

/// Projected heavy-ball SQP:
///   v = -rho J^T (J J^T)^{-1} c,  u = -P g / h,  r <- beta r + u,  d = v + P r.
Direction heavyball_step(HeavyBallState& state, const ProblemEval& eval, const Hyper& hyper);

/// Projected Adam SQP: momenta of u = -P g / h, d = v + eta P diag(s + eps)^{-1/2} r.
Direction adam_sqp_step(AdamState& state, const ProblemEval& eval, const Hyper& hyper);

/// Unconstrained Adam on g alone; adam_sqp_step with m = 0.
Direction adam_unc_step(AdamState& state, std::span<const double> g, const Hyper& hyper);

/// Adam SQP whose momenta accumulate u = -g / h without projection. Only the
/// final scaled step is projected.
Direction adam_con_step(AdamState& state, const ProblemEval& eval, const Hyper& hyper);

/// Deterministic SQP with H = I: d solves the full KKT system directly.
Direction sqp_baseline_step(const ProblemEval& eval);

/// Owns the state of one of the five steppers.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, Hyper hyper);

  OptimizerKind kind() const noexcept { return kind_; }
  const Hyper& hyper() const noexcept { return hyper_; }
  std::size_t iteration() const noexcept;

  Direction step(const ProblemEval& eval);

  /// State after the latest step. Empty vectors before the first one.
  const Vector& momentum() const;
  const Vector& second_moment() const;

  /// int32 kind, int32 k, int32 n, r as float64, then s for Adam kinds.
  void write_state(std::ostream& os) const;
  void read_state(std::istream& is);

 private:
  OptimizerKind kind_;
  Hyper hyper_;
  std::variant<HeavyBallState, AdamState> state_;
  std::size_t baseline_k_ = 0;
};

}  // namespace psqp
