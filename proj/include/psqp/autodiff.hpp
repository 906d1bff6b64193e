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
#include <span>
#include <stdexcept>
#include <vector>

namespace psqp {

class Tape;

class DivisionByZero : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class OpTag : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,
  kTanh,
  kSquare,
  kDot,
  kJetTanh1,
  kJetTanh2,
};

/// Handle to a scalar on a tape. A Var without a tape is a constant: it has
/// a value but no node, and operations do not record edges for it.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit constants read naturally in expressions

  double value() const noexcept { return value_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::int32_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t id, double value) : tape_(tape), id_(id), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
  double value_ = 0.0;
};

/// Scalar reverse-mode tape.
///
/// Nodes are appended in evaluation order, so every parent index is smaller
/// than its child's. Each node keeps its operation tag, value and a run of
/// (parent, local partial) edges in flat arrays. Leaves are the registered
/// differentiation variables; `backward` reports partials in leaf order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiation variable.
  Var leaf(double value);
  std::vector<Var> leaves(std::span<const double> values);

  /// Drops all nodes but keeps the allocations.
  void clear();

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t num_leaves() const noexcept { return leaf_ids_.size(); }
  std::size_t num_edges() const noexcept { return num_edges_; }

  OpTag tag(std::int32_t id) const { return tags_.at(static_cast<std::size_t>(id)); }
  double value(std::int32_t id) const { return values_.at(static_cast<std::size_t>(id)); }

  /// Local partials of node `id` with respect to its parents, in recording order.
  std::vector<double> local_partials(std::int32_t id) const;
  std::vector<std::int32_t> parent_ids(std::int32_t id) const;

  /// Appends a node. Constant operands are skipped; if every operand is
  /// constant the result is a constant Var and nothing is recorded.
  Var record(OpTag tag, double value, std::span<const Var> operands, std::span<const double> partials);

  /// Bulk form of record for fused n-ary nodes. open_node reserves room for
  /// up to `max_edges` edges; the writer fills them and close_node appends the
  /// node. Record nothing else on this tape while a writer is open.
  class EdgeWriter {
   public:
    void add(const Var& parent, double partial) {
      const bool live = !parent.is_constant();
      if (live && parent.tape() != tape_) throw std::invalid_argument("autodiff: operands live on different tapes");
      // Written unconditionally and kept only for live, nonzero edges; this
      // loop is the hot path of every fused node.
      parents_[count_] = parent.id();
      partials_[count_] = partial;
      count_ += static_cast<std::size_t>(live & (partial != 0.0));
    }

   private:
    friend class Tape;
    EdgeWriter(const Tape* tape, std::int32_t* parents, double* partials)
        : tape_(tape), parents_(parents), partials_(partials) {}
    const Tape* tape_;
    std::int32_t* parents_;
    double* partials_;
    std::size_t count_ = 0;
  };
  EdgeWriter open_node(std::size_t max_edges) {
    if (num_edges_ + max_edges > parents_.size()) grow_edges(num_edges_ + max_edges);
    return EdgeWriter(this, parents_.data() + num_edges_, partials_.data() + num_edges_);
  }
  Var close_node(const EdgeWriter& writer, OpTag tag, double value) {
    if (writer.tape_ != this) throw std::invalid_argument("autodiff: writer belongs to another tape");
    if (writer.count_ == 0) return Var(value);
    num_edges_ += writer.count_;
    const auto id = static_cast<std::int32_t>(values_.size());
    values_.push_back(value);
    tags_.push_back(tag);
    edge_end_.push_back(static_cast<std::uint32_t>(num_edges_));
    return Var(this, id, value);
  }

  /// d output / d leaf for every registered leaf, in registration order.
  std::vector<double> backward(const Var& output) const;

  /// Same as backward but writes into `leaf_grad` and reuses `adjoint` as
  /// scratch space across calls.
  void backward_into(const Var& output, std::span<double> leaf_grad, std::vector<double>& adjoint) const;

 private:
  std::vector<double> values_;
  std::vector<OpTag> tags_;
  std::vector<std::uint32_t> edge_end_;
  std::vector<std::int32_t> parents_;  // sized to capacity; num_edges_ are live
  std::vector<double> partials_;
  std::size_t num_edges_ = 0;
  std::vector<std::int32_t> leaf_ids_;

  void grow_edges(std::size_t need);
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);

/// sum_i a_i * b_i (+ bias) as one node.
Var dot(std::span<const Var> a, std::span<const Var> b, const Var& bias = Var(0.0));

/// Mean of squares as one node.
Var mean_square(std::span<const Var> a);

/// Truncated second-order Taylor coefficients with respect to a scalar input
/// t: (u, du/dt, d2u/dt2). Each component is a tape node, so it can itself be
/// differentiated with respect to the leaves.
struct Jet2 {
  Var val;
  Var d1;
  Var d2;

  /// Seed for the input variable itself: (t, 1, 0).
  static Jet2 input(double t) { return {Var(t), Var(1.0), Var(0.0)}; }
};

/// Jet of tanh(x): (tanh x0, s x1, s x2 - 2 tanh(x0) s x1^2) with s = 1 - tanh^2 x0.
Jet2 tanh(const Jet2& x);

/// Jet of w . x + b for weights and bias independent of t.
Jet2 affine(std::span<const Var> w, std::span<const Jet2> x, const Var& bias);

}  // namespace psqp
