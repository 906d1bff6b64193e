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

#include "psqp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psqp {
namespace {

Tape* common_tape(std::span<const Var> operands) {
  Tape* tape = nullptr;
  for (const Var& v : operands) {
    if (v.is_constant()) continue;
    if (tape == nullptr) {
      tape = v.tape();
    } else if (v.tape() != tape) {
      throw std::invalid_argument("autodiff: operands live on different tapes");
    }
  }
  return tape;
}

}  // namespace

Var Tape::leaf(double value) {
  const auto id = static_cast<std::int32_t>(values_.size());
  values_.push_back(value);
  tags_.push_back(OpTag::kLeaf);
  edge_end_.push_back(static_cast<std::uint32_t>(num_edges_));
  leaf_ids_.push_back(id);
  return Var(this, id, value);
}

std::vector<Var> Tape::leaves(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(leaf(v));
  return out;
}

void Tape::clear() {
  values_.clear();
  tags_.clear();
  edge_end_.clear();
  num_edges_ = 0;
  leaf_ids_.clear();
}

std::vector<double> Tape::local_partials(std::int32_t id) const {
  const auto i = static_cast<std::size_t>(id);
  const std::uint32_t begin = i == 0 ? 0 : edge_end_.at(i - 1);
  return {partials_.begin() + begin, partials_.begin() + edge_end_.at(i)};
}

std::vector<std::int32_t> Tape::parent_ids(std::int32_t id) const {
  const auto i = static_cast<std::size_t>(id);
  const std::uint32_t begin = i == 0 ? 0 : edge_end_.at(i - 1);
  return {parents_.begin() + begin, parents_.begin() + edge_end_.at(i)};
}

Var Tape::record(OpTag tag, double value, std::span<const Var> operands, std::span<const double> partials) {
  if (operands.size() != partials.size()) throw std::invalid_argument("autodiff: operand/partial count mismatch");
  EdgeWriter w = open_node(operands.size());
  for (std::size_t i = 0; i < operands.size(); ++i) w.add(operands[i], partials[i]);
  return close_node(w, tag, value);
}

void Tape::grow_edges(std::size_t need) {
  if (need > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("autodiff: tape too large");
  const std::size_t cap = std::max(need, 2 * parents_.size());
  parents_.resize(cap);
  partials_.resize(cap);
}

std::vector<double> Tape::backward(const Var& output) const {
  std::vector<double> grad(leaf_ids_.size(), 0.0);
  std::vector<double> adjoint;
  backward_into(output, grad, adjoint);
  return grad;
}

void Tape::backward_into(const Var& output, std::span<double> leaf_grad, std::vector<double>& adjoint) const {
  if (leaf_grad.size() != leaf_ids_.size()) throw std::invalid_argument("backward: gradient buffer size");
  std::fill(leaf_grad.begin(), leaf_grad.end(), 0.0);
  if (output.is_constant()) return;
  if (output.tape() != this) throw std::invalid_argument("backward: output is not on this tape");

  const auto top = static_cast<std::size_t>(output.id());
  adjoint.assign(top + 1, 0.0);
  adjoint[top] = 1.0;
  const std::int32_t* parents = parents_.data();
  const double* partials = partials_.data();
  for (std::size_t i = top + 1; i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    const std::uint32_t begin = i == 0 ? 0 : edge_end_[i - 1];
    const std::uint32_t end = edge_end_[i];
    for (std::uint32_t e = begin; e < end; ++e) adjoint[static_cast<std::size_t>(parents[e])] += partials[e] * a;
  }
  for (std::size_t k = 0; k < leaf_ids_.size(); ++k) {
    const auto id = static_cast<std::size_t>(leaf_ids_[k]);
    if (id <= top) leaf_grad[k] = adjoint[id];
  }
}

namespace {

Var record2(OpTag tag, double value, const Var& a, double da, const Var& b, double db) {
  const Var ops[2] = {a, b};
  Tape* tape = common_tape(ops);
  if (tape == nullptr) return Var(value);
  const double parts[2] = {da, db};
  return tape->record(tag, value, ops, parts);
}

Var record1(OpTag tag, double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  const Var ops[1] = {a};
  const double parts[1] = {da};
  return a.tape()->record(tag, value, ops, parts);
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return record2(OpTag::kAdd, a.value() + b.value(), a, 1.0, b, 1.0); }

Var operator-(const Var& a, const Var& b) { return record2(OpTag::kSub, a.value() - b.value(), a, 1.0, b, -1.0); }

Var operator*(const Var& a, const Var& b) {
  return record2(OpTag::kMul, a.value() * b.value(), a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw DivisionByZero("autodiff: division by zero");
  const double q = a.value() / b.value();
  return record2(OpTag::kDiv, q, a, 1.0 / b.value(), b, -q / b.value());
}

Var operator-(const Var& a) { return record1(OpTag::kNeg, -a.value(), a, -1.0); }

Var tanh(const Var& a) {
  const double y = std::tanh(a.value());
  return record1(OpTag::kTanh, y, a, 1.0 - y * y);
}

Var square(const Var& a) { return record1(OpTag::kSquare, a.value() * a.value(), a, 2.0 * a.value()); }

Var dot(std::span<const Var> a, std::span<const Var> b, const Var& bias) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double value = bias.value();
  for (std::size_t i = 0; i < a.size(); ++i) value += a[i].value() * b[i].value();
  Tape* tape = bias.tape();
  for (std::size_t i = 0; i < a.size() && tape == nullptr; ++i) tape = a[i].is_constant() ? b[i].tape() : a[i].tape();
  if (tape == nullptr) return Var(value);
  Tape::EdgeWriter w = tape->open_node(2 * a.size() + 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    w.add(a[i], b[i].value());
    w.add(b[i], a[i].value());
  }
  w.add(bias, 1.0);
  return tape->close_node(w, OpTag::kDot, value);
}

Var mean_square(std::span<const Var> a) {
  if (a.empty()) return Var(0.0);
  const double inv = 1.0 / static_cast<double>(a.size());
  double value = 0.0;
  for (const Var& v : a) value += v.value() * v.value();
  value *= inv;
  Tape* tape = common_tape(a);
  if (tape == nullptr) return Var(value);
  Tape::EdgeWriter w = tape->open_node(a.size());
  for (const Var& v : a) w.add(v, 2.0 * v.value() * inv);
  return tape->close_node(w, OpTag::kDot, value);
}

Jet2 tanh(const Jet2& x) {
  const double x1 = x.d1.value();
  const double x2 = x.d2.value();
  const double y = std::tanh(x.val.value());
  const double s = 1.0 - y * y;

  Jet2 out;
  out.val = record1(OpTag::kTanh, y, x.val, s);

  // d1 = s * x1
  out.d1 = record2(OpTag::kJetTanh1, s * x1, x.val, -2.0 * y * s * x1, x.d1, s);

  // d2 = s * x2 - 2 y s x1^2, with d(s)/dx0 = -2 y s and d(y s)/dx0 = s (1 - 3 y^2)
  const Var ops[3] = {x.val, x.d1, x.d2};
  const double parts[3] = {-2.0 * y * s * x2 - 2.0 * x1 * x1 * s * (1.0 - 3.0 * y * y), -4.0 * y * s * x1, s};
  const double d2 = s * x2 - 2.0 * y * s * x1 * x1;
  Tape* tape = common_tape(ops);
  out.d2 = tape == nullptr ? Var(d2) : tape->record(OpTag::kJetTanh2, d2, ops, parts);
  return out;
}

Jet2 affine(std::span<const Var> w, std::span<const Jet2> x, const Var& bias) {
  if (w.size() != x.size()) throw std::invalid_argument("affine: length mismatch");
  const std::size_t k = w.size();
  double val = bias.value(), d1 = 0.0, d2 = 0.0;
  Tape* tape = bias.tape();
  for (std::size_t i = 0; i < k; ++i) {
    val += w[i].value() * x[i].val.value();
    d1 += w[i].value() * x[i].d1.value();
    d2 += w[i].value() * x[i].d2.value();
    if (tape == nullptr) {
      for (const Var* v : {&w[i], &x[i].val, &x[i].d1, &x[i].d2})
        if (!v->is_constant()) tape = v->tape();
    }
  }
  if (tape == nullptr) return Jet2{Var(val), Var(d1), Var(d2)};

  // Each component gets its own node; the weight edges repeat because the
  // partial with respect to w[i] differs per component.
  auto component = [&](auto pick, const Var& b, double value) {
    Tape::EdgeWriter w_edges = tape->open_node(2 * k + 1);
    for (std::size_t i = 0; i < k; ++i) {
      const Var& xi = pick(x[i]);
      w_edges.add(w[i], xi.value());
      w_edges.add(xi, w[i].value());
    }
    w_edges.add(b, 1.0);
    return tape->close_node(w_edges, OpTag::kDot, value);
  };
  Jet2 out;
  out.val = component([](const Jet2& j) -> const Var& { return j.val; }, bias, val);
  out.d1 = component([](const Jet2& j) -> const Var& { return j.d1; }, Var(0.0), d1);
  out.d2 = component([](const Jet2& j) -> const Var& { return j.d2; }, Var(0.0), d2);
  return out;
}

}  // namespace psqp
