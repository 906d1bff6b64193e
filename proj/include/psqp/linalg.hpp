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

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psqp {

using Vector = std::vector<double>;

/// Raised when a Cholesky pivot is not strictly positive. For JJ^T this means
/// the constraint Jacobian has lost full row rank.
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Small vector helpers. All of them check lengths and throw DimensionMismatch.
double dot(std::span<const double> a, std::span<const double> b);
double norm1(std::span<const double> a);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
Vector add(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double alpha);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

Vector multiply(const Matrix& a, std::span<const double> x);
Vector multiply_transpose(const Matrix& a, std::span<const double> y);
Matrix multiply(const Matrix& a, const Matrix& b);

/// J * J^T, computed symmetrically.
Matrix gram(const Matrix& j);

/// Lower-triangular factor L with L * L^T = A.
class CholeskyFactor {
 public:
  /// Factors a symmetric positive-definite matrix. `jitter` is added to the
  /// diagonal before factoring.
  static CholeskyFactor factor(const Matrix& a, double jitter = 0.0);

  std::size_t dim() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }

  Vector solve(std::span<const double> b) const;

 private:
  explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}
  Matrix lower_;
};

/// Solves A x = b for symmetric positive-definite A.
Vector cholesky_solve(const Matrix& a, std::span<const double> b);

/// Range/null-space split for a full-row-rank Jacobian J (m x n, m < n).
///
/// Factors J J^T once so that several projections against the same J (the
/// gradient and the momentum vector, for instance) share one factorization.
/// With m = 0 the projector is the identity and every normal step is zero.
class NullSpaceProjector {
 public:
  /// `jitter` enables a diagonal shift of 1e-10 * trace(JJ^T) / m. Off by
  /// default: a rank-deficient Jacobian raises NotPositiveDefinite.
  explicit NullSpaceProjector(Matrix jacobian, bool jitter = false);

  std::size_t num_constraints() const noexcept { return jacobian_.rows(); }
  std::size_t dim() const noexcept { return dim_; }
  const Matrix& jacobian() const noexcept { return jacobian_; }

  /// P q = q - J^T (J J^T)^{-1} J q.
  Vector project(std::span<const double> q) const;

  /// v = -rho J^T (J J^T)^{-1} c.
  Vector normal_step(std::span<const double> c, double rho) const;

  /// Explicit n x n projection matrix. Only meant for tests and small n.
  Matrix explicit_projection() const;

 private:
  Matrix jacobian_;
  std::size_t dim_ = 0;
  std::optional<CholeskyFactor> gram_factor_;
};

/// Returns P q for the null space of J.
Vector project_null(const Matrix& j, std::span<const double> q);

/// Returns v = -rho J^T (J J^T)^{-1} c.
Vector normal_step(const Matrix& j, std::span<const double> c, double rho);

struct KktSolution {
  Vector s;
  Vector y;
};

/// Solves [I J^T; J 0] [s; y] = -[q; c] without the step decomposition.
///
/// Small systems go through a pivoted LU of the full saddle-point matrix.
/// Large ones (n + m > 512) use the range-space route: y from the Schur
/// complement J J^T y = c - J q, then s = -q - J^T y.
KktSolution kkt_solve_direct(const Matrix& j, std::span<const double> q, std::span<const double> c);

}  // namespace psqp
