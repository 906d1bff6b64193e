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

#include "psqp/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace psqp {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kJitterScale = 1e-10;
constexpr std::size_t kDirectKktLimit = 512;

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << what << ": length " << a.size() << " vs " << b.size();
    throw DimensionMismatch(os.str());
  }
}

void require_constraint_shape(const Matrix& j) {
  if (j.rows() > 0 && j.rows() >= j.cols()) {
    std::ostringstream os;
    os << "constraint Jacobian must have fewer rows than columns, got " << j.rows() << "x" << j.cols();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream os;
    os << "matrix " << rows_ << "x" << cols_ << " given " << data_.size() << " entries";
    throw DimensionMismatch(os.str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += std::abs(x);
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s = std::max(s, std::abs(x));
  return s;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "subtract");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(std::span<const double> a, double alpha) {
  Vector out(a.begin(), a.end());
  for (double& x : out) x *= alpha;
  return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw DimensionMismatch("multiply: vector length does not match columns");
  Vector out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

Vector multiply_transpose(const Matrix& a, std::span<const double> y) {
  if (y.size() != a.rows()) throw DimensionMismatch("multiply_transpose: vector length does not match rows");
  Vector out(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(y[r], a.row(r), out);
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix gram(const Matrix& j) {
  const std::size_t m = j.rows();
  Matrix g(m, m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = r; c < m; ++c) {
      const double v = dot(j.row(r), j.row(c));
      g(r, c) = v;
      g(c, r) = v;
    }
  return g;
}

CholeskyFactor CholeskyFactor::factor(const Matrix& a, double jitter) {
  const std::size_t m = a.rows();
  if (m == 0 || a.cols() != m) throw DimensionMismatch("cholesky: matrix must be square and nonempty");

  double scale = 1.0;
  for (double x : a.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = r + 1; c < m; ++c)
      if (std::abs(a(r, c) - a(c, r)) > kSymmetryTol * scale)
        throw std::invalid_argument("cholesky: matrix is not symmetric");

  Matrix l(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    double pivot = a(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      std::ostringstream os;
      os << "cholesky: pivot " << j << " is " << pivot << " (matrix not positive definite)";
      throw NotPositiveDefinite(os.str());
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return CholeskyFactor(std::move(l));
}

Vector CholeskyFactor::solve(std::span<const double> b) const {
  const std::size_t m = dim();
  if (b.size() != m) throw DimensionMismatch("cholesky solve: right-hand side length");
  Vector x(b.begin(), b.end());
  // L z = b
  for (std::size_t i = 0; i < m; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * x[k];
    x[i] = s / lower_(i, i);
  }
  // L^T x = z
  for (std::size_t ii = m; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < m; ++k) s -= lower_(k, ii) * x[k];
    x[ii] = s / lower_(ii, ii);
  }
  return x;
}

Vector cholesky_solve(const Matrix& a, std::span<const double> b) {
  if (b.size() != a.rows()) throw DimensionMismatch("cholesky_solve: right-hand side length");
  return CholeskyFactor::factor(a).solve(b);
}

NullSpaceProjector::NullSpaceProjector(Matrix jacobian, bool jitter)
    : jacobian_(std::move(jacobian)), dim_(jacobian_.cols()) {
  require_constraint_shape(jacobian_);
  const std::size_t m = jacobian_.rows();
  if (m == 0) return;
  Matrix jjt = gram(jacobian_);
  double shift = 0.0;
  if (jitter) {
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) trace += jjt(i, i);
    shift = kJitterScale * trace / static_cast<double>(m);
  }
  gram_factor_ = CholeskyFactor::factor(jjt, shift);
}

Vector NullSpaceProjector::project(std::span<const double> q) const {
  if (q.size() != dim_) throw DimensionMismatch("project: vector length does not match Jacobian columns");
  Vector p(q.begin(), q.end());
  if (!gram_factor_) return p;
  const Vector jq = multiply(jacobian_, q);
  const Vector w = gram_factor_->solve(jq);
  for (std::size_t r = 0; r < jacobian_.rows(); ++r) axpy(-w[r], jacobian_.row(r), p);
  return p;
}

Vector NullSpaceProjector::normal_step(std::span<const double> c, double rho) const {
  if (c.size() != jacobian_.rows()) throw DimensionMismatch("normal_step: constraint vector length");
  if (!gram_factor_) return Vector(dim_, 0.0);
  Vector w = gram_factor_->solve(c);
  for (double& x : w) x *= -rho;
  return multiply_transpose(jacobian_, w);
}

Matrix NullSpaceProjector::explicit_projection() const {
  Matrix p = Matrix::identity(dim_);
  if (!gram_factor_) return p;
  const std::size_t m = jacobian_.rows();
  // Columns of (J J^T)^{-1} J.
  Matrix w(m, dim_);
  Vector col(m);
  for (std::size_t c = 0; c < dim_; ++c) {
    for (std::size_t r = 0; r < m; ++r) col[r] = jacobian_(r, c);
    const Vector sol = gram_factor_->solve(col);
    for (std::size_t r = 0; r < m; ++r) w(r, c) = sol[r];
  }
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const double jki = jacobian_(k, i);
      for (std::size_t j = 0; j < dim_; ++j) p(i, j) -= jki * w(k, j);
    }
  return p;
}

Vector project_null(const Matrix& j, std::span<const double> q) { return NullSpaceProjector(j).project(q); }

Vector normal_step(const Matrix& j, std::span<const double> c, double rho) {
  return NullSpaceProjector(j).normal_step(c, rho);
}

KktSolution kkt_solve_direct(const Matrix& j, std::span<const double> q, std::span<const double> c) {
  require_constraint_shape(j);
  const std::size_t m = j.rows();
  const std::size_t n = j.cols();
  if (q.size() != n || c.size() != m) throw DimensionMismatch("kkt_solve_direct: right-hand side lengths");

  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> jm(
      j.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const Eigen::Map<const VectorXd> qv(q.data(), static_cast<Eigen::Index>(n));
  const Eigen::Map<const VectorXd> cv(c.data(), static_cast<Eigen::Index>(m));

  KktSolution out{Vector(n), Vector(m)};
  if (m == 0) {
    for (std::size_t i = 0; i < n; ++i) out.s[i] = -q[i];
    return out;
  }

  if (n + m <= kDirectKktLimit) {
    const auto dim = static_cast<Eigen::Index>(n + m);
    MatrixXd k = MatrixXd::Zero(dim, dim);
    k.topLeftCorner(n, n).setIdentity();
    k.topRightCorner(n, m) = jm.transpose();
    k.bottomLeftCorner(m, n) = jm;
    VectorXd rhs(dim);
    rhs.head(n) = -qv;
    rhs.tail(m) = -cv;
    Eigen::FullPivLU<MatrixXd> lu(k);
    if (!lu.isInvertible()) throw NotPositiveDefinite("kkt_solve_direct: saddle-point matrix is singular");
    const VectorXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i < n; ++i) out.s[i] = sol(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < m; ++i) out.y[i] = sol(static_cast<Eigen::Index>(n + i));
    return out;
  }

  const MatrixXd schur = jm * jm.transpose();
  Eigen::LLT<MatrixXd> llt(schur);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("kkt_solve_direct: J J^T is not positive definite");
  const VectorXd y = llt.solve(cv - jm * qv);
  const VectorXd s = -qv - jm.transpose() * y;
  for (std::size_t i = 0; i < n; ++i) out.s[i] = s(static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < m; ++i) out.y[i] = y(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace psqp
