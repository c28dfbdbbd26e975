#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fracext/error.hpp"

namespace fracext {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& storage() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Inner product weighted by a measure: sum a_i b_i w_i.
inline double weighted_dot(std::span<const double> a, std::span<const double> b,
                           std::span<const double> w) {
  assert(a.size() == b.size() && a.size() == w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * w[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vector matvec(const Matrix& m, std::span<const double> x) {
  assert(m.cols() == x.size());
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// Relative difference ||a - b|| / max(||b||, tiny) in the Euclidean norm.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for an SPD operator.
/// `apply(x, y)` writes y = A x; `precondition(r, z)` writes z = M^{-1} r.
/// Throws NumericalFailure when the relative residual does not reach `tol`
/// within `max_iter` iterations.
template <class Apply, class Precondition>
CgResult conjugate_gradient(Apply&& apply, Precondition&& precondition,
                            std::span<const double> b, std::span<double> x, double tol,
                            std::size_t max_iter) {
  const std::size_t n = b.size();
  Vector r(n), z(n), p(n), ap(n);
  apply(std::span<const double>(x.data(), n), std::span<double>(ap));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {};
  }
  double rnorm = norm2(r);
  if (rnorm <= tol * bnorm) return {0, rnorm / bnorm};
  precondition(std::span<const double>(r), std::span<double>(z));
  p = z;
  double rz = dot(r, z);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    apply(std::span<const double>(p), std::span<double>(ap));
    const double pap = dot(p, ap);
    if (!(pap > 0.0))
      throw NumericalFailure("conjugate gradients: operator not positive definite", it, rnorm / bnorm);
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rnorm = norm2(r);
    if (rnorm <= tol * bnorm) {
      // Confirm against the true residual to guard against recurrence drift.
      apply(std::span<const double>(x.data(), n), std::span<double>(ap));
      double true_norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) true_norm += (b[i] - ap[i]) * (b[i] - ap[i]);
      true_norm = std::sqrt(true_norm);
      if (true_norm <= tol * bnorm) return {it, true_norm / bnorm};
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
      rnorm = true_norm;
    }
    precondition(std::span<const double>(r), std::span<double>(z));
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalFailure("conjugate gradients did not converge", max_iter, rnorm / bnorm);
}

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
/// lower[i] couples i and i+1; diag has n entries; rhs is overwritten.
inline void solve_tridiagonal(std::span<const double> diag, std::span<const double> off,
                              std::span<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  Vector c(n, 0.0);
  double denom = diag[0];
  c[0] = n > 1 ? off[0] / denom : 0.0;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - off[i - 1] * c[i - 1];
    if (i + 1 < n) c[i] = off[i] / denom;
    rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace fracext
