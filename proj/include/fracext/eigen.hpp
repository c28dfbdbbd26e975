#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/linalg.hpp"

namespace fracext {

/// Eigenpairs of a dense symmetric matrix, eigenvalues ascending.
/// `vectors` holds one orthonormal eigenvector per row (row i pairs with
/// values[i]); it is empty when only eigenvalues were requested.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

namespace detail {

/// Householder reduction of a symmetric matrix to tridiagonal form
/// (EISPACK tred2). On return `v` holds the accumulated orthogonal
/// transformation when `accumulate` is set, `d` the diagonal and `e` the
/// subdiagonal in e[1..n-1].
inline void householder_tridiagonalize(Matrix& v, Vector& d, Vector& e, bool accumulate) {
  const std::size_t n = v.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) d[j] = v(j, j);
    e[0] = 0.0;
    return;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (d, e) (EISPACK tql2). `z` stores
/// eigenvectors as rows and may be empty for eigenvalues only. Throws
/// NumericalFailure after `max_sweeps` sweeps on one eigenvalue.
inline void implicit_ql(Vector& d, Vector& e, Matrix* z, int max_sweeps) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_sweeps)
          throw NumericalFailure("implicit QL did not converge for eigenvalue " + std::to_string(l), l);
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          if (z != nullptr) {
            auto zi = z->row(i);
            auto zi1 = z->row(i + 1);
            for (std::size_t k = 0; k < n; ++k) {
              h = zi1[k];
              zi1[k] = s * zi[k] + c * h;
              zi[k] = c * zi[k] - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

/// Full eigendecomposition of a dense symmetric matrix: Householder
/// tridiagonalization followed by implicit-shift QL. Eigenvectors are
/// returned as rows; sign is fixed so the first entry of non-negligible
/// magnitude is positive.
inline SymmetricEigen symmetric_eigen(const Matrix& a, bool with_vectors = true, int max_sweeps = 50) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidArgument("symmetric_eigen needs a square matrix");
  SymmetricEigen out;
  if (n == 0) return out;
  Matrix v = a;
  Vector d, e;
  if (n == 1) {
    out.values = {a(0, 0)};
    if (with_vectors) out.vectors = Matrix::identity(1);
    return out;
  }
  detail::householder_tridiagonalize(v, d, e, with_vectors);
  Matrix z;
  if (with_vectors) z = v.transposed();  // rows are the basis columns
  detail::implicit_ql(d, e, with_vectors ? &z : nullptr, max_sweeps);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = d[order[k]];
  if (with_vectors) {
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
      auto src = z.row(order[k]);
      auto dst = out.vectors.row(k);
      double peak = 0.0;
      for (double x : src) peak = std::max(peak, std::abs(x));
      double sign = 1.0;
      for (double x : src)
        if (std::abs(x) > 1e-8 * peak) {
          sign = x > 0 ? 1.0 : -1.0;
          break;
        }
      for (std::size_t j = 0; j < n; ++j) dst[j] = sign * src[j];
    }
  }
  return out;
}

}  // namespace fracext
