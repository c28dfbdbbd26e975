#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fracext/eigen.hpp"
#include "fracext/error.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/linalg.hpp"
#include "fracext/parallel.hpp"
#include "fracext/quadrature.hpp"
#include "fracext/special.hpp"

namespace fracext {

/// Symmetrized generator S = D^{1/2} A D^{-1/2} of the conductance form,
/// where A f(x) = mu(x)^{-1} sum_y c_xy (f(y) - f(x)) and D = diag(mu).
/// S is symmetric negative semidefinite.
struct GeneratorOperator {
  Matrix symmetric;
  Vector measure;

  std::size_t size() const noexcept { return measure.size(); }
};

inline GeneratorOperator make_generator(std::size_t n, std::span<const Edge> edges,
                                        std::span<const double> measure) {
  if (measure.size() != n) throw InvalidArgument("measure size does not match vertex count");
  GeneratorOperator op;
  op.symmetric = Matrix(n, n);
  op.measure.assign(measure.begin(), measure.end());
  for (double m : op.measure)
    if (!(m > 0.0)) throw InvalidArgument("vertex masses must be positive");
  for (const auto& e : edges) {
    if (e.i >= n || e.j >= n || e.i == e.j) throw StructuralError("bad edge endpoint");
    const double off = e.conductance / std::sqrt(op.measure[e.i] * op.measure[e.j]);
    op.symmetric(e.i, e.j) += off;
    op.symmetric(e.j, e.i) += off;
    op.symmetric(e.i, e.i) -= e.conductance / op.measure[e.i];
    op.symmetric(e.j, e.j) -= e.conductance / op.measure[e.j];
  }
  return op;
}

inline GeneratorOperator make_generator(const FractalGraph& g) {
  return make_generator(g.size(), g.edges, g.measure);
}

/// (-L) f straight from the conductances, without the symmetrized matrix.
inline Vector apply_negative_generator(const FractalGraph& g, std::span<const double> f) {
  Vector out(g.size(), 0.0);
  for (const auto& e : g.edges) {
    const double diff = f[e.j] - f[e.i];
    out[e.i] -= e.conductance * diff;
    out[e.j] += e.conductance * diff;
  }
  for (std::size_t x = 0; x < g.size(); ++x) out[x] /= g.measure[x];
  return out;
}

/// Eigenpairs of -L (or of its Dirichlet restriction to `support`).
/// Column i of `eigenvectors` is phi_i, orthonormal in the mu-weighted inner
/// product over the support; row x corresponds to vertex support[x].
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
  Vector measure;
  std::vector<std::size_t> support;

  std::size_t size() const noexcept { return eigenvalues.size(); }

  /// <f, phi_i>_mu for every mode; f is indexed by support position.
  Vector coefficients(std::span<const double> f) const {
    if (f.size() != size()) throw InvalidArgument("function size does not match decomposition");
    Vector c(size(), 0.0);
    for (std::size_t x = 0; x < size(); ++x) {
      const double w = f[x] * measure[x];
      if (w == 0.0) continue;
      auto row = eigenvectors.row(x);
      for (std::size_t i = 0; i < size(); ++i) c[i] += w * row[i];
    }
    return c;
  }

  /// sum_i c_i phi_i.
  Vector synthesize(std::span<const double> c) const {
    Vector f(size(), 0.0);
    for (std::size_t x = 0; x < size(); ++x) f[x] = dot(eigenvectors.row(x), c);
    return f;
  }

  Vector mode(std::size_t i) const { return eigenvectors.column(i); }

  double lambda_min_positive() const {
    for (double l : eigenvalues)
      if (l > 1e-10 * std::max(1.0, eigenvalues.back())) return l;
    return eigenvalues.back();
  }
};

namespace detail {

inline SpectralDecomposition decompose_symmetric(const Matrix& s, std::span<const double> measure,
                                                 std::vector<std::size_t> support) {
  const std::size_t n = s.rows();
  Matrix neg(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) neg(i, j) = -s(i, j);
  SymmetricEigen eig = symmetric_eigen(neg, true);
  SpectralDecomposition dec;
  dec.eigenvalues = std::move(eig.values);
  // Round-off level eigenvalues are the constant mode: set them to exactly 0
  // so fractional powers of constants vanish.
  const double floor = 1e-12 * std::max(std::abs(dec.eigenvalues.back()), std::abs(dec.eigenvalues.front()));
  for (double& l : dec.eigenvalues) l = l <= floor ? 0.0 : l;
  dec.measure.assign(measure.begin(), measure.end());
  dec.support = std::move(support);
  dec.eigenvectors = Matrix(n, n);
  for (std::size_t x = 0; x < n; ++x) {
    const double scale = 1.0 / std::sqrt(dec.measure[x]);
    for (std::size_t i = 0; i < n; ++i) dec.eigenvectors(x, i) = eig.vectors(i, x) * scale;
  }
  return dec;
}

}  // namespace detail

/// Full decomposition of -L via Householder tridiagonalization and
/// implicit-shift QL.
inline SpectralDecomposition eigendecompose(const GeneratorOperator& op, std::size_t max_dimension = 4000) {
  if (op.size() > max_dimension)
    throw SizeLimitError("operator dimension " + std::to_string(op.size()) + " exceeds the maximum " +
                         std::to_string(max_dimension));
  std::vector<std::size_t> support(op.size());
  for (std::size_t i = 0; i < support.size(); ++i) support[i] = i;
  return detail::decompose_symmetric(op.symmetric, op.measure, std::move(support));
}

/// Eigenvalues of -L only (no eigenvectors), ascending.
inline Vector generator_eigenvalues(const GeneratorOperator& op) {
  Matrix neg(op.size(), op.size());
  for (std::size_t i = 0; i < op.size(); ++i)
    for (std::size_t j = 0; j < op.size(); ++j) neg(i, j) = -op.symmetric(i, j);
  Vector v = symmetric_eigen(neg, false).values;
  for (double& l : v) l = std::max(l, 0.0);
  return v;
}

/// Decomposition of the generator killed outside `domain` (Dirichlet
/// condition on the complement): the principal submatrix of S.
inline SpectralDecomposition killed_decomposition(const GeneratorOperator& op,
                                                  std::span<const std::size_t> domain) {
  if (domain.empty()) throw InvalidArgument("killed domain is empty");
  if (domain.size() >= op.size()) throw InvalidArgument("killed domain must be a proper subset");
  std::vector<std::size_t> support(domain.begin(), domain.end());
  std::sort(support.begin(), support.end());
  if (std::adjacent_find(support.begin(), support.end()) != support.end())
    throw InvalidArgument("killed domain has duplicate vertices");
  if (support.back() >= op.size()) throw InvalidArgument("killed domain vertex out of range");
  const std::size_t k = support.size();
  Matrix sub(k, k);
  Vector mu(k);
  for (std::size_t a = 0; a < k; ++a) {
    mu[a] = op.measure[support[a]];
    for (std::size_t b = 0; b < k; ++b) sub(a, b) = op.symmetric(support[a], support[b]);
  }
  return detail::decompose_symmetric(sub, mu, std::move(support));
}

/// Heat kernel density p_t(x, y) = sum_i e^{-lambda_i t} phi_i(x) phi_i(y)
/// with respect to mu. Computed as G G^T so the table is exactly symmetric.
inline Matrix heat_matrix(const SpectralDecomposition& dec, double t, unsigned jobs = 1) {
  if (!(t > 0.0)) throw InvalidArgument("heat kernel needs t > 0");
  const std::size_t n = dec.size();
  Matrix g(n, n);
  Vector damp(n);
  for (std::size_t i = 0; i < n; ++i) damp[i] = std::exp(-0.5 * dec.eigenvalues[i] * t);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t i = 0; i < n; ++i) g(x, i) = dec.eigenvectors(x, i) * damp[i];
  Matrix p(n, n);
  parallel_for(n, jobs, [&](std::size_t x) {
    for (std::size_t y = x; y < n; ++y) p(x, y) = dot(g.row(x), g.row(y));
  });
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < x; ++y) p(x, y) = p(y, x);
  return p;
}

/// Applies a spectral multiplier m(lambda) to f.
template <class Multiplier>
Vector spectral_apply(const SpectralDecomposition& dec, std::span<const double> f, Multiplier&& m) {
  Vector c = dec.coefficients(f);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= m(dec.eigenvalues[i]);
  return dec.synthesize(c);
}

inline Vector semigroup_apply(const SpectralDecomposition& dec, double t, std::span<const double> f) {
  if (!(t > 0.0)) throw InvalidArgument("semigroup needs t > 0");
  return spectral_apply(dec, f, [t](double l) { return std::exp(-l * t); });
}

inline void check_fractional_order(double s, bool allow_one) {
  const bool ok = allow_one ? (s > 0.0 && s <= 1.0) : (s > 0.0 && s < 1.0);
  if (!ok)
    throw InvalidArgument("fractional order s = " + std::to_string(s) + " outside " +
                          (allow_one ? "(0, 1]" : "(0, 1)"));
}

/// (-L)^s f = sum_i lambda_i^s <f, phi_i> phi_i.
inline Vector fractional_apply(const SpectralDecomposition& dec, double s, std::span<const double> f) {
  check_fractional_order(s, true);
  return spectral_apply(dec, f, [s](double l) { return l > 0.0 ? std::pow(l, s) : 0.0; });
}

/// Dense table F with (F f)(x) = ((-L)^s f)(x):
/// F(x, y) = sum_i lambda_i^s phi_i(x) phi_i(y) mu(y).
inline Matrix fractional_matrix(const SpectralDecomposition& dec, double s, unsigned jobs = 1) {
  check_fractional_order(s, true);
  const std::size_t n = dec.size();
  Vector ls(n);
  for (std::size_t i = 0; i < n; ++i) ls[i] = dec.eigenvalues[i] > 0.0 ? std::pow(dec.eigenvalues[i], s) : 0.0;
  Matrix scaled(n, n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t i = 0; i < n; ++i) scaled(x, i) = dec.eigenvectors(x, i) * ls[i];
  Matrix out(n, n);
  parallel_for(n, jobs, [&](std::size_t x) {
    for (std::size_t y = 0; y < n; ++y) out(x, y) = dot(scaled.row(x), dec.eigenvectors.row(y)) * dec.measure[y];
  });
  return out;
}

/// lambda^s from the Balakrishnan integral
/// (1/|Gamma(-s)|) int_0^inf (1 - e^{-lambda t}) t^{-1-s} dt on a log grid.
inline double balakrishnan_power(double lambda, double s, const QuadratureSpec& quad = {}) {
  if (!(lambda > 0.0)) throw InvalidArgument("balakrishnan_power needs lambda > 0");
  check_fractional_order(s, false);
  // Bounds are placed so each tail is a small fraction of the expected value.
  const double tol = 0.1 * quad.tail_tolerance * std::min(1.0, std::pow(lambda, s) * abs_gamma_neg(s));
  // Integrand in u: (1 - exp(-lambda e^u)) e^{-s u}; ~lambda e^{(1-s)u} below, e^{-su} above.
  const double u_min = quad.u_min.value_or(std::log(tol * (1.0 - s) / lambda) / (1.0 - s) - 2.0);
  const double u_max = quad.u_max.value_or(std::max(std::log(1.0 / (s * tol)) / s, std::log(40.0 / lambda)) + 2.0);
  auto g = [&](double u) { return -std::expm1(-lambda * std::exp(u)) * std::exp(-s * u); };
  const LogGrid grid = LogGrid::make(u_min, u_max, quad.nodes);
  const double integral = integrate(grid, g);
  check_tails(g(u_min) / (1.0 - s), g(u_max) / s, integral, quad.tail_tolerance, "balakrishnan_power");
  return integral / abs_gamma_neg(s);
}

/// Jump kernel K(x, y) = int_0^inf p_t(x, y) t^{-1-s} dt for every pair
/// x != y (diagonal left at zero). Small times use the Taylor series of
/// e^{tS}, which keeps off-diagonal entries free of spectral cancellation;
/// larger times use the eigendecomposition.
inline Matrix jump_kernel_matrix(const GeneratorOperator& op, const SpectralDecomposition& dec, double s,
                                 const QuadratureSpec& quad = {}) {
  check_fractional_order(s, false);
  const std::size_t n = dec.size();
  if (op.size() != n) throw InvalidArgument("generator and decomposition sizes differ");
  const double lmax = std::max(dec.eigenvalues.back(), 1e-300);
  const double l1 = dec.lambda_min_positive();
  const double tol = quad.tail_tolerance;

  double max_rate = 0.0;  // bound on |p_t(x,y)| / t for x != y, small t
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (x != y)
        max_rate = std::max(max_rate, std::abs(op.symmetric(x, y)) / std::sqrt(op.measure[x] * op.measure[y]));
  max_rate = std::max(max_rate * std::exp(1.0), 1e-300);

  const double u_min = quad.u_min.value_or(std::log(tol * (1.0 - s) / max_rate) / (1.0 - s) - 2.0);
  const double u_max = quad.u_max.value_or(std::max(std::log(1.0 / (s * tol)) / s, std::log(40.0 / l1)) + 2.0);
  const LogGrid grid = LogGrid::make(u_min, u_max, quad.nodes);

  const double t_switch = 1.0 / lmax;
  // Powers S^k / k! for the Taylor branch.
  std::vector<Matrix> powers;
  powers.push_back(Matrix::identity(n));
  for (int k = 1; k <= 40; ++k) {
    Matrix next = matmul(powers.back(), op.symmetric);
    for (double* p = next.data(); p != next.data() + n * n; ++p) *p /= k;
    powers.push_back(std::move(next));
    double mag = 0.0;
    for (double v : powers.back().storage()) mag = std::max(mag, std::abs(v));
    if (mag * std::pow(t_switch, k) < 1e-18) break;
  }
  auto taylor_kernel = [&](double t) {
    Matrix e(n, n);
    double tk = 1.0;
    for (const auto& pk : powers) {
      for (std::size_t q = 0; q < n * n; ++q) e.data()[q] += tk * pk.data()[q];
      tk *= t;
    }
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) e(x, y) /= std::sqrt(op.measure[x] * op.measure[y]);
    return e;
  };

  Matrix k(n, n);
  auto accumulate = [&](const Matrix& p, double w) {
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        if (x != y) k(x, y) += w * p(x, y);
  };
  auto off_max = [&](const Matrix& p) {
    double m = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        if (x != y) m = std::max(m, std::abs(p(x, y)));
    return m;
  };
  double lower_tail = 0.0, upper_tail = 0.0;
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const double t = grid.t(q);
    const Matrix p = t <= t_switch ? taylor_kernel(t) : heat_matrix(dec, t);
    accumulate(p, grid.weight[q] * std::pow(t, -s));
    if (q == 0) lower_tail = off_max(p) * std::pow(t, -s) / (1.0 - s);
    if (q + 1 == grid.size()) upper_tail = off_max(p) * std::pow(t, -s) / s;
  }
  // Symmetrize the accumulation order exactly.
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      const double v = 0.5 * (k(x, y) + k(y, x));
      k(x, y) = v;
      k(y, x) = v;
    }
  check_tails(lower_tail, upper_tail, off_max(k), tol, "jump_kernel");
  return k;
}

inline double jump_kernel(const GeneratorOperator& op, const SpectralDecomposition& dec, double s, std::size_t x,
                          std::size_t y, const QuadratureSpec& quad = {}) {
  if (x == y) throw InvalidArgument("jump kernel is defined only for x != y");
  if (x >= dec.size() || y >= dec.size()) throw InvalidArgument("jump kernel index out of range");
  return jump_kernel_matrix(op, dec, s, quad)(x, y);
}

/// ((-L)^s f)(x) = -(1/|Gamma(-s)|) sum_{y != x} K(x,y) (f(y) - f(x)) mu(y).
inline Vector jump_form_apply(const Matrix& kernel, std::span<const double> measure, double s,
                              std::span<const double> f) {
  check_fractional_order(s, false);
  const std::size_t n = f.size();
  const double c = 1.0 / abs_gamma_neg(s);
  Vector out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) acc += kernel(x, y) * (f[y] - f[x]) * measure[y];
    out[x] = -c * acc;
  }
  return out;
}

inline Vector jump_form_apply(const GeneratorOperator& op, const SpectralDecomposition& dec, double s,
                              std::span<const double> f, const QuadratureSpec& quad = {}) {
  return jump_form_apply(jump_kernel_matrix(op, dec, s, quad), op.measure, s, f);
}

/// Super-mean value check for u(t) = P^Omega_t u0 + drift * t on a killed
/// decomposition: returns the most negative entry of
/// u(t) - P^Omega_{t-s} u(s) over all pairs s < t drawn from `times`.
inline double super_mean_value_check(const SpectralDecomposition& dec, std::span<const double> u0,
                                     std::span<const double> times, double drift = 0.0) {
  for (double v : u0)
    if (v < 0.0) throw InvalidArgument("super-mean value check needs u0 >= 0");
  std::vector<double> ts(times.begin(), times.end());
  std::sort(ts.begin(), ts.end());
  const Vector c0 = dec.coefficients(u0);
  auto evolve = [&](double t) {
    Vector c = c0;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= std::exp(-dec.eigenvalues[i] * t);
    Vector u = dec.synthesize(c);
    for (double& v : u) v += drift * t;
    return u;
  };
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ts.size(); ++a) {
    if (!(ts[a] > 0.0)) throw InvalidArgument("super-mean value times must be positive");
    const Vector us = evolve(ts[a]);
    for (std::size_t b = a + 1; b < ts.size(); ++b) {
      if (!(ts[b] > ts[a])) continue;
      const Vector ut = evolve(ts[b]);
      const Vector pushed = semigroup_apply(dec, ts[b] - ts[a], us);
      for (std::size_t x = 0; x < ut.size(); ++x) worst = std::min(worst, ut[x] - pushed[x]);
    }
  }
  return worst;
}

}  // namespace fracext
