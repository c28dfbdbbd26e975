#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/linalg.hpp"
#include "fracext/parallel.hpp"
#include "fracext/random.hpp"
#include "fracext/spectral.hpp"

namespace fracext {

/// D(f, r) = sum over ordered pairs with d(x, y) < r of |f(x) - f(y)|^2 mu(x) mu(y).
inline double besov_D(const FractalGraph& g, std::span<const double> f, double r, unsigned jobs = 1) {
  if (!(r > 0.0)) throw InvalidArgument("besov_D needs r > 0");
  if (f.size() != g.size()) throw InvalidArgument("function size does not match the graph");
  if (!g.has_metric()) throw SizeLimitError("graph has no metric table");
  const std::size_t n = g.size();
  Vector partial(n, 0.0);
  parallel_for(n, jobs, [&](std::size_t x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      if (y != x && g.distance(x, y) < r) {
        const double d = f[x] - f[y];
        acc += d * d * g.measure[y];
      }
    partial[x] = acc * g.measure[x];
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

struct BesovReport {
  Vector radii;
  Vector values;  // D(f, r) per radius
  double seminorm = 0.0;
  double maximizing_radius = 0.0;
};

/// Dyadic radii 2^{-k} diam, k = 0, 1, ..., down to the mesh size.
inline Vector besov_radii(const FractalGraph& g) {
  Vector r;
  const double diam = g.diameter(), mesh = g.mesh_size();
  for (double v = diam; v >= mesh * (1.0 - 1e-12); v *= 0.5) r.push_back(v);
  return r;
}

/// N_{alpha,beta}(f) = max over the dyadic radii of D(f, r) / r^{alpha+beta}.
inline BesovReport besov_norm(const FractalGraph& g, std::span<const double> f, double alpha, double beta,
                              unsigned jobs = 1) {
  BesovReport rep;
  rep.radii = besov_radii(g);
  for (double r : rep.radii) {
    const double d = besov_D(g, f, r, jobs);
    rep.values.push_back(d);
    const double q = d / std::pow(r, alpha + beta);
    if (q > rep.seminorm) {
      rep.seminorm = q;
      rep.maximizing_radius = r;
    }
  }
  return rep;
}

/// E^(s)(f, f) = sum_i lambda_i^s <f, phi_i>^2.
inline double fractional_energy(const SpectralDecomposition& dec, double s, std::span<const double> f) {
  check_fractional_order(s, true);
  const Vector c = dec.coefficients(f);
  double e = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (dec.eigenvalues[i] > 0.0) e += std::pow(dec.eigenvalues[i], s) * c[i] * c[i];
  return e;
}

/// Seeded test functions: `random_count` with coefficients xi_i (1 + lambda_i)^{-1},
/// xi_i standard normal, followed by the first `eigen_count` nonconstant eigenfunctions.
inline std::vector<Vector> equivalence_ensemble(const SpectralDecomposition& dec, std::uint64_t seed,
                                                std::size_t random_count = 20, std::size_t eigen_count = 5) {
  std::vector<Vector> out;
  Rng rng(seed);
  for (std::size_t k = 0; k < random_count; ++k) {
    Vector c(dec.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.normal() / (1.0 + dec.eigenvalues[i]);
    out.push_back(dec.synthesize(c));
  }
  std::size_t added = 0;
  for (std::size_t i = 0; i < dec.size() && added < eigen_count; ++i)
    if (dec.eigenvalues[i] > 0.0) {
      out.push_back(dec.mode(i));
      ++added;
    }
  return out;
}

struct EquivalenceReport {
  Vector ratios;
  double min = 0.0;
  double max = 0.0;
  double spread = 0.0;
  std::size_t excluded = 0;  // constant functions
};

/// Ratios E^(s)(f,f) / N_{dH, s dW}(f) over an ensemble.
inline EquivalenceReport equivalence_ratio(const FractalGraph& g, const SpectralDecomposition& dec, double s,
                                           std::span<const Vector> ensemble, unsigned jobs = 1) {
  check_fractional_order(s, false);
  EquivalenceReport rep;
  rep.min = std::numeric_limits<double>::infinity();
  for (const auto& f : ensemble) {
    const double n = besov_norm(g, f, g.dH, s * g.dW, jobs).seminorm;
    if (n == 0.0) {
      ++rep.excluded;
      continue;
    }
    const double r = fractional_energy(dec, s, f) / n;
    rep.ratios.push_back(r);
    rep.min = std::min(rep.min, r);
    rep.max = std::max(rep.max, r);
  }
  if (rep.ratios.empty()) throw InvalidArgument("equivalence ensemble has no nonconstant function");
  rep.spread = rep.max / rep.min;
  return rep;
}

/// Domain Omega (proper, nonempty) and exterior datum; `exterior` is a full
/// vertex vector whose entries inside Omega are ignored.
struct DirichletProblem {
  std::vector<std::size_t> domain;
  Vector exterior;
  double s = 0.5;
};

struct DirichletSolution {
  Vector u;
  std::size_t iterations = 0;
  double residual = 0.0;  // max over Omega of |(-L)^s u|
};

/// A(x, y) = mu(x) ((-L)^s)(x, y) = sum_i lambda_i^s phi_i(x) mu(x) phi_i(y) mu(y),
/// the symmetric matrix of E^(s) in the vertex basis.
inline Matrix fractional_form_matrix(const SpectralDecomposition& dec, double s, unsigned jobs = 1) {
  Matrix a = fractional_matrix(dec, s, jobs);
  const std::size_t n = dec.size();
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) a(x, y) *= dec.measure[x];
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      const double v = 0.5 * (a(x, y) + a(y, x));
      a(x, y) = v;
      a(y, x) = v;
    }
  return a;
}

namespace detail {

inline std::vector<char> domain_mask(std::size_t n, std::span<const std::size_t> domain) {
  if (domain.empty()) throw InvalidArgument("Dirichlet domain is empty");
  std::vector<char> in(n, 0);
  for (std::size_t x : domain) {
    if (x >= n) throw InvalidArgument("Dirichlet domain vertex out of range");
    if (in[x]) throw InvalidArgument("Dirichlet domain has duplicate vertices");
    in[x] = 1;
  }
  if (domain.size() >= n) throw InvalidArgument("Dirichlet domain must leave a nonempty complement");
  return in;
}

}  // namespace detail

/// Solves A_OO u_O = -A_O,ext f_ext with A from fractional_form_matrix and
/// reports max over Omega of |(A u)(x)| / mu(x) = |((-L)^s u)(x)|.
inline DirichletSolution solve_fractional_dirichlet(const Matrix& form, std::span<const double> measure,
                                                    const DirichletProblem& problem, double tolerance = 1e-13) {
  const std::size_t n = form.rows();
  if (problem.exterior.size() != n) throw InvalidArgument("exterior datum size does not match the graph");
  const auto in = detail::domain_mask(n, problem.domain);
  std::vector<std::size_t> inner(problem.domain.begin(), problem.domain.end());
  std::sort(inner.begin(), inner.end());
  const std::size_t k = inner.size();

  Vector u = problem.exterior;
  for (std::size_t x : inner) u[x] = 0.0;
  Vector b(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      if (!in[y]) acc += form(inner[a], y) * problem.exterior[y];
    b[a] = -acc;
  }
  auto apply = [&](std::span<const double> v, std::span<double> out) {
    for (std::size_t a = 0; a < k; ++a) {
      double acc = 0.0;
      for (std::size_t c = 0; c < k; ++c) acc += form(inner[a], inner[c]) * v[c];
      out[a] = acc;
    }
  };
  auto jacobi = [&](std::span<const double> r, std::span<double> z) {
    for (std::size_t a = 0; a < k; ++a) z[a] = r[a] / form(inner[a], inner[a]);
  };
  // Constant exterior data: the constant is the solution.
  Vector x(k, 0.0);
  double ext_lo = std::numeric_limits<double>::infinity(), ext_hi = -ext_lo;
  for (std::size_t y = 0; y < n; ++y)
    if (!in[y]) {
      ext_lo = std::min(ext_lo, problem.exterior[y]);
      ext_hi = std::max(ext_hi, problem.exterior[y]);
    }
  DirichletSolution sol;
  if (ext_lo == ext_hi) {
    std::fill(x.begin(), x.end(), ext_lo);
  } else {
    const CgResult cg = conjugate_gradient(apply, jacobi, b, x, tolerance, 10 * k + 100);
    sol.iterations = cg.iterations;
  }
  for (std::size_t a = 0; a < k; ++a) u[inner[a]] = x[a];
  for (std::size_t xv : inner) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) acc += form(xv, y) * u[y];
    sol.residual = std::max(sol.residual, std::abs(acc) / measure[xv]);
  }
  sol.u = std::move(u);
  return sol;
}

/// max over x in Omega of |((-L)^s u)(x)|.
inline double weak_solution_residual(const SpectralDecomposition& dec, double s, std::span<const double> u,
                                     std::span<const std::size_t> domain) {
  const Vector lu = fractional_apply(dec, s, u);
  double worst = 0.0;
  for (std::size_t x : domain) {
    if (x >= lu.size()) throw InvalidArgument("domain vertex out of range");
    worst = std::max(worst, std::abs(lu[x]));
  }
  return worst;
}

inline DirichletSolution solve_fractional_dirichlet(const SpectralDecomposition& dec, const DirichletProblem& problem,
                                                    unsigned jobs = 1) {
  check_fractional_order(problem.s, false);
  DirichletSolution sol =
      solve_fractional_dirichlet(fractional_form_matrix(dec, problem.s, jobs), dec.measure, problem);
  const auto in = detail::domain_mask(dec.size(), problem.domain);
  double fnorm = 0.0;
  for (std::size_t y = 0; y < dec.size(); ++y)
    if (!in[y]) fnorm = std::max(fnorm, std::abs(problem.exterior[y]));
  if (sol.residual > 1e-9 * fnorm && fnorm > 0.0)
    throw NumericalFailure("fractional Dirichlet solve left residual above 1e-9 |f|", sol.iterations, sol.residual);
  return sol;
}

}  // namespace fracext
