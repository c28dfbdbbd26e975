#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/linalg.hpp"
#include "fracext/parallel.hpp"
#include "fracext/quadrature.hpp"
#include "fracext/special.hpp"
#include "fracext/spectral.hpp"

namespace fracext {

/// int_lo^hi y^p dy for p > -1 and 0 <= lo <= hi.
inline double power_integral(double p, double lo, double hi) {
  return (std::pow(hi, p + 1.0) - std::pow(lo, p + 1.0)) / (p + 1.0);
}

/// Nodes 0 = y_0 < ... < y_M = Y_max in the extension variable together with
/// the weights of the y^a measure, a = 1 - 2s.
///   weight[j]      = nu_a of the dual cell around y_j (vertex mass)
///   edge_weight[j] = int_{y_j}^{y_{j+1}} y^a dy
///   conductance[j] = 1 / int_{y_j}^{y_{j+1}} y^{-a} dy
/// The conductance is the exact flux coefficient of a cell for
/// y^{-a} d/dy (y^a d/dy); it agrees with edge_weight / dy^2 to second order
/// on smooth cells and stays exact on the y^{2s} layer at y = 0.
struct YGrid {
  double s = 0.5;
  double a = 0.0;
  Vector nodes;
  Vector weight;
  Vector edge_weight;
  Vector conductance;

  std::size_t intervals() const noexcept { return nodes.size() - 1; }
  std::size_t size() const noexcept { return nodes.size(); }
  double y_max() const { return nodes.back(); }

  static YGrid from_nodes(double s, Vector nodes) {
    check_fractional_order(s, false);
    if (nodes.size() < 2 || nodes.front() != 0.0) throw InvalidArgument("y-grid must start at 0 with >= 2 nodes");
    for (std::size_t j = 1; j < nodes.size(); ++j)
      if (!(nodes[j] > nodes[j - 1])) throw InvalidArgument("y-grid nodes must increase strictly");
    YGrid g;
    g.s = s;
    g.a = 1.0 - 2.0 * s;
    g.nodes = std::move(nodes);
    const std::size_t m = g.intervals();
    g.edge_weight.resize(m);
    g.conductance.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      g.edge_weight[j] = power_integral(g.a, g.nodes[j], g.nodes[j + 1]);
      g.conductance[j] = 1.0 / power_integral(-g.a, g.nodes[j], g.nodes[j + 1]);
    }
    g.weight.assign(m + 1, 0.0);
    for (std::size_t j = 0; j <= m; ++j) {
      const double lo = j == 0 ? 0.0 : 0.5 * (g.nodes[j - 1] + g.nodes[j]);
      const double hi = j == m ? g.nodes[m] : 0.5 * (g.nodes[j] + g.nodes[j + 1]);
      g.weight[j] = power_integral(g.a, lo, hi);
    }
    return g;
  }

  /// y_j = Y_max (j/M)^kappa with kappa = max(1, 1/s).
  static YGrid graded(double s, double y_max, std::size_t intervals) {
    check_fractional_order(s, false);
    if (intervals < 2) throw InvalidArgument("y-grid needs at least 2 intervals");
    if (!(y_max > 0.0)) throw InvalidArgument("y-grid needs Y_max > 0");
    const double kappa = std::max(1.0, 1.0 / s);
    Vector y(intervals + 1);
    for (std::size_t j = 0; j <= intervals; ++j)
      y[j] = y_max * std::pow(static_cast<double>(j) / static_cast<double>(intervals), kappa);
    y.back() = y_max;
    return from_nodes(s, std::move(y));
  }
};

/// Y_max with e^{-sqrt(lambda_1) Y_max} = 1e-6.
inline double default_y_max(double lambda1) {
  if (!(lambda1 > 0.0)) throw InvalidArgument("default_y_max needs lambda_1 > 0");
  return std::log(1e6) / std::sqrt(lambda1);
}

/// Constant C_s in psi_s(lambda, y) = 1 - C_s (sqrt(lambda) y)^{2s} + ...
inline double boundary_layer_constant(double s) {
  return abs_gamma_neg(s) / (std::tgamma(s) * std::pow(4.0, s));
}

/// Relative error of the first-cell Dirichlet-to-Neumann quotient for a
/// mode of eigenvalue lambda: the next term of the profile, lambda y^2 /
/// (4(1-s)), against the leading C_s lambda^s y^{2s}.
inline double boundary_layer_estimate(double lambda, double s, double y1) {
  if (lambda <= 0.0) return 0.0;
  return std::pow(lambda, 1.0 - s) * std::pow(y1, 2.0 - 2.0 * s) / (4.0 * (1.0 - s) * boundary_layer_constant(s));
}

/// Smallest M = 160 * 2^k whose graded grid keeps the boundary-layer
/// estimate at lambda_top below `tolerance`.
inline std::size_t default_y_intervals(double lambda1, double lambda_top, double s, double tolerance = 2.5e-3) {
  check_fractional_order(s, false);
  const double y_max = default_y_max(lambda1);
  const double kappa = std::max(1.0, 1.0 / s);
  for (std::size_t m = 160; m <= (std::size_t{1} << 22); m *= 2) {
    const double y1 = y_max * std::pow(1.0 / static_cast<double>(m), kappa);
    if (boundary_layer_estimate(lambda_top, s, y1) <= tolerance) return m;
  }
  throw ResolutionError("no y-resolution up to 2^22 intervals meets the boundary-layer tolerance",
                        boundary_layer_estimate(lambda_top, s, y_max * std::pow(2.0, -22.0 * kappa)));
}

inline YGrid default_y_grid(const SpectralDecomposition& dec, double s, double tolerance = 2.5e-3) {
  const double l1 = dec.lambda_min_positive();
  return YGrid::graded(s, default_y_max(l1), default_y_intervals(l1, dec.eigenvalues.back(), s, tolerance));
}

namespace detail {

/// y^{2s}/(4^s Gamma(s)) int_0^inf h(t) e^{-y^2/4t} t^{-1-s} dt on a log grid,
/// for h(t) = e^{-lambda t} (deficit = false) or 1 - e^{-lambda t} (deficit = true).
inline double profile_integral(double lambda, double s, double y, bool deficit, const QuadratureSpec& quad) {
  const double tol = quad.tail_tolerance;
  const double q = 0.25 * y * y;
  const double prefactor = std::pow(y, 2.0 * s) / (std::pow(4.0, s) * std::tgamma(s));
  const double big = std::log(1.0 / tol) + 30.0;
  double u_min, u_max;
  if (deficit) {
    // Expected size of the integral: Gamma(s) q^{-s} (y large) or
    // lambda^s |Gamma(-s)| (y small); the t^{-1-s} tail is cut below it.
    const double expected = std::min(std::tgamma(s) * std::pow(q, -s), std::pow(lambda, s) * abs_gamma_neg(s));
    u_min = std::log(q / big);
    u_max = -std::log(0.1 * s * tol * expected) / s;
  } else {
    // Integrand peaks near t = y / (2 sqrt(lambda)) at height ~ e^{-sqrt(lambda) y}.
    const double z = std::sqrt(lambda) * y;
    u_min = std::log(q / (z + big));
    u_max = std::log((z + big) / lambda);
  }
  u_min = quad.u_min.value_or(u_min);
  u_max = quad.u_max.value_or(std::max(u_max, u_min + 1.0));
  auto h = [&](double t) { return deficit ? -std::expm1(-lambda * t) : std::exp(-lambda * t); };
  auto g = [&](double u) {
    const double t = std::exp(u);
    return h(t) * std::exp(-q / t - s * u);
  };
  const LogGrid grid = LogGrid::make(u_min, u_max, quad.nodes);
  const double integral = integrate(grid, g);
  check_tails(g(u_min), g(u_max) / s, integral, tol, "per_mode_profile");
  return prefactor * integral;
}

}  // namespace detail

/// 1 - psi_s(lambda, y), computed without cancellation for small y.
inline double per_mode_deficit(double lambda, double s, double y, const QuadratureSpec& quad = {}) {
  check_fractional_order(s, false);
  if (!(lambda >= 0.0) || !(y >= 0.0)) throw InvalidArgument("per_mode_profile needs lambda >= 0 and y >= 0");
  if (lambda == 0.0 || y == 0.0) return 0.0;
  const double d = detail::profile_integral(lambda, s, y, true, quad);
  if (d < 0.5) return d;
  return 1.0 - detail::profile_integral(lambda, s, y, false, quad);
}

/// psi_s(lambda, y) = y^{2s}/(4^s Gamma(s)) int_0^inf e^{-lambda t - y^2/4t} t^{-1-s} dt,
/// the y-profile of the extension of an eigenmode; psi_s(lambda, 0) = 1.
inline double per_mode_profile(double lambda, double s, double y, const QuadratureSpec& quad = {}) {
  check_fractional_order(s, false);
  if (!(lambda >= 0.0) || !(y >= 0.0)) throw InvalidArgument("per_mode_profile needs lambda >= 0 and y >= 0");
  if (lambda == 0.0 || y == 0.0) return 1.0;
  const double d = detail::profile_integral(lambda, s, y, true, quad);
  if (d < 0.5) return 1.0 - d;
  return detail::profile_integral(lambda, s, y, false, quad);
}

/// Same profile through (2^{1-s}/Gamma(s)) z^s K_s(z), z = sqrt(lambda) y.
inline double per_mode_profile_bessel(double lambda, double s, double y) {
  check_fractional_order(s, false);
  if (!(lambda >= 0.0) || !(y >= 0.0)) throw InvalidArgument("per_mode_profile needs lambda >= 0 and y >= 0");
  if (lambda == 0.0 || y == 0.0) return 1.0;
  const double z = std::sqrt(lambda) * y;
  if (z > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - s) / std::tgamma(s) * std::pow(z, s) * bessel_k(s, z);
}

/// Values U(x, y_j) of an extension; row x (support position), column j.
struct ExtensionField {
  Matrix values;
  double s = 0.5;
  YGrid grid;

  std::size_t vertices() const noexcept { return values.rows(); }
  double operator()(std::size_t x, std::size_t j) const { return values(x, j); }
  Vector trace(std::size_t j) const { return values.column(j); }
};

/// U(x, y_j) = sum_i <f, phi_i> phi_i(x) psi_s(lambda_i, y_j).
inline ExtensionField poisson_extend(const SpectralDecomposition& dec, double s, std::span<const double> f,
                                     const YGrid& grid, const QuadratureSpec& quad = {}, unsigned jobs = 1) {
  check_fractional_order(s, false);
  if (std::abs(grid.s - s) > 1e-15) throw InvalidArgument("y-grid was built for a different s");
  const Vector c = dec.coefficients(f);
  const std::size_t n = dec.size(), ny = grid.size();
  Matrix profile(n, ny);  // profile(i, j) = psi(lambda_i, y_j)
  parallel_for(n, jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j < ny; ++j) profile(i, j) = per_mode_profile(dec.eigenvalues[i], s, grid.nodes[j], quad);
  });
  ExtensionField field;
  field.s = s;
  field.grid = grid;
  field.values = Matrix(n, ny);
  for (std::size_t x = 0; x < n; ++x) {
    auto phi = dec.eigenvectors.row(x);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = c[i] * phi[i];
      if (w == 0.0) continue;
      auto prow = profile.row(i);
      auto urow = field.values.row(x);
      for (std::size_t j = 0; j < ny; ++j) urow[j] += w * prow[j];
    }
  }
  // The bottom row is the datum itself.
  for (std::size_t x = 0; x < n; ++x) field.values(x, 0) = f[x];
  return field;
}

/// Conductance form on X x {y_0..y_M}:
///   E_a(U, V) = sum_j w_j E(U_j, V_j) + sum_x mu(x) sum_j k_j dU dV
/// with vertex mass mu(x) w_j. Product index is x * (M + 1) + j.
struct ExtendedOperator {
  std::vector<Edge> x_edges;
  Vector measure;
  Vector degree;  // sum_y c_xy
  YGrid grid;

  std::size_t nx() const noexcept { return measure.size(); }
  std::size_t ny() const noexcept { return grid.size(); }
  std::size_t size() const noexcept { return nx() * ny(); }
  std::size_t index(std::size_t x, std::size_t j) const noexcept { return x * ny() + j; }

  Vector mass() const {
    Vector m(size());
    for (std::size_t x = 0; x < nx(); ++x)
      for (std::size_t j = 0; j < ny(); ++j) m[index(x, j)] = measure[x] * grid.weight[j];
    return m;
  }

  /// out = K U, the gradient of E_a(U, U) / 2.
  void apply_stiffness(std::span<const double> u, std::span<double> out) const {
    if (u.size() != size() || out.size() != size()) throw InvalidArgument("extended field size mismatch");
    const std::size_t m = ny();
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& e : x_edges)
      for (std::size_t j = 0; j < m; ++j) {
        const double d = e.conductance * grid.weight[j] * (u[e.i * m + j] - u[e.j * m + j]);
        out[e.i * m + j] += d;
        out[e.j * m + j] -= d;
      }
    for (std::size_t x = 0; x < nx(); ++x)
      for (std::size_t j = 0; j + 1 < m; ++j) {
        const double d = measure[x] * grid.conductance[j] * (u[x * m + j] - u[x * m + j + 1]);
        out[x * m + j] += d;
        out[x * m + j + 1] -= d;
      }
  }

  double energy(std::span<const double> u, std::span<const double> v) const {
    if (u.size() != size() || v.size() != size()) throw InvalidArgument("extended field size mismatch");
    const std::size_t m = ny();
    double horizontal = 0.0, vertical = 0.0;
    for (const auto& e : x_edges)
      for (std::size_t j = 0; j < m; ++j)
        horizontal += grid.weight[j] * e.conductance * (u[e.i * m + j] - u[e.j * m + j]) * (v[e.i * m + j] - v[e.j * m + j]);
    for (std::size_t x = 0; x < nx(); ++x)
      for (std::size_t j = 0; j + 1 < m; ++j)
        vertical += measure[x] * grid.conductance[j] * (u[x * m + j + 1] - u[x * m + j]) * (v[x * m + j + 1] - v[x * m + j]);
    return horizontal + vertical;
  }

  double energy(const ExtensionField& field) const {
    return energy(field.values.storage(), field.values.storage());
  }

  /// Dense symmetrized generator of the product form (size-limited).
  GeneratorOperator generator(std::size_t max_dimension = 4000) const {
    if (size() > max_dimension)
      throw SizeLimitError("extended operator dimension " + std::to_string(size()) + " exceeds the maximum " +
                           std::to_string(max_dimension));
    std::vector<Edge> edges;
    const std::size_t m = ny();
    for (const auto& e : x_edges)
      for (std::size_t j = 0; j < m; ++j) edges.push_back({e.i * m + j, e.j * m + j, e.conductance * grid.weight[j]});
    for (std::size_t x = 0; x < nx(); ++x)
      for (std::size_t j = 0; j + 1 < m; ++j) edges.push_back({x * m + j, x * m + j + 1, measure[x] * grid.conductance[j]});
    return make_generator(size(), edges, mass());
  }
};

/// Recovers conductances c_xy = S_xy sqrt(mu_x mu_y) from the symmetrized
/// generator.
inline std::vector<Edge> generator_edges(const GeneratorOperator& op) {
  std::vector<Edge> edges;
  for (std::size_t x = 0; x < op.size(); ++x)
    for (std::size_t y = x + 1; y < op.size(); ++y) {
      const double c = op.symmetric(x, y) * std::sqrt(op.measure[x] * op.measure[y]);
      if (c != 0.0) edges.push_back({x, y, c});
    }
  return edges;
}

inline ExtendedOperator assemble_extended_operator(const GeneratorOperator& op, const YGrid& grid) {
  ExtendedOperator ext;
  ext.x_edges = generator_edges(op);
  ext.measure = op.measure;
  ext.degree.assign(op.size(), 0.0);
  for (const auto& e : ext.x_edges) {
    ext.degree[e.i] += e.conductance;
    ext.degree[e.j] += e.conductance;
  }
  ext.grid = grid;
  return ext;
}

/// The y-direction alone: conductances k_j between consecutive nodes, mass w_j.
inline GeneratorOperator y_generator(const YGrid& grid) {
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < grid.intervals(); ++j) edges.push_back({j, j + 1, grid.conductance[j]});
  return make_generator(grid.size(), edges, grid.weight);
}

struct BvpOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 0;  // 0: ten times the unknown count
};

struct BvpSolution {
  ExtensionField field;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Minimizes E_a with U(., 0) = f and U(., Y_max) = <f, 1>_mu / mu(X) by
/// preconditioned conjugate gradients on the interior rows. The
/// preconditioner solves the y-direction exactly per vertex (tridiagonal)
/// and keeps the diagonal of the x-coupling.
inline BvpSolution solve_extension_bvp(const ExtendedOperator& ext, std::span<const double> f,
                                       const BvpOptions& options = {}) {
  const std::size_t nx = ext.nx(), ny = ext.ny(), m = ny - 1;
  if (f.size() != nx) throw InvalidArgument("boundary datum size does not match the graph");
  if (ny < 3) throw InvalidArgument("extension solve needs at least one interior y row");
  double mean = 0.0, total = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    mean += f[x] * ext.measure[x];
    total += ext.measure[x];
  }
  mean /= total;
  if (std::all_of(f.begin(), f.end(), [&](double v) { return v == f[0]; })) mean = f[0];
  const std::size_t inner = m - 1;  // interior rows j = 1..m-1
  const std::size_t unknowns = nx * inner;
  const auto& w = ext.grid.weight;
  const auto& k = ext.grid.conductance;

  // Unknowns are V = U - f (f carried up every line), so V vanishes on the
  // bottom row and the stiff first-cell conductance never enters the
  // right-hand side: b = -w_j (sum_y c_xy (f(x) - f(y))) plus the top-row
  // coupling mu(x) k_{M-1} (mean - f(x)).
  Vector lf(nx, 0.0);
  for (const auto& e : ext.x_edges) {
    const double d = e.conductance * (f[e.i] - f[e.j]);
    lf[e.i] += d;
    lf[e.j] -= d;
  }
  Vector b(unknowns, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t r = 0; r < inner; ++r) b[x * inner + r] = -w[r + 1] * lf[x];
    b[x * inner + inner - 1] += ext.measure[x] * k[m - 1] * (mean - f[x]);
  }

  auto apply = [&](std::span<const double> u, std::span<double> out) {
    for (std::size_t x = 0; x < nx; ++x) {
      const double mu = ext.measure[x];
      const double deg = ext.degree[x];
      const double* ux = u.data() + x * inner;
      double* ox = out.data() + x * inner;
      for (std::size_t r = 0; r < inner; ++r) {
        const std::size_t j = r + 1;
        double v = (mu * (k[j - 1] + k[j]) + w[j] * deg) * ux[r];
        if (r > 0) v -= mu * k[j - 1] * ux[r - 1];
        if (r + 1 < inner) v -= mu * k[j] * ux[r + 1];
        ox[r] = v;
      }
    }
    for (const auto& e : ext.x_edges) {
      const double* ui = u.data() + e.i * inner;
      const double* uj = u.data() + e.j * inner;
      double* oi = out.data() + e.i * inner;
      double* oj = out.data() + e.j * inner;
      for (std::size_t r = 0; r < inner; ++r) {
        const double c = e.conductance * w[r + 1];
        oi[r] -= c * uj[r];
        oj[r] -= c * ui[r];
      }
    }
  };

  Vector d(inner), o(inner - 1);
  auto precondition = [&](std::span<const double> r, std::span<double> z) {
    for (std::size_t x = 0; x < nx; ++x) {
      const double mu = ext.measure[x];
      for (std::size_t q = 0; q < inner; ++q) {
        const std::size_t j = q + 1;
        d[q] = mu * (k[j - 1] + k[j]) + w[j] * ext.degree[x];
        if (q + 1 < inner) o[q] = -mu * k[j];
      }
      std::copy(r.begin() + x * inner, r.begin() + (x + 1) * inner, z.begin() + x * inner);
      solve_tridiagonal(d, o, z.subspan(x * inner, inner));
    }
  };

  Vector u(unknowns, 0.0);
  const std::size_t max_iter = options.max_iterations ? options.max_iterations : 10 * unknowns;
  const CgResult cg = conjugate_gradient(apply, precondition, b, u, options.tolerance, max_iter);

  BvpSolution sol;
  sol.iterations = cg.iterations;
  sol.residual = cg.relative_residual;
  sol.field.s = ext.grid.s;
  sol.field.grid = ext.grid;
  sol.field.values = Matrix(nx, ny);
  for (std::size_t x = 0; x < nx; ++x) {
    sol.field.values(x, 0) = f[x];
    for (std::size_t r = 0; r < inner; ++r) sol.field.values(x, r + 1) = f[x] + u[x * inner + r];
    sol.field.values(x, m) = mean;
  }
  return sol;
}

/// -2^{2s-1} Gamma(s) / Gamma(1-s), the Dirichlet-to-Neumann constant.
inline double dtn_constant(double s) { return -std::pow(2.0, 2.0 * s - 1.0) * std::tgamma(s) / std::tgamma(1.0 - s); }

/// (-L)^s f from an extension: (U(., y_1) - U(., 0)) (1 - a) / y_1^{1-a}
/// times the Dirichlet-to-Neumann constant.
inline Vector dtn(const ExtensionField& field) {
  const double s = field.s;
  const double y1 = field.grid.nodes[1];
  const double scale = 2.0 * s / std::pow(y1, 2.0 * s) * dtn_constant(s);
  Vector out(field.vertices());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = (field(x, 1) - field(x, 0)) * scale;
  return out;
}

/// Throws ResolutionError when the first y-cell is too coarse for the
/// largest eigenvalue.
inline void check_dtn_resolution(double lambda_top, double s, double y1, double tolerance) {
  const double est = boundary_layer_estimate(lambda_top, s, y1);
  if (!(est <= tolerance))
    throw ResolutionError("first y-cell too coarse: estimated boundary-layer error " + std::to_string(est), est);
}

struct DtnOptions {
  double tolerance = 2.5e-3;
  std::optional<double> y1;  // default: first node of default_y_grid
  QuadratureSpec quadrature;
};

/// Spectral route: per mode, (psi_s(lambda_i, y_1) - 1) (1 - a) / y_1^{1-a}
/// times the constant, applied to <f, phi_i>.
inline Vector dtn(const SpectralDecomposition& dec, double s, std::span<const double> f,
                  const DtnOptions& options = {}) {
  check_fractional_order(s, false);
  const double y1 = options.y1.value_or(default_y_grid(dec, s, options.tolerance).nodes[1]);
  check_dtn_resolution(dec.eigenvalues.back(), s, y1, options.tolerance);
  const double scale = 2.0 * s / std::pow(y1, 2.0 * s) * dtn_constant(s);
  return spectral_apply(dec, f, [&](double l) { return -per_mode_deficit(l, s, y1, options.quadrature) * scale; });
}

/// Product set B(x0, r_x) x {y_j : |y_j - y0| < r_y} as product indices.
struct ProductDomain {
  std::vector<std::size_t> x_vertices;
  std::vector<std::size_t> y_nodes;

  std::vector<std::size_t> indices(const ExtendedOperator& ext) const {
    std::vector<std::size_t> out;
    for (std::size_t x : x_vertices)
      for (std::size_t j : y_nodes) out.push_back(ext.index(x, j));
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// D(z0, R) = B(x0, R^{2/dW}) x B(y0, R).
inline ProductDomain product_domain(const FractalGraph& g, const YGrid& grid, std::size_t x0, double y0, double R) {
  if (!(R > 0.0)) throw InvalidArgument("product domain needs R > 0");
  ProductDomain d;
  d.x_vertices = ball(g, x0, std::pow(R, 2.0 / g.dW));
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (std::abs(grid.nodes[j] - y0) < R) d.y_nodes.push_back(j);
  if (d.x_vertices.empty() || d.y_nodes.empty()) throw InvalidArgument("product domain is empty");
  return d;
}

/// nu_a(B(y0, r)) = int_{y0-r}^{y0+r} |y|^a dy on the whole line.
inline double nu_a_ball(double a, double y0, double r) {
  const double lo = y0 - r, hi = y0 + r;
  auto prim = [a](double y) {  // odd antiderivative of |y|^a
    const double v = std::pow(std::abs(y), a + 1.0) / (a + 1.0);
    return y < 0 ? -v : v;
  };
  return prim(hi) - prim(lo);
}

/// Eigendecomposition of the extended operator killed outside `domain`.
inline SpectralDecomposition extended_killed_decomposition(const ExtendedOperator& ext, const ProductDomain& domain,
                                                           std::size_t max_dimension = 4000) {
  const auto idx = domain.indices(ext);
  if (idx.empty()) throw InvalidArgument("product domain is empty");
  if (idx.size() >= ext.size()) throw InvalidArgument("product domain must be a proper subset");
  if (idx.size() > max_dimension)
    throw SizeLimitError("product domain dimension " + std::to_string(idx.size()) + " exceeds the maximum " +
                         std::to_string(max_dimension));
  // Assemble only the restricted block rather than the full dense generator.
  const std::size_t k = idx.size();
  std::vector<std::size_t> pos(ext.size(), k);
  for (std::size_t a = 0; a < k; ++a) pos[idx[a]] = a;
  const Vector mass = ext.mass();
  Matrix sub(k, k);
  Vector mu(k);
  for (std::size_t a = 0; a < k; ++a) mu[a] = mass[idx[a]];
  auto add_edge = [&](std::size_t p, std::size_t q, double c) {
    const std::size_t a = pos[p], b = pos[q];
    if (a < k) sub(a, a) -= c / mass[p];
    if (b < k) sub(b, b) -= c / mass[q];
    if (a < k && b < k) {
      const double off = c / std::sqrt(mass[p] * mass[q]);
      sub(a, b) += off;
      sub(b, a) += off;
    }
  };
  const std::size_t m = ext.ny();
  for (const auto& e : ext.x_edges)
    for (std::size_t j = 0; j < m; ++j) add_edge(e.i * m + j, e.j * m + j, e.conductance * ext.grid.weight[j]);
  for (std::size_t x = 0; x < ext.nx(); ++x)
    for (std::size_t j = 0; j + 1 < m; ++j) add_edge(x * m + j, x * m + j + 1, ext.measure[x] * ext.grid.conductance[j]);
  return detail::decompose_symmetric(sub, mu, idx);
}

/// Killed kernel q_t^D(z, z') with respect to mu_a; rows and columns follow
/// the sorted product indices of the domain.
inline Matrix extended_killed_kernel(const ExtendedOperator& ext, const ProductDomain& domain, double t,
                                     std::size_t max_dimension = 4000) {
  return heat_matrix(extended_killed_decomposition(ext, domain, max_dimension), t);
}

}  // namespace fracext
