#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/extension.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/linalg.hpp"
#include "fracext/nonlocal_dirichlet.hpp"
#include "fracext/parallel.hpp"
#include "fracext/random.hpp"
#include "fracext/spectral.hpp"

namespace fracext {

// ---------------------------------------------------------------------------
// Sub-Gaussian heat kernel fit

struct TimeWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// [tau^{1-m}, tau^{-2}]: above the mesh time, below the diameter time.
inline TimeWindow scaling_window(const FractalGraph& g) {
  return {std::pow(g.time_scale, 1.0 - g.level), std::pow(g.time_scale, -2.0)};
}

/// Vertices at the fixed points of the contractions (the outer corners, and
/// the center for the Vicsek set). p_t there is log-periodic in t with
/// period log tau, so a window spanning whole periods fits the slope cleanly.
inline std::vector<std::size_t> fixed_point_vertices(const FractalGraph& g) {
  std::vector<std::pair<double, double>> pts;
  switch (g.family) {
    case Family::interval: pts = {{0.0, 0.0}, {1.0, 0.0}}; break;
    case Family::gasket: pts = {{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}}; break;
    case Family::vicsek: pts = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5}}; break;
  }
  std::vector<std::size_t> out;
  for (auto [x, y] : pts) out.push_back(g.nearest_vertex(x, y));
  return out;
}

struct HKEFitReport {
  double slope = 0.0;  // d log p_t(x,x) / d log t
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  TimeWindow window;
  double max_violation = 0.0;
  std::size_t diagonal_samples = 0;
  std::size_t pair_samples = 0;
  Vector times;
  Vector mean_log_diagonal;
  Vector sample_xi;  // every (xi, p_t t^{dH/dW}) sample used by the envelopes
  Vector sample_q;
};

/// max over the samples of the relative violation of
/// c1 e^{-c2 xi} <= q <= c3 e^{-c4 xi}; 0 when every sample is inside.
inline double envelope_violation(const HKEFitReport& fit, double c1, double c2, double c3, double c4) {
  double worst = 0.0;
  for (std::size_t k = 0; k < fit.sample_q.size(); ++k) {
    const double xi = fit.sample_xi[k], q = fit.sample_q[k];
    worst = std::max({worst, c1 * std::exp(-c2 * xi) / q - 1.0, q / (c3 * std::exp(-c4 * xi)) - 1.0});
  }
  return worst;
}

inline void check_time_window(const SpectralDecomposition& dec, const FractalGraph& g, TimeWindow w) {
  if (!(w.lo > 0.0 && w.lo < w.hi)) throw WindowError("time window needs 0 < t_lo < t_hi");
  const TimeWindow full = scaling_window(g);
  if (w.lo < full.lo * (1.0 - 1e-12) || w.hi > full.hi * (1.0 + 1e-12))
    throw WindowError("time window leaves the scaling range [tau^(1-m), tau^-2]");
  if (w.lo * dec.eigenvalues.back() < 1.0) throw WindowError("t_lo is below the mesh time 1/lambda_max");
  if (w.hi * dec.lambda_min_positive() > 2.0) throw WindowError("t_hi is beyond 2/lambda_1");
}

/// Fits c1 t^{-dH/dW} e^{-c2 xi} <= p_t(x,y) <= c3 t^{-dH/dW} e^{-c4 xi},
/// xi = (d(x,y)^{dW}/t)^{1/(dW-1)}, over x in `points`, all y and
/// `time_samples` log-spaced times in the window. c4 is the least-squares
/// slope of -log(p t^{dH/dW}) against xi; c1, c2, c3 are then the tightest
/// envelopes. Pairs whose kernel is below 1e-10 p_t(x,x) are left out (the
/// spectral sum has no relative accuracy there).
inline HKEFitReport fit_on_diagonal(const SpectralDecomposition& dec, const FractalGraph& g,
                                    std::span<const std::size_t> points, TimeWindow window,
                                    std::size_t time_samples = 25) {
  if (points.empty()) throw InvalidArgument("fit_on_diagonal needs at least one point");
  if (time_samples < 2) throw InvalidArgument("fit_on_diagonal needs at least two times");
  if (dec.size() != g.size()) throw InvalidArgument("decomposition does not match the graph");
  for (std::size_t x : points)
    if (x >= g.size()) throw InvalidArgument("diagonal point out of range");
  check_time_window(dec, g, window);
  const bool off_diagonal = g.has_metric();
  const double alpha = g.dH / g.dW;
  const std::size_t n = dec.size();

  HKEFitReport rep;
  rep.window = window;
  struct Sample {
    double xi;
    double q;
  };
  std::vector<Sample> diag, pairs;
  Vector log_t;
  for (std::size_t k = 0; k < time_samples; ++k) {
    const double u = std::log(window.lo) + (std::log(window.hi) - std::log(window.lo)) * static_cast<double>(k) /
                                               static_cast<double>(time_samples - 1);
    const double t = std::exp(u);
    rep.times.push_back(t);
    log_t.push_back(u);
    double mean = 0.0;
    for (std::size_t x : points) {
      Vector a(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = std::exp(-dec.eigenvalues[i] * t) * dec.eigenvectors(x, i);
      const double pxx = dot(dec.eigenvectors.row(x), a);
      mean += std::log(pxx);
      diag.push_back({0.0, pxx * std::pow(t, alpha)});
      if (!off_diagonal) continue;
      for (std::size_t y = 0; y < n; ++y) {
        if (y == x) continue;
        const double p = dot(dec.eigenvectors.row(y), a);
        if (!(p > 1e-10 * pxx)) continue;
        const double xi = std::pow(std::pow(g.distance(x, y), g.dW) / t, 1.0 / (g.dW - 1.0));
        pairs.push_back({xi, p * std::pow(t, alpha)});
      }
    }
    rep.mean_log_diagonal.push_back(mean / static_cast<double>(points.size()));
  }
  rep.slope = regression_slope(log_t, rep.mean_log_diagonal);
  rep.diagonal_samples = diag.size();
  rep.pair_samples = pairs.size();

  if (pairs.size() >= 2) {
    Vector xs, ys;
    for (const auto& p : pairs) {
      xs.push_back(p.xi);
      ys.push_back(-std::log(p.q));
    }
    rep.c4 = std::max(0.0, regression_slope(xs, ys));
  }
  rep.c1 = std::numeric_limits<double>::infinity();
  for (const auto& d : diag) rep.c1 = std::min(rep.c1, d.q);
  for (const auto* set : {&diag, &pairs})
    for (const auto& p : *set) rep.c3 = std::max(rep.c3, p.q * std::exp(rep.c4 * p.xi));
  rep.c2 = rep.c4;
  for (const auto& p : pairs) rep.c2 = std::max(rep.c2, (std::log(rep.c1) - std::log(p.q)) / p.xi);
  for (const auto* set : {&diag, &pairs})
    for (const auto& p : *set) {
      rep.sample_xi.push_back(p.xi);
      rep.sample_q.push_back(p.q);
    }
  rep.max_violation = envelope_violation(rep, rep.c1, rep.c2, rep.c3, rep.c4);
  return rep;
}

/// Graph Laplacian with unit conductances and the counting measure scaled
/// by N^m (interior masses of order one). Its low eigenvalues shrink by the
/// time scale tau per level.
inline GeneratorOperator combinatorial_generator(const FractalGraph& g) {
  std::vector<Edge> unit = g.edges;
  for (auto& e : unit) e.conductance = 1.0;
  const double cells = std::pow(static_cast<double>(scaling_constants(g.family).cells), g.level);
  Vector mass = g.measure;
  for (double& m : mass) m *= cells;
  return make_generator(g.size(), unit, mass);
}

struct DecimationReport {
  Vector coarse;
  Vector fine;
  Vector ratios;  // coarse_i / fine_i
  double target = 0.0;
  double max_deviation = 0.0;  // max |ratio / target - 1|
};

/// Ratios of the lowest `count` positive eigenvalues of the combinatorial
/// Laplacian at consecutive levels; spectral decimation predicts tau.
inline DecimationReport decimation_ratios(const FractalGraph& coarse, const FractalGraph& fine, std::size_t count = 3) {
  if (coarse.family != fine.family || fine.level != coarse.level + 1)
    throw InvalidArgument("decimation needs the same family at levels m and m+1");
  auto positive = [count](const Vector& all) {
    Vector out;
    const double floor = 1e-10 * all.back();
    for (double l : all)
      if (l > floor && out.size() < count) out.push_back(l);
    return out;
  };
  DecimationReport rep;
  rep.coarse = positive(generator_eigenvalues(combinatorial_generator(coarse)));
  rep.fine = positive(generator_eigenvalues(combinatorial_generator(fine)));
  if (rep.coarse.size() < count || rep.fine.size() < count)
    throw InvalidArgument("graph has fewer positive eigenvalues than requested");
  rep.target = coarse.time_scale;
  for (std::size_t i = 0; i < count; ++i) {
    rep.ratios.push_back(rep.coarse[i] / rep.fine[i]);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(rep.ratios[i] / rep.target - 1.0));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Extended space X x [0, Y): anisotropic domains and caloric functions

/// z0 = (x0, y0) and the scale R of D(z0, R) = B(x0, R^{2/dW}) x B(y0, R).
struct ExtendedCenter {
  std::size_t x0 = 0;
  double y0 = 0.0;
  double R = 0.5;
};

namespace detail {

/// Positions, within a sorted support of product indices, of the nodes of
/// D(z0, r); empty when the y-range holds no node.
inline std::vector<std::size_t> region_positions(const FractalGraph& g, const ExtendedOperator& ext,
                                                 std::span<const std::size_t> support, const ExtendedCenter& c,
                                                 double r) {
  std::vector<std::size_t> out;
  const auto xs = ball(g, c.x0, std::pow(r, 2.0 / g.dW));
  for (std::size_t x : xs)
    for (std::size_t j = 0; j < ext.ny(); ++j) {
      if (!(std::abs(ext.grid.nodes[j] - c.y0) < r)) continue;
      const std::size_t id = ext.index(x, j);
      const auto it = std::lower_bound(support.begin(), support.end(), id);
      if (it != support.end() && *it == id) out.push_back(static_cast<std::size_t>(it - support.begin()));
    }
  std::sort(out.begin(), out.end());
  return out;
}

/// (k + 1/2)/n spaced interior samples of (lo, hi).
inline Vector interior_times(double lo, double hi, std::size_t n) {
  Vector t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  return t;
}

/// Values at the given support positions of u(t) = Q_t^D u0 (u0 in the
/// decomposition's coefficient basis).
inline Vector evolve_at(const SpectralDecomposition& dec, std::span<const double> coeff, double t,
                        std::span<const std::size_t> positions) {
  Vector damped(coeff.size());
  for (std::size_t i = 0; i < coeff.size(); ++i) damped[i] = coeff[i] * std::exp(-dec.eigenvalues[i] * t);
  Vector out(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k) out[k] = dot(dec.eigenvectors.row(positions[k]), damped);
  return out;
}

inline double bump(double dx, double dy, double wx, double wy) {
  return std::exp(-0.5 * (dx * dx) / (wx * wx) - 0.5 * (dy * dy) / (wy * wy));
}

}  // namespace detail

/// Killed decomposition of the extended operator on D(z0, scale R).
inline SpectralDecomposition killed_on(const FractalGraph& g, const ExtendedOperator& ext, const ExtendedCenter& c,
                                       double scale = 1.0, std::size_t max_dimension = 4000) {
  return extended_killed_decomposition(ext, product_domain(g, ext.grid, c.x0, c.y0, scale * c.R), max_dimension);
}

// ---------------------------------------------------------------------------
// Local lower estimate

struct LLEOptions {
  Vector epsilons{1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.12, 0.09, 0.05};
  std::size_t time_samples = 24;
  double noise_floor = 1e-10;  // kernel values below floor * max diagonal count as nonpositive
  std::size_t max_dimension = 4000;
};

struct LLEReport {
  bool found = false;
  double epsilon = 0.0;
  double constant = 0.0;
  Vector epsilons;  // descending
  Vector minima;    // per epsilon; 0 when some sampled value was not positive
  Vector times;
  std::size_t domain_size = 0;
};

/// For each epsilon: min over t <= (eps R)^2 on a fixed log grid and over
/// z, z' in D(z0, eps sqrt t) of q_t^D(z, z') nu_a(B(y0, sqrt t)) t^{dH/dW},
/// D = D(z0, R). The t grid runs from (eps_min R)^2 / 100 to R^2 and is the
/// same for every epsilon, so the minima cannot increase with epsilon.
inline LLEReport lle_check(const FractalGraph& g, const ExtendedOperator& ext, const ExtendedCenter& c,
                           const LLEOptions& options = {}) {
  if (options.epsilons.empty()) throw InvalidArgument("lle_check needs an epsilon grid");
  if (options.time_samples < 2) throw InvalidArgument("lle_check needs at least two times");
  LLEReport rep;
  rep.epsilons = options.epsilons;
  std::sort(rep.epsilons.begin(), rep.epsilons.end(), std::greater<>());
  if (!(rep.epsilons.back() > 0.0) || rep.epsilons.front() > 1.0)
    throw InvalidArgument("LLE epsilons must lie in (0, 1]");
  const SpectralDecomposition dec = killed_on(g, ext, c, 1.0, options.max_dimension);
  rep.domain_size = dec.size();
  const double a = ext.grid.a;
  const double t_lo = std::pow(rep.epsilons.back() * c.R, 2.0) / 100.0;
  const double t_hi = c.R * c.R;
  for (std::size_t k = 0; k < options.time_samples; ++k)
    rep.times.push_back(std::exp(std::log(t_lo) + (std::log(t_hi) - std::log(t_lo)) * static_cast<double>(k) /
                                                      static_cast<double>(options.time_samples - 1)));
  const std::size_t n = dec.size();
  for (double eps : rep.epsilons) {
    double worst = std::numeric_limits<double>::infinity();
    bool positive = true;
    for (double t : rep.times) {
      if (t > std::pow(eps * c.R, 2.0) * (1.0 + 1e-12)) continue;
      const auto pos = detail::region_positions(g, ext, dec.support, c, eps * std::sqrt(t));
      if (pos.empty()) continue;
      Matrix rows(pos.size(), n);
      for (std::size_t p = 0; p < pos.size(); ++p)
        for (std::size_t i = 0; i < n; ++i)
          rows(p, i) = dec.eigenvectors(pos[p], i) * std::exp(-0.5 * dec.eigenvalues[i] * t);
      double qmin = std::numeric_limits<double>::infinity(), qdiag = 0.0;
      for (std::size_t p = 0; p < pos.size(); ++p)
        for (std::size_t q = p; q < pos.size(); ++q) {
          const double v = dot(rows.row(p), rows.row(q));
          qmin = std::min(qmin, v);
          if (p == q) qdiag = std::max(qdiag, v);
        }
      if (!(qmin > options.noise_floor * qdiag)) positive = false;
      worst = std::min(worst, qmin * nu_a_ball(a, c.y0, std::sqrt(t)) * std::pow(t, g.dH / g.dW));
    }
    const double m = (positive && std::isfinite(worst)) ? worst : 0.0;
    rep.minima.push_back(m);
    if (!rep.found && m > 0.0) {
      rep.found = true;
      rep.epsilon = eps;
      rep.constant = m;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Oscillation inequality

struct OscillationOptions {
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  double epsilon = 1.0;  // LLE epsilon; delta = epsilon^2 / sqrt 2 unless set
  double delta = 0.0;
  double outer = 1.5;  // caloric functions are killed outside D(z0, outer R)
  std::size_t time_samples = 8;
  std::size_t max_dimension = 4000;
  unsigned jobs = 1;
};

struct OscillationTrial {
  double osc_small = 0.0;
  double osc_big = 0.0;
  bool degenerate = false;
};

struct OscillationReport {
  double delta = 0.0;
  double theta = 0.0;  // worst osc_small / osc_big
  double alpha = 0.0;  // log theta / log min(delta, theta)
  Vector ratios;
  std::vector<OscillationTrial> trials;
  std::size_t degenerate = 0;
  bool pass = false;
};

inline double oscillation_delta(const OscillationOptions& o) {
  return o.delta > 0.0 ? o.delta : o.epsilon * o.epsilon / std::numbers::sqrt2;
}

/// osc of u(t) = Q_t u0 (killed outside the domain of `caloric`) over
/// C((R^2, z0), delta R) and C((R^2, z0), R); u0 is indexed by the support
/// of `caloric`. Time samples of the small cylinder are included in the big.
inline OscillationTrial oscillation_trial(const FractalGraph& g, const ExtendedOperator& ext, const ExtendedCenter& c,
                                          const SpectralDecomposition& caloric, std::span<const double> u0,
                                          double delta, std::size_t time_samples = 8) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("oscillation delta must lie in (0, 1)");
  if (u0.size() != caloric.size()) throw InvalidArgument("initial datum does not match the caloric domain");
  const double t0 = c.R * c.R;
  const auto big = detail::region_positions(g, ext, caloric.support, c, c.R);
  const auto small = detail::region_positions(g, ext, caloric.support, c, delta * c.R);
  const Vector small_t = detail::interior_times(t0 - std::pow(delta * c.R, 2.0), t0, time_samples);
  Vector big_t = detail::interior_times(0.0, t0, time_samples);
  big_t.insert(big_t.end(), small_t.begin(), small_t.end());
  const Vector coeff = caloric.coefficients(u0);
  auto osc = [&](const std::vector<std::size_t>& pos, const Vector& times) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double t : times)
      for (double v : detail::evolve_at(caloric, coeff, t, pos)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    return hi - lo;
  };
  OscillationTrial tr;
  tr.osc_big = osc(big, big_t);
  tr.osc_small = osc(small, small_t);
  double scale = 0.0;
  for (double v : u0) scale = std::max(scale, std::abs(v));
  tr.degenerate = !(tr.osc_big > 1e-13 * scale);
  return tr;
}

/// Random initial data, uniform in [-1, 1) per node, evolved by the
/// semigroup killed outside D(z0, outer R); theta is the worst ratio.
inline OscillationReport oscillation_check(const FractalGraph& g, const ExtendedOperator& ext, const ExtendedCenter& c,
                                           const OscillationOptions& options = {}) {
  OscillationReport rep;
  rep.delta = oscillation_delta(options);
  const SpectralDecomposition caloric = killed_on(g, ext, c, options.outer, options.max_dimension);
  std::vector<Vector> data;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < options.trials; ++k) {
    Vector u(caloric.size());
    for (double& v : u) v = rng.uniform(-1.0, 1.0);
    data.push_back(std::move(u));
  }
  rep.trials.resize(data.size());
  parallel_for(data.size(), options.jobs, [&](std::size_t k) {
    rep.trials[k] = oscillation_trial(g, ext, c, caloric, data[k], rep.delta, options.time_samples);
  });
  for (const auto& tr : rep.trials) {
    if (tr.degenerate) {
      ++rep.degenerate;
      continue;
    }
    const double r = tr.osc_small / tr.osc_big;
    rep.ratios.push_back(r);
    rep.theta = std::max(rep.theta, r);
  }
  rep.pass = !rep.ratios.empty() && rep.theta < 1.0;
  // Hoelder exponent of the iterated inequality. Shrinking delta keeps the
  // inequality with the same theta, so delta is taken as min(delta, theta).
  if (rep.theta > 0.0) rep.alpha = std::log(rep.theta) / std::log(std::min(rep.delta, rep.theta));
  return rep;
}

// ---------------------------------------------------------------------------
// Inhomogeneous parabolic Harnack inequality

struct PHIOptions {
  std::size_t trials = 30;
  std::uint64_t seed = 1;
  double epsilon = 1.0;
  double eta = 0.5;
  double l = 1.0 / std::numbers::sqrt2;
  double bump_width = 0.25;  // relative to the x- and y-radii of D(z0, R)
  std::size_t time_samples = 6;
  double discard_floor = 1e-12;
  std::size_t max_dimension = 4000;
  unsigned jobs = 1;
};

struct PHIReport {
  double constant = 0.0;  // max over kept trials of sup_{Q-} u / inf_{Q+} u
  Vector ratios;
  std::size_t trials = 0;
  std::size_t discarded = 0;
  double epsilon = 0.0;
  double eta = 0.0;
  double l = 0.0;
  bool pass = false;
};

/// Caloric u = Q_t^D u0 on Q = (0, (eps R)^2) x D(z0, R) with nonnegative
/// Gaussian bumps u0 placed in plane coordinates around x0, so the same
/// data is used at every level. Q- = ((l^3 eps R)^2, (l^2 eps R)^2) x
/// D(z0, eta R) and Q+ = ((l eps R)^2, (eps R)^2) x D(z0, eta R).
inline PHIReport phi_check(const FractalGraph& g, const ExtendedOperator& ext, const ExtendedCenter& c,
                           const PHIOptions& options = {}) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1.0)) throw InvalidArgument("PHI epsilon must lie in (0, 1]");
  if (!(options.eta > 0.0 && options.eta < 1.0)) throw InvalidArgument("PHI eta must lie in (0, 1)");
  if (!(options.l > 0.0 && options.l < 1.0)) throw InvalidArgument("PHI l must lie in (0, 1)");
  PHIReport rep;
  rep.epsilon = options.epsilon;
  rep.eta = options.eta;
  rep.l = options.l;
  rep.trials = options.trials;
  const SpectralDecomposition dec = killed_on(g, ext, c, 1.0, options.max_dimension);
  const auto inner = detail::region_positions(g, ext, dec.support, c, options.eta * c.R);
  const double er = options.epsilon * c.R, l = options.l;
  const Vector minus_t =
      detail::interior_times(std::pow(l * l * l * er, 2.0), std::pow(l * l * er, 2.0), options.time_samples);
  const Vector plus_t = detail::interior_times(std::pow(l * er, 2.0), er * er, options.time_samples);

  const double rx = std::pow(c.R, 2.0 / g.dW);
  const double wx = options.bump_width * rx, wy = options.bump_width * c.R;
  const Vertex& v0 = g.vertices[c.x0];
  const std::size_t ny = ext.ny();
  std::vector<Vector> data;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < options.trials; ++k) {
    const double cx = v0.x + rng.uniform(-rx, rx), cy = v0.y + rng.uniform(-rx, rx);
    const double cz = c.y0 + rng.uniform(0.0, c.R);
    Vector u(dec.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
      const std::size_t id = dec.support[p];
      const Vertex& v = g.vertices[id / ny];
      const double dx = std::hypot(v.x - cx, v.y - cy);
      u[p] = detail::bump(dx, ext.grid.nodes[id % ny] - cz, wx, wy);
    }
    data.push_back(std::move(u));
  }
  Vector ratio(data.size(), -1.0);
  parallel_for(data.size(), options.jobs, [&](std::size_t k) {
    const Vector coeff = dec.coefficients(data[k]);
    double sup_minus = 0.0, inf_plus = std::numeric_limits<double>::infinity(), top = 0.0;
    for (double v : data[k]) top = std::max(top, v);
    for (double t : minus_t)
      for (double v : detail::evolve_at(dec, coeff, t, inner)) sup_minus = std::max(sup_minus, v);
    for (double t : plus_t)
      for (double v : detail::evolve_at(dec, coeff, t, inner)) inf_plus = std::min(inf_plus, v);
    if (inf_plus > options.discard_floor * top) ratio[k] = sup_minus / inf_plus;
  });
  for (double r : ratio) {
    if (r < 0.0) {
      ++rep.discarded;
      continue;
    }
    rep.ratios.push_back(r);
    rep.constant = std::max(rep.constant, r);
  }
  rep.pass = !rep.ratios.empty() && 2 * rep.discarded < rep.trials;
  return rep;
}

// ---------------------------------------------------------------------------
// Elliptic Harnack inequality and Hoelder continuity of s-harmonic functions

/// Closed ball {y : d(center, y) <= r}. Used for sup, inf and osc of
/// functions approximating continuous ones: their sup over the open ball
/// equals the max over its closure, and the dyadic radii below land exactly
/// on vertex distances.
inline std::vector<std::size_t> closed_ball(const FractalGraph& g, std::size_t center, double r) {
  return ball(g, center, r * (1.0 + 1e-12));
}

struct HarnackConfig {
  std::size_t x0 = 0;
  double R = 0.5;
  std::vector<std::size_t> omega;  // empty: the open ball B(x0, R)
  std::vector<Vector> exterior;     // empty: harnack_exterior_data
};

struct HarnackOptions {
  double eta = 0.5;
  std::size_t bumps = 4;  // seeded bump data per configuration
  double bump_width = 0.15;
  std::uint64_t seed = 1;
  std::size_t holder_depth = 0;  // 0: largest K with 2^-K R >= 2 mesh
  double trace_tolerance = 1e-2;
  bool check_trace = true;
  unsigned jobs = 1;
};

struct HarnackRun {
  std::size_t config = 0;
  std::string datum;
  double sup = 0.0;
  double inf = 0.0;
  double ratio = 0.0;
  bool degenerate = false;  // inf over the inner ball is 0
  bool holder_fitted = false;  // K >= 2 and every osc_k > 0
  Vector osc;           // over closed B(x0, 2^-k R), k = 1..K
  double alpha = 0.0;   // slope of log osc_k vs log((2^-k R)^{2/dW} / R)
  double metric_alpha = 0.0;  // slope of log osc_k vs log(2^-k R)
  double trace_residual = 0.0;
  std::size_t dirichlet_iterations = 0;
};

struct HarnackReport {
  std::vector<HarnackRun> runs;
  double worst_ratio = 0.0;
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double worst_trace_residual = 0.0;
  std::size_t degenerate = 0;
  std::size_t holder_depth = 0;
  bool alpha_in_unit_interval = true;  // every fitted alpha in (0, 1]
  bool pass = false;  // some nondegenerate run, every fitted alpha > 0, traces harmonic
};

inline std::size_t default_holder_depth(const FractalGraph& g, double R) {
  std::size_t k = 0;
  while (std::ldexp(R, -static_cast<int>(k + 1)) >= 2.0 * g.mesh_size() * (1.0 - 1e-12)) ++k;
  return k;
}

/// Exterior data per configuration: the indicator of the third of the
/// vertices farthest from x0, then `bumps` Gaussian bumps with seeded
/// centers in the bounding box of the vertices (plane coordinates, so the
/// data does not depend on the level).
inline std::vector<std::pair<std::string, Vector>> harnack_exterior_data(const FractalGraph& g, std::size_t x0,
                                                                         const HarnackOptions& options,
                                                                         std::uint64_t seed) {
  std::vector<std::pair<std::string, Vector>> out;
  std::vector<std::size_t> order(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.distance(x0, a) > g.distance(x0, b); });
  Vector far(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size() / 3; ++k) far[order[k]] = 1.0;
  out.emplace_back("farthest-third", std::move(far));
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& v : g.vertices) {
    xlo = std::min(xlo, v.x);
    xhi = std::max(xhi, v.x);
    ylo = std::min(ylo, v.y);
    yhi = std::max(yhi, v.y);
  }
  Rng rng(seed);
  for (std::size_t b = 0; b < options.bumps; ++b) {
    const double cx = rng.uniform(xlo, xhi), cy = rng.uniform(ylo, yhi);
    Vector f(g.size());
    for (std::size_t x = 0; x < g.size(); ++x)
      f[x] = detail::bump(std::hypot(g.vertices[x].x - cx, g.vertices[x].y - cy), 0.0, options.bump_width, 1.0);
    out.emplace_back("bump-" + std::to_string(b), std::move(f));
  }
  return out;
}

/// Solves (-L)^s u = 0 in Omega with each exterior datum, records the
/// Harnack ratio sup/inf over the closed B(x0, eta R), fits the Hoelder
/// exponent from oscillations over nested balls and checks that the
/// Dirichlet-to-Neumann map of the Poisson extension vanishes on Omega.
inline HarnackReport harnack_holder_main(const FractalGraph& g, const SpectralDecomposition& dec, double s,
                                         std::span<const HarnackConfig> configs, const HarnackOptions& options = {}) {
  check_fractional_order(s, false);
  if (configs.empty()) throw InvalidArgument("harnack_holder_main needs at least one configuration");
  if (!(options.eta > 0.0 && options.eta < 1.0)) throw InvalidArgument("Harnack eta must lie in (0, 1)");
  const Matrix form = fractional_form_matrix(dec, s, options.jobs);
  HarnackReport rep;
  rep.alpha_min = std::numeric_limits<double>::infinity();
  rep.alpha_max = -rep.alpha_min;
  rep.pass = true;
  std::size_t fitted = 0;
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const HarnackConfig& cfg = configs[ci];
    if (cfg.x0 >= g.size()) throw InvalidArgument("Harnack center out of range");
    std::vector<std::size_t> omega = cfg.omega.empty() ? ball(g, cfg.x0, cfg.R) : cfg.omega;
    const auto inside = closed_ball(g, cfg.x0, options.eta * cfg.R);
    {
      const auto in = detail::domain_mask(g.size(), omega);
      for (std::size_t x : inside)
        if (!in[x]) throw InvalidArgument("Omega must contain B(x0, eta R)");
    }
    const std::size_t depth = options.holder_depth > 0 ? options.holder_depth : default_holder_depth(g, cfg.R);
    rep.holder_depth = depth;
    std::vector<std::pair<std::string, Vector>> data;
    if (cfg.exterior.empty()) {
      data = harnack_exterior_data(g, cfg.x0, options, options.seed + ci);
    } else {
      for (std::size_t k = 0; k < cfg.exterior.size(); ++k) data.emplace_back("custom-" + std::to_string(k), cfg.exterior[k]);
    }
    for (auto& [name, f] : data) {
      if (f.size() != g.size()) throw InvalidArgument("exterior datum size does not match the graph");
      for (double v : f)
        if (v < 0.0) throw InvalidArgument("Harnack exterior data must be nonnegative");
      HarnackRun run;
      run.config = ci;
      run.datum = name;
      DirichletProblem problem{omega, f, s};
      const DirichletSolution sol = solve_fractional_dirichlet(form, dec.measure, problem);
      double fnorm = 0.0;
      for (double v : f) fnorm = std::max(fnorm, std::abs(v));
      if (sol.residual > 1e-9 * fnorm && fnorm > 0.0)
        throw NumericalFailure("fractional Dirichlet solve left residual above 1e-9 |f|", sol.iterations,
                               sol.residual);
      run.dirichlet_iterations = sol.iterations;
      run.inf = std::numeric_limits<double>::infinity();
      for (std::size_t x : inside) {
        run.sup = std::max(run.sup, sol.u[x]);
        run.inf = std::min(run.inf, sol.u[x]);
      }
      run.degenerate = !(run.inf > 1e-12 * run.sup);
      run.ratio = run.degenerate ? std::numeric_limits<double>::infinity() : run.sup / run.inf;

      Vector lr, lm, lo;
      bool flat = false;
      for (std::size_t k = 1; k <= depth; ++k) {
        const double r = std::ldexp(cfg.R, -static_cast<int>(k));
        double a = std::numeric_limits<double>::infinity(), b = -a;
        for (std::size_t x : closed_ball(g, cfg.x0, r)) {
          a = std::min(a, sol.u[x]);
          b = std::max(b, sol.u[x]);
        }
        run.osc.push_back(b - a);
        if (!(b - a > 0.0)) flat = true;
        lr.push_back(std::log(std::pow(r, 2.0 / g.dW) / cfg.R));
        lm.push_back(std::log(r));
        lo.push_back(std::log(b - a));
      }
      run.holder_fitted = depth >= 2 && !flat;
      if (run.holder_fitted) {
        run.alpha = regression_slope(lr, lo);
        run.metric_alpha = regression_slope(lm, lo);
      } else {
        run.alpha = run.metric_alpha = std::numeric_limits<double>::quiet_NaN();
      }
      if (options.check_trace) {
        // Relative to the largest |DtN| anywhere (attained next to the data).
        const Vector d = dtn(dec, s, sol.u);
        const double scale = norm_inf(d);
        for (std::size_t x : omega) run.trace_residual = std::max(run.trace_residual, std::abs(d[x]));
        if (scale > 0.0) run.trace_residual /= scale;
      }
      rep.worst_trace_residual = std::max(rep.worst_trace_residual, run.trace_residual);
      if (run.degenerate) {
        ++rep.degenerate;
      } else {
        rep.worst_ratio = std::max(rep.worst_ratio, run.ratio);
        if (run.holder_fitted) {
          ++fitted;
          rep.alpha_min = std::min(rep.alpha_min, run.alpha);
          rep.alpha_max = std::max(rep.alpha_max, run.alpha);
          if (!(run.alpha > 0.0)) rep.pass = false;
          if (!(run.alpha > 0.0 && run.alpha <= 1.0)) rep.alpha_in_unit_interval = false;
        }
      }
      if (run.trace_residual > options.trace_tolerance) rep.pass = false;
      rep.runs.push_back(std::move(run));
    }
  }
  if (rep.degenerate == rep.runs.size()) rep.pass = false;
  if (fitted == 0) rep.alpha_min = rep.alpha_max = std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace fracext
