#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fracext/cache.hpp"
#include "fracext/extension.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/nonlocal_dirichlet.hpp"
#include "fracext/random.hpp"
#include "fracext/report.hpp"
#include "fracext/spectral.hpp"
#include "fracext/verify.hpp"

namespace fracext {

/// Everything a pipeline run needs. Built from defaults, then a config
/// file, then command-line flags.
struct RunConfig {
  Family family = Family::interval;
  int level = 5;
  std::vector<double> s_values{0.5};
  QuadratureSpec quadrature;
  double y_tolerance = 2.5e-3;  // boundary-layer tolerance of the default y-grid
  std::optional<double> y_max;
  std::optional<std::size_t> y_intervals;
  std::optional<int> extended_level;  // level of the X x [0, Y) checks
  std::vector<std::string> checks;    // empty: all
  std::filesystem::path output = "fracext-out";
  std::filesystem::path cache_dir;  // empty: <output>/cache
  bool use_cache = true;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"spectrum", "fracpow", "extension", "dtn",         "bvp", "hke",
                                              "besov",    "dirichlet", "lle",     "oscillation", "phi", "harnack"};
  return names;
}

inline bool check_depends_on_s(const std::string& name) { return name != "spectrum" && name != "hke"; }

/// Throws InvalidArgument naming the valid checks.
inline void require_check(const std::string& name) {
  const auto& all = check_names();
  if (std::find(all.begin(), all.end(), name) != all.end()) return;
  std::string list;
  for (const auto& n : all) list += (list.empty() ? "" : ", ") + n;
  throw InvalidArgument("unknown check '" + name + "'; valid checks: " + list);
}

inline void validate(const RunConfig& c, bool allow_order_one = false) {
  if (c.s_values.empty()) throw InvalidArgument("no s values given");
  for (double s : c.s_values)
    if (!(s > 0.0 && (s < 1.0 || (allow_order_one && s == 1.0))))
      throw InvalidArgument("s = " + format_double(s) + " is outside (0, 1)");
  if (c.level < 0) throw InvalidArgument("level must be non-negative");
  for (const auto& n : c.checks) require_check(n);
  if (c.jobs == 0) throw InvalidArgument("jobs must be at least 1");
}

// ---------------------------------------------------------------------------
// Default geometries

/// Largest level for the X x [0, Y) checks (killed decompositions of the
/// product domain stay a few thousand nodes).
inline int extended_level_cap(Family f) {
  switch (f) {
    case Family::interval: return 6;
    case Family::gasket: return 3;
    case Family::vicsek: return 2;
  }
  return 0;
}

/// Largest level for the elliptic Harnack check (full decomposition plus a
/// dense fractional form).
inline int harnack_level_cap(Family f) {
  switch (f) {
    case Family::interval: return 10;
    case Family::gasket: return 6;
    case Family::vicsek: return 3;
  }
  return 0;
}

/// Plane point the default centers snap to.
inline std::pair<double, double> default_center_point(Family f) {
  if (f == Family::vicsek) return {0.5, 0.5};
  return {0.5, 0.0};
}

struct ExtendedGeometry {
  double R = 0.5;
  double y_max = 1.0;
  std::size_t y_intervals = 23;
};

inline ExtendedGeometry default_extended_geometry(Family f) {
  if (f == Family::interval) return {0.25, 0.5, 16};
  return {0.5, 1.0, 23};
}

inline std::vector<double> default_harnack_radii(Family f) {
  if (f == Family::interval) return {0.25, 0.125};
  return {0.5, 0.25};
}

/// The level compared against `level` in stability checks: the next one if
/// it stays within `cap`, else the previous one.
inline int companion_level(int level, int cap) { return level + 1 <= cap ? level + 1 : level - 1; }

// ---------------------------------------------------------------------------
// Session: graphs and decompositions per level, shared across checks

class Session {
 public:
  explicit Session(RunConfig config, std::ostream& diag = std::cerr) : config_(std::move(config)), diag_(diag) {}

  const RunConfig& config() const noexcept { return config_; }
  std::ostream& diag() { return diag_; }

  std::filesystem::path cache_dir() const {
    if (!config_.use_cache) return {};
    return cache_directory(config_.cache_dir.empty() ? config_.output / "cache" : config_.cache_dir);
  }

  const FractalGraph& graph(int level) {
    auto& slot = graphs_[level];
    if (!slot) slot = std::make_unique<FractalGraph>(build_fractal({config_.family, level}, {}, config_.jobs));
    return *slot;
  }
  const FractalGraph& graph() { return graph(config_.level); }

  const GeneratorOperator& generator(int level) {
    auto& slot = generators_[level];
    if (!slot) slot = std::make_unique<GeneratorOperator>(make_generator(graph(level)));
    return *slot;
  }

  const SpectralDecomposition& decomposition(int level) {
    auto& slot = decompositions_[level];
    if (!slot) slot = std::make_unique<SpectralDecomposition>(cached_decomposition(graph(level), cache_dir(), nullptr, diag_));
    return *slot;
  }
  const SpectralDecomposition& decomposition() { return decomposition(config_.level); }

  int extended_level() const {
    return config_.extended_level.value_or(std::min(config_.level, extended_level_cap(config_.family)));
  }

  ExtendedGeometry extended_geometry() const {
    ExtendedGeometry geo = default_extended_geometry(config_.family);
    if (config_.y_max) geo.y_max = *config_.y_max;
    if (config_.y_intervals) geo.y_intervals = *config_.y_intervals;
    return geo;
  }

  ExtendedCenter extended_center(int level) {
    const auto [px, py] = default_center_point(config_.family);
    return {graph(level).nearest_vertex(px, py), 0.0, extended_geometry().R};
  }

  ExtendedOperator extended_operator(int level, double s) {
    const ExtendedGeometry geo = extended_geometry();
    return assemble_extended_operator(generator(level), YGrid::graded(s, geo.y_max, geo.y_intervals));
  }

  /// LLE result per (level, s), reused by the oscillation check.
  const LLEReport& lle(int level, double s) {
    auto& slot = lle_[{level, s}];
    if (!slot) {
      LLEOptions opt;
      slot = std::make_unique<LLEReport>(lle_check(graph(level), extended_operator(level, s), extended_center(level), opt));
    }
    return *slot;
  }

 private:
  RunConfig config_;
  std::ostream& diag_;
  std::map<int, std::unique_ptr<FractalGraph>> graphs_;
  std::map<int, std::unique_ptr<GeneratorOperator>> generators_;
  std::map<int, std::unique_ptr<SpectralDecomposition>> decompositions_;
  std::map<std::pair<int, double>, std::unique_ptr<LLEReport>> lle_;
};

// ---------------------------------------------------------------------------
// Individual checks

namespace detail {

inline CheckReport new_report(Session& session, const std::string& claim, double s, int level) {
  CheckReport r;
  r.claim = claim;
  r.family = std::string(to_string(session.config().family));
  r.level = level;
  r.s = s;
  r.seed = session.config().seed;
  return r;
}

inline Vector random_normal(std::size_t n, Rng& rng) {
  Vector f(n);
  for (double& v : f) v = rng.normal();
  return f;
}

/// Seeded smooth datum: coefficients xi_i / (1 + lambda_i).
inline Vector smooth_datum(const SpectralDecomposition& dec, std::uint64_t seed) {
  Rng rng(seed);
  Vector c(dec.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.normal() / (1.0 + dec.eigenvalues[i]);
  return dec.synthesize(c);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.storage().size(); ++i) d = std::max(d, std::abs(a.storage()[i] - b.storage()[i]));
  return d;
}

}  // namespace detail

/// Eigenpairs: -L phi = lambda phi and mu-orthonormality; on the interval
/// the Neumann and killed (interior) spectra against their closed forms.
inline CheckReport check_spectrum(Session& session) {
  const int m = session.config().level;
  const FractalGraph& g = session.graph();
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "spectral correctness", std::numeric_limits<double>::quiet_NaN(), m);
  const std::size_t n = dec.size();
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector phi = dec.mode(i);
    const Vector lphi = apply_negative_generator(g, phi);
    double d = 0.0;
    for (std::size_t x = 0; x < n; ++x) d = std::max(d, std::abs(lphi[x] - dec.eigenvalues[i] * phi[x]));
    residual = std::max(residual, d / ((1.0 + dec.eigenvalues[i]) * norm_inf(phi)));
  }
  // Gram matrix Phi^T M Phi.
  Matrix weighted(n, n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t i = 0; i < n; ++i) weighted(x, i) = dec.eigenvectors(x, i) * std::sqrt(dec.measure[x]);
  double orth = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t x = 0; x < n; ++x) acc += weighted(x, i) * weighted(x, j);
      orth = std::max(orth, std::abs(acc - (i == j ? 1.0 : 0.0)));
    }
  r.statistics["eigen_residual"] = residual;
  r.statistics["orthonormality_defect"] = orth;
  r.statistics["lambda_1"] = dec.lambda_min_positive();
  r.statistics["lambda_max"] = dec.eigenvalues.back();
  r.parameters["tolerance"] = 1e-9;
  r.pass = residual <= 1e-9 && orth <= 1e-9 && dec.eigenvalues.front() == 0.0;
  if (g.family == Family::interval) {
    const std::size_t cells = n - 1;
    const double h = 1.0 / static_cast<double>(cells);
    auto closed = [&](std::size_t k) {
      return 2.0 / (h * h) * (1.0 - std::cos(static_cast<double>(k) * std::numbers::pi / static_cast<double>(cells)));
    };
    double neumann = std::abs(dec.eigenvalues[0]);
    for (std::size_t k = 1; k < n; ++k) neumann = std::max(neumann, std::abs(dec.eigenvalues[k] / closed(k) - 1.0));
    std::vector<std::size_t> interior;
    for (std::size_t x = 1; x + 1 < n; ++x) interior.push_back(x);
    double dirichlet = 0.0;
    if (!interior.empty()) {
      const SpectralDecomposition killed = killed_decomposition(session.generator(m), interior);
      for (std::size_t k = 1; k < n - 1; ++k)
        dirichlet = std::max(dirichlet, std::abs(killed.eigenvalues[k - 1] / closed(k) - 1.0));
    }
    r.statistics["neumann_relative_error"] = neumann;
    r.statistics["dirichlet_relative_error"] = dirichlet;
    r.parameters["closed_form_tolerance"] = 1e-10;
    r.pass = r.pass && neumann <= 1e-10 && dirichlet <= 1e-10;
  }
  return r;
}

/// Three routes to (-L)^s: spectral, Balakrishnan integral per eigenvalue,
/// and the jump kernel.
inline CheckReport check_fracpow(Session& session, double s) {
  const int m = session.config().level;
  const FractalGraph& g = session.graph();
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "fractional power route agreement", s, m);
  double bal = 0.0;
  for (double l : dec.eigenvalues)
    if (l > 0.0) bal = std::max(bal, std::abs(balakrishnan_power(l, s, session.config().quadrature) / std::pow(l, s) - 1.0));
  const Matrix kernel = jump_kernel_matrix(session.generator(m), dec, s, session.config().quadrature);
  Rng rng(session.config().seed);
  double jump = 0.0;
  const std::size_t functions = 10;
  for (std::size_t k = 0; k < functions; ++k) {
    const Vector f = detail::random_normal(g.size(), rng);
    jump = std::max(jump, relative_error(jump_form_apply(kernel, g.measure, s, f), fractional_apply(dec, s, f)));
  }
  r.parameters["functions"] = functions;
  r.parameters["balakrishnan_tolerance"] = 1e-8;
  r.parameters["jump_tolerance"] = 1e-4;
  r.statistics["balakrishnan_relative_error"] = bal;
  r.statistics["jump_relative_error"] = jump;
  r.pass = bal <= 1e-8 && jump <= 1e-4;
  return r;
}

/// Per-mode extension profile: integral route against the Bessel closed
/// form, and against e^{-sqrt(lambda) y} at s = 1/2.
inline CheckReport check_extension(Session& session, double s) {
  const int m = session.config().level;
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "extension profile closed form", s, m);
  const YGrid grid = default_y_grid(dec, s, session.config().y_tolerance);
  std::vector<double> lambdas;
  const std::size_t stride = std::max<std::size_t>(1, dec.size() / 16);
  for (std::size_t i = 1; i < dec.size(); i += stride) lambdas.push_back(dec.eigenvalues[i]);
  lambdas.push_back(dec.eigenvalues.back());
  std::vector<double> ys;
  const std::size_t ystride = std::max<std::size_t>(1, grid.size() / 12);
  for (std::size_t j = 1; j < grid.size(); j += ystride) ys.push_back(grid.nodes[j]);
  double bessel = 0.0, exponential = 0.0;
  for (double l : lambdas)
    for (double y : ys) {
      const double p = per_mode_profile(l, s, y, session.config().quadrature);
      bessel = std::max(bessel, std::abs(p - per_mode_profile_bessel(l, s, y)));
      if (s == 0.5) exponential = std::max(exponential, std::abs(p - std::exp(-std::sqrt(l) * y)));
    }
  const double k_half = std::abs(bessel_k(0.5, 1.0) - std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0));
  r.parameters["modes"] = lambdas.size();
  r.parameters["heights"] = ys.size();
  r.parameters["tolerance"] = 1e-8;
  r.statistics["bessel_route_error"] = bessel;
  r.statistics["k_half_at_one_error"] = k_half;
  if (s == 0.5) r.statistics["exponential_error"] = exponential;
  r.pass = bessel <= 1e-8 && k_half <= 1e-8 && exponential <= 1e-8;
  return r;
}

/// Dirichlet-to-Neumann map of the extension against (-L)^s, spectrally and
/// through the extension solve at the default and doubled y-resolution.
inline CheckReport check_dtn(Session& session, double s) {
  const int m = session.config().level;
  const FractalGraph& g = session.graph();
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "Dirichlet-to-Neumann consistency", s, m);
  Rng rng(session.config().seed);
  const Vector f = detail::random_normal(g.size(), rng);
  const Vector ref = fractional_apply(dec, s, f);
  DtnOptions opt;
  opt.tolerance = session.config().y_tolerance;
  opt.quadrature = session.config().quadrature;
  const double spectral = relative_error(dtn(dec, s, f, opt), ref);
  const double l1 = dec.lambda_min_positive();
  const std::size_t intervals = session.config().y_intervals.value_or(
      default_y_intervals(l1, dec.eigenvalues.back(), s, session.config().y_tolerance));
  const double y_max = session.config().y_max.value_or(default_y_max(l1));
  Vector errors;
  for (std::size_t mm : {intervals, 2 * intervals}) {
    const YGrid grid = YGrid::graded(s, y_max, mm);
    errors.push_back(relative_error(dtn(solve_extension_bvp(assemble_extended_operator(session.generator(m), grid), f).field), ref));
  }
  const double ratio = errors[1] / errors[0];
  r.parameters["y_intervals"] = intervals;
  r.parameters["y_max"] = y_max;
  r.parameters["tolerance"] = 1e-2;
  r.parameters["refinement_ratio_bound"] = 0.6;
  r.statistics["spectral_relative_error"] = spectral;
  r.statistics["solver_relative_error"] = json_array(errors);
  r.statistics["refinement_ratio"] = ratio;
  r.pass = spectral <= 1e-2 && errors[0] <= 1e-2 && ratio <= 0.6;
  return r;
}

/// Extension boundary value problem against the spectral Poisson extension
/// at M = 160, and its self-convergence order over M = 160, 320, 640.
inline CheckReport check_bvp(Session& session, double s) {
  const int m = session.config().level;
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "variational extension", s, m);
  const Vector f = detail::smooth_datum(dec, session.config().seed);
  const double y_max = session.config().y_max.value_or(default_y_max(dec.lambda_min_positive()));
  std::vector<Matrix> coarse;  // each solution restricted to the M = 160 nodes
  double gap = 0.0;
  const std::size_t base = 160;
  for (std::size_t mm : {base, 2 * base, 4 * base}) {
    const YGrid grid = YGrid::graded(s, y_max, mm);
    const BvpSolution sol = solve_extension_bvp(assemble_extended_operator(session.generator(m), grid), f);
    const std::size_t step = mm / base;
    Matrix restricted(dec.size(), base + 1);
    for (std::size_t x = 0; x < dec.size(); ++x)
      for (std::size_t j = 0; j <= base; ++j) restricted(x, j) = sol.field(x, j * step);
    if (mm == base) {
      const ExtensionField pe = poisson_extend(dec, s, f, grid, session.config().quadrature, session.config().jobs);
      gap = detail::max_abs_diff(sol.field.values, pe.values) / norm_inf(f);
    }
    coarse.push_back(std::move(restricted));
  }
  const double d1 = detail::max_abs_diff(coarse[0], coarse[1]), d2 = detail::max_abs_diff(coarse[1], coarse[2]);
  const double order = std::log2(d1 / d2);
  r.parameters["y_intervals"] = Json::array({base, 2 * base, 4 * base});
  r.parameters["y_max"] = y_max;
  r.parameters["tolerance"] = 1e-2;
  r.statistics["sup_gap_to_poisson_extension"] = gap;
  r.statistics["self_convergence_differences"] = Json::array({d1, d2});
  r.statistics["self_convergence_order"] = order;
  r.pass = gap <= 1e-2 && order >= 1.0;
  return r;
}

/// On-diagonal heat kernel slope over the scaling window, envelope
/// constants, and eigenvalue decimation ratios between consecutive levels.
inline CheckReport check_hke(Session& session) {
  const RunConfig& cfg = session.config();
  const int m = cfg.level;
  const FractalGraph& g = session.graph();
  CheckReport r = detail::new_report(session, "sub-Gaussian heat kernel scaling", std::numeric_limits<double>::quiet_NaN(), m);
  const auto points = fixed_point_vertices(g);
  const HKEFitReport fit = fit_on_diagonal(session.decomposition(), g, points, scaling_window(g));
  const double target = -g.dH / g.dW;
  const double slope_error = std::abs(fit.slope / target - 1.0);
  FractalLimits limits;
  const int other = companion_level(m, std::min(limits.max_level(cfg.family), cfg.family == Family::vicsek ? 4 : 7));
  const int lo = std::min(m, other);
  const DecimationReport dec = decimation_ratios(session.graph(lo), session.graph(lo + 1));
  const double dec_tol = cfg.family == Family::gasket ? 0.02 : 0.05;
  Json pts = Json::array();
  for (std::size_t x : points) pts.push_back(x);
  r.parameters["points"] = pts;
  r.parameters["window"] = Json::array({fit.window.lo, fit.window.hi});
  r.parameters["slope_tolerance"] = 0.05;
  r.parameters["decimation_levels"] = Json::array({lo, lo + 1});
  r.parameters["decimation_tolerance"] = dec_tol;
  r.statistics["slope"] = fit.slope;
  r.statistics["target_slope"] = target;
  r.statistics["slope_relative_error"] = slope_error;
  r.statistics["c1"] = fit.c1;
  r.statistics["c2"] = fit.c2;
  r.statistics["c3"] = fit.c3;
  r.statistics["c4"] = fit.c4;
  r.statistics["max_violation"] = fit.max_violation;
  r.statistics["decimation_ratios"] = json_array(dec.ratios);
  r.statistics["decimation_target"] = dec.target;
  r.statistics["decimation_max_deviation"] = dec.max_deviation;
  r.pass = slope_error <= 0.05 && fit.max_violation <= 1e-12 && dec.max_deviation <= dec_tol;
  return r;
}

/// Spread of E^(s)(f, f) / N_{dH, s dW}(f) over the seeded ensemble.
inline CheckReport check_besov(Session& session, double s) {
  const int m = session.config().level;
  const FractalGraph& g = session.graph();
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "Besov norm equivalence", s, m);
  const auto ensemble = equivalence_ensemble(dec, session.config().seed);
  const EquivalenceReport eq = equivalence_ratio(g, dec, s, ensemble, session.config().jobs);
  r.parameters["ensemble"] = ensemble.size();
  r.parameters["spread_bound"] = 50.0;
  r.statistics["min"] = eq.min;
  r.statistics["max"] = eq.max;
  r.statistics["spread"] = eq.spread;
  r.statistics["excluded"] = eq.excluded;
  r.pass = eq.spread <= 50.0;
  return r;
}

/// Seeded fractional Dirichlet problems: residual, maximum principle and
/// energy minimality under perturbation.
inline CheckReport check_dirichlet(Session& session, double s) {
  const int m = session.config().level;
  const FractalGraph& g = session.graph();
  const SpectralDecomposition& dec = session.decomposition();
  CheckReport r = detail::new_report(session, "weak solution solver", s, m);
  const Matrix form = fractional_form_matrix(dec, s, session.config().jobs);
  Rng rng(session.config().seed);
  const std::size_t problems = 50, perturbations = 50;
  double worst_residual = 0.0, worst_excursion = 0.0, worst_energy = 0.0;
  for (std::size_t k = 0; k < problems; ++k) {
    DirichletProblem p;
    p.s = s;
    for (std::size_t x = 0; x < g.size(); ++x)
      if (rng.uniform() < 0.5) p.domain.push_back(x);
    if (p.domain.empty()) p.domain.push_back(rng.index(g.size()));
    if (p.domain.size() == g.size()) p.domain.pop_back();
    p.exterior.resize(g.size());
    for (double& v : p.exterior) v = rng.uniform();
    const auto in = detail::domain_mask(g.size(), p.domain);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, fnorm = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x)
      if (!in[x]) {
        lo = std::min(lo, p.exterior[x]);
        hi = std::max(hi, p.exterior[x]);
        fnorm = std::max(fnorm, std::abs(p.exterior[x]));
      }
    const DirichletSolution sol = solve_fractional_dirichlet(form, dec.measure, p);
    worst_residual = std::max(worst_residual, sol.residual / fnorm);
    for (std::size_t x : p.domain) worst_excursion = std::max({worst_excursion, lo - sol.u[x], sol.u[x] - hi});
    if (k == 0) {
      const double e0 = fractional_energy(dec, s, sol.u);
      for (std::size_t q = 0; q < perturbations; ++q) {
        Vector v = sol.u;
        const double eps = std::exp2(-rng.uniform(1.0, 20.0));
        for (std::size_t x : p.domain) v[x] += eps * rng.normal();
        worst_energy = std::max(worst_energy, (e0 - fractional_energy(dec, s, v)) / e0);
      }
    }
  }
  r.parameters["problems"] = problems;
  r.parameters["perturbations"] = perturbations;
  r.parameters["residual_tolerance"] = 1e-9;
  r.parameters["maximum_principle_tolerance"] = 1e-10;
  r.parameters["energy_tolerance"] = 1e-12;
  r.statistics["worst_relative_residual"] = worst_residual;
  r.statistics["worst_maximum_principle_excursion"] = worst_excursion;
  r.statistics["worst_relative_energy_decrease"] = worst_energy;
  r.pass = worst_residual <= 1e-9 && worst_excursion <= 1e-10 && worst_energy <= 1e-12;
  return r;
}

namespace detail {

inline void describe_extended(CheckReport& r, Session& session, int level, double s) {
  const ExtendedGeometry geo = session.extended_geometry();
  const ExtendedCenter c = session.extended_center(level);
  r.parameters["extended_level"] = level;
  r.parameters["x0"] = c.x0;
  r.parameters["y0"] = c.y0;
  r.parameters["R"] = c.R;
  r.parameters["y_max"] = geo.y_max;
  r.parameters["y_intervals"] = geo.y_intervals;
  r.parameters["y_grading"] = std::max(1.0, 1.0 / s);
}

}  // namespace detail

/// Local lower estimate of the killed kernel on the extended space.
inline CheckReport check_lle(Session& session, double s) {
  const int level = session.extended_level();
  CheckReport r = detail::new_report(session, "local lower estimate", s, level);
  detail::describe_extended(r, session, level, s);
  const LLEReport& lle = session.lle(level, s);
  r.parameters["epsilons"] = json_array(lle.epsilons);
  r.statistics["found"] = lle.found;
  r.statistics["epsilon"] = lle.epsilon;
  r.statistics["constant"] = lle.constant;
  r.statistics["minima"] = json_array(lle.minima);
  r.statistics["domain_size"] = lle.domain_size;
  r.pass = lle.found && lle.constant > 0.0 && lle.epsilon >= 0.05;
  if (!r.pass) session.diag() << "error: local lower estimate found no positive minimum\n";
  return r;
}

/// Oscillation decay of caloric functions over nested anisotropic cylinders.
inline CheckReport check_oscillation(Session& session, double s) {
  const int level = session.extended_level();
  CheckReport r = detail::new_report(session, "oscillation inequality", s, level);
  detail::describe_extended(r, session, level, s);
  const LLEReport& lle = session.lle(level, s);
  OscillationOptions opt;
  opt.seed = session.config().seed;
  opt.jobs = session.config().jobs;
  opt.epsilon = lle.found ? lle.epsilon : 1.0;
  const OscillationReport osc = oscillation_check(session.graph(level), session.extended_operator(level, s),
                                                  session.extended_center(level), opt);
  r.parameters["trials"] = opt.trials;
  r.parameters["epsilon"] = opt.epsilon;
  r.parameters["delta"] = osc.delta;
  r.parameters["outer"] = opt.outer;
  r.statistics["theta"] = osc.theta;
  r.statistics["alpha"] = osc.alpha;
  r.statistics["degenerate"] = osc.degenerate;
  r.statistics["ratios"] = json_array(osc.ratios);
  r.pass = osc.pass;
  return r;
}

/// Inhomogeneous parabolic Harnack constant at two consecutive levels.
inline CheckReport check_phi(Session& session, double s) {
  const int level = session.extended_level();
  const int other = companion_level(level, std::max(level, extended_level_cap(session.config().family)));
  CheckReport r = detail::new_report(session, "inhomogeneous parabolic Harnack", s, level);
  detail::describe_extended(r, session, level, s);
  PHIOptions opt;
  opt.seed = session.config().seed;
  opt.jobs = session.config().jobs;
  Json per_level = Json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool each = true;
  for (int l : {std::min(level, other), std::max(level, other)}) {
    const PHIReport phi =
        phi_check(session.graph(l), session.extended_operator(l, s), session.extended_center(l), opt);
    Json entry = Json::object();
    entry["level"] = l;
    entry["constant"] = phi.constant;
    entry["discarded"] = phi.discarded;
    entry["trials"] = phi.trials;
    entry["pass"] = phi.pass;
    per_level.push_back(entry);
    each = each && phi.pass;
    lo = std::min(lo, phi.constant);
    hi = std::max(hi, phi.constant);
  }
  const double stability = hi / lo;
  r.parameters["trials"] = opt.trials;
  r.parameters["epsilon"] = opt.epsilon;
  r.parameters["eta"] = opt.eta;
  r.parameters["l"] = opt.l;
  r.parameters["stability_bound"] = 1.5;
  r.statistics["levels"] = per_level;
  r.statistics["constant_ratio"] = stability;
  r.pass = each && stability <= 1.5;
  return r;
}

/// Elliptic Harnack ratios and Hoelder exponents of s-harmonic functions,
/// compared across two levels and two scales.
inline CheckReport check_harnack(Session& session, double s) {
  const RunConfig& cfg = session.config();
  const int m = cfg.level;
  const int other = companion_level(m, std::max(m, harnack_level_cap(cfg.family)));
  const int coarse = std::min(m, other), fine = std::max(m, other);
  CheckReport r = detail::new_report(session, "elliptic Harnack and Hoelder continuity", s, m);
  const auto radii = default_harnack_radii(cfg.family);
  HarnackOptions opt;
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  opt.holder_depth = std::max<std::size_t>(2, default_holder_depth(session.graph(coarse), radii.back()));
  const auto [px, py] = default_center_point(cfg.family);
  std::vector<HarnackReport> reports;
  for (int l : {coarse, fine}) {
    const FractalGraph& g = session.graph(l);
    std::vector<HarnackConfig> configs;
    for (double R : radii) configs.push_back({g.nearest_vertex(px, py), R, {}, {}});
    reports.push_back(harnack_holder_main(g, session.decomposition(l), s, configs, opt));
  }
  // Worst ratio per (level, R) and per-run exponent drift between levels.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0, drift = 0.0;
  bool pass = true, unit = true;
  Json per_level = Json::array();
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const HarnackReport& rep = reports[k];
    pass = pass && rep.pass;
    unit = unit && rep.alpha_in_unit_interval;
    Json worst = Json::array();
    for (std::size_t c = 0; c < radii.size(); ++c) {
      double w = 0.0;
      for (const auto& run : rep.runs)
        if (run.config == c && !run.degenerate) w = std::max(w, run.ratio);
      worst.push_back(w);
      if (w > 0.0) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
    }
    Json entry = Json::object();
    entry["level"] = k == 0 ? coarse : fine;
    entry["worst_ratio_per_radius"] = worst;
    entry["alpha_min"] = rep.alpha_min;
    entry["alpha_max"] = rep.alpha_max;
    entry["degenerate"] = rep.degenerate;
    entry["worst_trace_residual"] = rep.worst_trace_residual;
    Json alphas = Json::array(), metric = Json::array();
    for (const auto& run : rep.runs) {
      alphas.push_back(run.alpha);
      metric.push_back(run.metric_alpha);
    }
    entry["alpha"] = alphas;
    entry["metric_alpha"] = metric;
    per_level.push_back(entry);
  }
  for (std::size_t i = 0; i < reports[0].runs.size() && i < reports[1].runs.size(); ++i) {
    const auto& a = reports[0].runs[i];
    const auto& b = reports[1].runs[i];
    if (a.holder_fitted && b.holder_fitted) drift = std::max(drift, std::abs(b.alpha / a.alpha - 1.0));
  }
  const double stability = hi / lo;
  Json rs = Json::array();
  for (double R : radii) rs.push_back(R);
  r.parameters["levels"] = Json::array({coarse, fine});
  r.parameters["radii"] = rs;
  r.parameters["eta"] = opt.eta;
  r.parameters["holder_depth"] = opt.holder_depth;
  r.parameters["ratio_stability_bound"] = 1.5;
  r.parameters["alpha_drift_bound"] = 0.15;
  r.statistics["levels"] = per_level;
  r.statistics["ratio_stability"] = stability;
  r.statistics["alpha_drift"] = drift;
  r.statistics["alpha_in_unit_interval"] = unit;
  r.pass = pass && stability <= 1.5 && drift <= 0.15;
  return r;
}

inline CheckReport run_check(Session& session, const std::string& name, double s) {
  require_check(name);
  if (name == "spectrum") return check_spectrum(session);
  if (name == "fracpow") return check_fracpow(session, s);
  if (name == "extension") return check_extension(session, s);
  if (name == "dtn") return check_dtn(session, s);
  if (name == "bvp") return check_bvp(session, s);
  if (name == "hke") return check_hke(session);
  if (name == "besov") return check_besov(session, s);
  if (name == "dirichlet") return check_dirichlet(session, s);
  if (name == "lle") return check_lle(session, s);
  if (name == "oscillation") return check_oscillation(session, s);
  if (name == "phi") return check_phi(session, s);
  return check_harnack(session, s);
}

}  // namespace fracext
