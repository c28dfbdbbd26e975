#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracext/extension.hpp"
#include "fracext/random.hpp"

using namespace fracext;

namespace {

// K_s(x) = int_0^inf e^{-x cosh u} cosh(s u) du by the trapezoid rule.
double bessel_k_by_integral(double s, double x) {
  const double upper = std::acosh(std::max(1.0, 60.0 / x)) + 5.0;
  const int n = 20000;
  const double h = upper / n;
  double acc = 0.5 * std::exp(-x);
  for (int k = 1; k <= n; ++k) {
    const double u = k * h;
    acc += std::exp(-x * std::cosh(u)) * std::cosh(s * u);
  }
  return acc * h;
}

struct Fixture {
  FractalGraph graph;
  GeneratorOperator op;
  SpectralDecomposition dec;
};

Fixture setup(Family f, int m) {
  Fixture st{build_fractal({f, m}), {}, {}};
  st.op = make_generator(st.graph);
  st.dec = eigendecompose(st.op);
  return st;
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST(Bessel, HalfOrderClosedForm) {
  EXPECT_NEAR(bessel_k(0.5, 1.0), std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0), 1e-8);
  for (double x : {1e-3, 0.5, 1.9, 2.1, 7.0, 19.0, 25.0, 30.0})
    EXPECT_NEAR(bessel_k(0.5, x) / (std::sqrt(std::numbers::pi / (2 * x)) * std::exp(-x)), 1.0, 1e-9) << x;
}

TEST(Bessel, MatchesIntegralRepresentation) {
  EXPECT_NEAR(bessel_k(0.3, 2.0), bessel_k_by_integral(0.3, 2.0), 1e-8);
  for (double s : {0.1, 0.3, 0.7, 0.95})
    for (double x : {1e-3, 0.1, 1.0, 2.0, 2.5, 5.0, 12.0, 20.0, 30.0})
      EXPECT_NEAR(bessel_k(s, x) / bessel_k_by_integral(s, x), 1.0, 1e-9) << s << " " << x;
}

TEST(Bessel, PositiveAndDecreasing) {
  for (double s : {0.2, 0.6}) {
    double prev = bessel_k(s, 1e-3);
    for (double x = 0.01; x < 30.0; x *= 1.3) {
      const double v = bessel_k(s, x);
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
  EXPECT_THROW(bessel_k(0.5, 0.0), InvalidArgument);
  EXPECT_THROW(bessel_k(1.0, 1.0), InvalidArgument);
  EXPECT_THROW(bessel_k(0.0, 1.0), InvalidArgument);
}

TEST(Profile, BoundaryAndConstantMode) {
  for (double s : {0.2, 0.5, 0.8}) {
    EXPECT_EQ(per_mode_profile(3.0, s, 0.0), 1.0);
    for (double y : {1e-3, 0.5, 4.0}) EXPECT_EQ(per_mode_profile(0.0, s, y), 1.0);
  }
}

TEST(Profile, HalfOrderIsExponential) {
  EXPECT_NEAR(per_mode_profile(4.0, 0.5, 0.5), std::exp(-1.0), 1e-8);
  for (double l : {0.1, 10.0, 1000.0})
    for (double y : {1e-6, 1e-3, 0.1, 1.0})
      EXPECT_NEAR(per_mode_profile(l, 0.5, y), std::exp(-std::sqrt(l) * y), 1e-8) << l << " " << y;
}

TEST(Profile, TwoRoutesAgree) {
  for (double s : {0.1, 0.3, 0.5, 0.7, 0.9})
    for (double l : {1.0, 30.0, 1000.0})
      for (double y : {1e-4, 1e-2, 0.1, 0.5, 2.0})
        EXPECT_NEAR(per_mode_profile(l, s, y), per_mode_profile_bessel(l, s, y), 1e-8) << s << " " << l << " " << y;
}

TEST(Profile, MonotoneAndBounded) {
  for (double s : {0.25, 0.75}) {
    double prev = 1.0;
    for (double y = 1e-4; y < 5.0; y *= 1.5) {
      const double v = per_mode_profile(20.0, s, y);
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(Profile, DeficitAccurateForTinyY) {
  // 1 - psi ~ C_s (sqrt(lambda) y)^{2s} as y -> 0.
  const double s = 0.3, l = 50.0, y = 1e-9;
  const double lead = boundary_layer_constant(s) * std::pow(std::sqrt(l) * y, 2 * s);
  EXPECT_NEAR(per_mode_deficit(l, s, y) / lead, 1.0, 1e-6);
}

TEST(YGridTest, WeightsAndConductances) {
  const YGrid g = YGrid::graded(0.3, 2.0, 50);
  EXPECT_EQ(g.size(), 51u);
  EXPECT_DOUBLE_EQ(g.a, 0.4);
  double total = 0.0;
  for (double w : g.weight) {
    EXPECT_GT(w, 0.0);
    total += w;
  }
  EXPECT_NEAR(total, std::pow(2.0, 1.4) / 1.4, 1e-12);
  for (std::size_t j = 0; j < g.intervals(); ++j) {
    EXPECT_GT(g.conductance[j], 0.0);
    EXPECT_NEAR(g.edge_weight[j], power_integral(0.4, g.nodes[j], g.nodes[j + 1]), 1e-15);
  }
  // kappa = 1/s grading.
  EXPECT_NEAR(g.nodes[1], 2.0 * std::pow(1.0 / 50.0, 1.0 / 0.3), 1e-18);
  EXPECT_THROW(YGrid::graded(1.0, 1.0, 10), InvalidArgument);
}

TEST(PoissonExtend, ConstantsStayConstant) {
  const Fixture st = setup(Family::gasket, 2);
  const YGrid grid = YGrid::graded(0.4, 3.0, 20);
  const Vector f(st.graph.size(), 2.5);
  const ExtensionField u = poisson_extend(st.dec, 0.4, f, grid);
  for (std::size_t x = 0; x < u.vertices(); ++x)
    for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_NEAR(u(x, j), 2.5, 1e-12);
}

TEST(PoissonExtend, HalfOrderGroundModeClosedForm) {
  const Fixture st = setup(Family::interval, 4);
  const double l1 = st.dec.eigenvalues[1];
  const Vector phi = st.dec.mode(1);
  const YGrid grid = YGrid::graded(0.5, 2.0, 40);
  const ExtensionField u = poisson_extend(st.dec, 0.5, phi, grid);
  for (std::size_t x = 0; x < phi.size(); ++x)
    for (std::size_t j = 0; j < grid.size(); ++j)
      EXPECT_NEAR(u(x, j), phi[x] * std::exp(-std::sqrt(l1) * grid.nodes[j]), 1e-9);
}

TEST(PoissonExtend, OnlyMeanSurvivesFarAway) {
  const Fixture st = setup(Family::gasket, 2);
  const double l1 = st.dec.lambda_min_positive();
  const YGrid grid = YGrid::graded(0.6, 31.0 / std::sqrt(l1), 10);
  const Vector f = random_vector(st.graph.size(), 2);
  const ExtensionField u = poisson_extend(st.dec, 0.6, f, grid);
  const double mean = weighted_dot(f, Vector(f.size(), 1.0), st.graph.measure);
  for (std::size_t x = 0; x < f.size(); ++x) EXPECT_NEAR(u(x, grid.size() - 1), mean, 1e-10);
  for (std::size_t x = 0; x < f.size(); ++x) EXPECT_EQ(u(x, 0), f[x]);
}

TEST(ExtendedOperatorTest, EnergyBasics) {
  const Fixture st = setup(Family::gasket, 2);
  const YGrid grid = YGrid::graded(0.3, 2.0, 12);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  const Vector ones(ext.size(), 1.0);
  EXPECT_NEAR(ext.energy(ones, ones), 0.0, 1e-12);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Vector u = random_vector(ext.size(), seed);
    EXPECT_GE(ext.energy(u, u), 0.0);
  }
  const Vector u = random_vector(ext.size(), 101), v = random_vector(ext.size(), 102);
  Vector ku(ext.size()), kv(ext.size());
  ext.apply_stiffness(u, ku);
  ext.apply_stiffness(v, kv);
  EXPECT_NEAR(dot(ku, v), dot(u, kv), 1e-9 * std::abs(dot(ku, v)));
  EXPECT_NEAR(ext.energy(u, v), dot(ku, v), 1e-9 * std::abs(dot(ku, v)));
}

TEST(ExtendedOperatorTest, SeparableSplit) {
  const Fixture st = setup(Family::vicsek, 1);
  const YGrid grid = YGrid::graded(0.7, 1.5, 9);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  const Vector f = random_vector(st.graph.size(), 4);
  Vector g(grid.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = std::cos(grid.nodes[j]) + 0.1 * j;
  Vector u(ext.size());
  for (std::size_t x = 0; x < f.size(); ++x)
    for (std::size_t j = 0; j < g.size(); ++j) u[ext.index(x, j)] = f[x] * g[j];
  // Independent one-dimensional pieces.
  double ef = 0.0;
  for (const auto& e : st.graph.edges) ef += e.conductance * (f[e.i] - f[e.j]) * (f[e.i] - f[e.j]);
  double nu_g2 = 0.0, eg = 0.0, mu_f2 = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) nu_g2 += grid.weight[j] * g[j] * g[j];
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    const double d = g[j + 1] - g[j];
    eg += d * d / power_integral(-grid.a, grid.nodes[j], grid.nodes[j + 1]);
  }
  for (std::size_t x = 0; x < f.size(); ++x) mu_f2 += st.graph.measure[x] * f[x] * f[x];
  const double expected = nu_g2 * ef + mu_f2 * eg;
  EXPECT_NEAR(ext.energy(u, u), expected, 1e-12 * expected);
}

TEST(Bvp, ConstantDatumNeedsNoIterations) {
  const Fixture st = setup(Family::gasket, 2);
  const ExtendedOperator ext = assemble_extended_operator(st.op, YGrid::graded(0.5, 2.0, 30));
  const BvpSolution sol = solve_extension_bvp(ext, Vector(st.graph.size(), -1.5));
  EXPECT_EQ(sol.iterations, 0u);
  for (double v : sol.field.values.storage()) EXPECT_EQ(v, -1.5);
}

TEST(Bvp, HalfOrderMatchesClosedFormAndConverges) {
  const Fixture st = setup(Family::interval, 4);
  const double l1 = st.dec.lambda_min_positive();
  const double y_max = std::log(1e6) / std::sqrt(l1);
  const Vector phi = st.dec.mode(1);
  std::vector<double> gaps;
  for (std::size_t m : {160u, 320u, 640u}) {
    const YGrid grid = YGrid::graded(0.5, y_max, m);
    const BvpSolution sol = solve_extension_bvp(assemble_extended_operator(st.op, grid), phi);
    EXPECT_LE(sol.residual, 1e-10);
    double gap = 0.0;
    for (std::size_t x = 0; x < phi.size(); ++x)
      for (std::size_t j = 0; j < grid.size(); ++j)
        gap = std::max(gap, std::abs(sol.field(x, j) - phi[x] * std::exp(-std::sqrt(l1) * grid.nodes[j])));
    gaps.push_back(gap);
  }
  EXPECT_LE(gaps[0], 1e-2);
  EXPECT_GE(std::log2(gaps[0] / gaps[1]), 1.0);
  EXPECT_GE(std::log2(gaps[1] / gaps[2]), 1.0);
}

TEST(Bvp, MinimizesEnergyAgainstPoissonExtension) {
  const Fixture st = setup(Family::gasket, 2);
  const Vector f = random_vector(st.graph.size(), 6);
  const double s = 0.4;
  const YGrid grid = YGrid::graded(s, default_y_max(st.dec.lambda_min_positive()), 160);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  const BvpSolution sol = solve_extension_bvp(ext, f);
  ExtensionField pe = poisson_extend(st.dec, s, f, grid);
  // Same top closure so both are admissible for the discrete minimization.
  const double mean = weighted_dot(f, Vector(f.size(), 1.0), st.graph.measure);
  for (std::size_t x = 0; x < f.size(); ++x) pe.values(x, grid.size() - 1) = mean;
  const double e_bvp = ext.energy(sol.field), e_pe = ext.energy(pe);
  EXPECT_GE(e_pe, e_bvp * (1 - 1e-9));
  EXPECT_NEAR(e_pe / e_bvp, 1.0, 1e-2);
}

TEST(Dtn, HalfOrderConstantAndGroundMode) {
  EXPECT_NEAR(dtn_constant(0.5), -1.0, 1e-15);
  const Fixture st = setup(Family::interval, 4);
  const Vector phi = st.dec.mode(1);
  const Vector d = dtn(st.dec, 0.5, phi);
  const double l1 = st.dec.eigenvalues[1];
  for (std::size_t x = 0; x < phi.size(); ++x) EXPECT_NEAR(d[x], std::sqrt(l1) * phi[x], 1e-3 * std::sqrt(l1));
  for (double v : dtn(st.dec, 0.5, Vector(phi.size(), 3.0))) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Dtn, ConstantDatumFromSolverIsZero) {
  const Fixture st = setup(Family::gasket, 2);
  const ExtendedOperator ext = assemble_extended_operator(st.op, YGrid::graded(0.3, 2.0, 40));
  for (double v : dtn(solve_extension_bvp(ext, Vector(st.graph.size(), 1.0)).field)) EXPECT_EQ(v, 0.0);
}

TEST(Dtn, RandomDatumGasketMatchesFractionalPower) {
  const Fixture st = setup(Family::gasket, 3);
  const double s = 0.3;
  const Vector f = random_vector(st.graph.size(), 9);
  const Vector ref = fractional_apply(st.dec, s, f);
  EXPECT_LE(relative_error(dtn(st.dec, s, f), ref), 1e-2);
  const double l1 = st.dec.lambda_min_positive();
  const std::size_t m = default_y_intervals(l1, st.dec.eigenvalues.back(), s);
  std::vector<double> errs;
  for (std::size_t mm : {m, 2 * m}) {
    const YGrid grid = YGrid::graded(s, default_y_max(l1), mm);
    errs.push_back(relative_error(dtn(solve_extension_bvp(assemble_extended_operator(st.op, grid), f).field), ref));
  }
  EXPECT_LE(errs[0], 1e-2);
  EXPECT_LE(errs[1] / errs[0], 0.6);
}

TEST(Dtn, CoarseFirstCellIsAResolutionError) {
  const Fixture st = setup(Family::gasket, 2);
  DtnOptions opt;
  opt.y1 = 0.1;
  EXPECT_THROW(dtn(st.dec, 0.5, Vector(st.graph.size(), 1.0), opt), ResolutionError);
}

TEST(KilledKernel, SymmetricSubstochasticDominatedByProductKernel) {
  const Fixture st = setup(Family::interval, 4);
  const YGrid grid = YGrid::graded(0.5, 2.0, 10);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  const ProductDomain dom = product_domain(st.graph, grid, 8, 0.3, 0.4);
  const auto idx = dom.indices(ext);
  const double t = 0.01;
  const Matrix q = extended_killed_kernel(ext, dom, t);
  // Unkilled oracle: product of the two one-dimensional kernels.
  const Matrix px = heat_matrix(st.dec, t);
  const Matrix py = heat_matrix(eigendecompose(y_generator(grid)), t);
  const Vector mass = ext.mass();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      EXPECT_EQ(q(a, b), q(b, a));
      const std::size_t xa = idx[a] / ext.ny(), ja = idx[a] % ext.ny();
      const std::size_t xb = idx[b] / ext.ny(), jb = idx[b] % ext.ny();
      EXPECT_LE(q(a, b), px(xa, xb) * py(ja, jb) + 1e-9);
      row += q(a, b) * mass[idx[b]];
    }
    EXPECT_LE(row, 1.0 + 1e-10);
    EXPECT_GT(q(a, a), 0.0);
  }
}

TEST(KilledKernel, DenseGeneratorMatchesProductSpectrum) {
  const Fixture st = setup(Family::interval, 2);
  const YGrid grid = YGrid::graded(0.5, 1.0, 4);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  const Vector full = generator_eigenvalues(ext.generator());
  const Vector ly = generator_eigenvalues(y_generator(grid));
  Vector sums;
  for (double a : st.dec.eigenvalues)
    for (double b : ly) sums.push_back(a + b);
  std::sort(sums.begin(), sums.end());
  for (std::size_t i = 0; i < sums.size(); ++i) EXPECT_NEAR(full[i], sums[i], 1e-9 * (1 + sums[i]));
}

TEST(KilledKernel, RejectsWholeSpaceAndSizeLimit) {
  const Fixture st = setup(Family::interval, 2);
  const YGrid grid = YGrid::graded(0.5, 1.0, 4);
  const ExtendedOperator ext = assemble_extended_operator(st.op, grid);
  ProductDomain all;
  for (std::size_t x = 0; x < ext.nx(); ++x) all.x_vertices.push_back(x);
  for (std::size_t j = 0; j < ext.ny(); ++j) all.y_nodes.push_back(j);
  EXPECT_THROW(extended_killed_kernel(ext, all, 0.1), InvalidArgument);
  const ProductDomain dom = product_domain(st.graph, grid, 2, 0.0, 0.5);
  EXPECT_THROW(extended_killed_kernel(ext, dom, 0.1, 2), SizeLimitError);
}

TEST(NuA, BallMeasure) {
  EXPECT_NEAR(nu_a_ball(0.0, 0.3, 0.2), 0.4, 1e-15);
  EXPECT_NEAR(nu_a_ball(0.4, 0.0, 1.0), 2.0 / 1.4, 1e-15);
  EXPECT_NEAR(nu_a_ball(-0.4, 1.0, 0.5), power_integral(-0.4, 0.5, 1.5), 1e-15);
}
