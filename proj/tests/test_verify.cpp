#include <gtest/gtest.h>

#include <cmath>

#include "fracext/verify.hpp"

using namespace fracext;

namespace {

struct Fixture {
  FractalGraph graph;
  GeneratorOperator op;
  SpectralDecomposition dec;
};

Fixture fixture(Family f, int m) {
  Fixture st{build_fractal({f, m}), {}, {}};
  st.op = make_generator(st.graph);
  st.dec = eigendecompose(st.op);
  return st;
}

// Interval x y-grid used by the extended-space checks.
struct ExtendedFixture {
  Fixture base;
  ExtendedOperator ext;
  ExtendedCenter center;
};

ExtendedFixture extended(int m) {
  ExtendedFixture e{fixture(Family::interval, m), {}, {}};
  e.ext = assemble_extended_operator(e.base.op, YGrid::graded(0.5, 0.5, 16));
  e.center = {e.base.graph.nearest_vertex(0.5, 0.0), 0.0, 0.25};
  return e;
}

}  // namespace

TEST(HeatKernelFit, IntervalSlopeNearHalf) {
  const Fixture st = fixture(Family::interval, 6);
  const auto rep = fit_on_diagonal(st.dec, st.graph, fixed_point_vertices(st.graph), scaling_window(st.graph));
  EXPECT_NEAR(rep.slope, -0.5, 0.025);
  EXPECT_LE(rep.max_violation, 1e-12);
}

TEST(HeatKernelFit, GasketSlopeNearDimensionRatio) {
  const Fixture st = fixture(Family::gasket, 4);
  const auto rep = fit_on_diagonal(st.dec, st.graph, fixed_point_vertices(st.graph), scaling_window(st.graph));
  const double target = -std::log(3.0) / std::log(5.0);
  EXPECT_LE(std::abs(rep.slope / target - 1.0), 0.05);
}

TEST(HeatKernelFit, EnvelopesAreTight) {
  const Fixture st = fixture(Family::gasket, 5);
  const auto rep = fit_on_diagonal(st.dec, st.graph, fixed_point_vertices(st.graph), {0.004, 0.04});
  EXPECT_GT(rep.pair_samples, 0u);
  EXPECT_LE(envelope_violation(rep, rep.c1, rep.c2, rep.c3, rep.c4), 1e-12);
  EXPECT_GT(envelope_violation(rep, rep.c1, rep.c2, 0.99 * rep.c3, rep.c4), 0.0);
  EXPECT_GT(envelope_violation(rep, 1.01 * rep.c1, rep.c2, rep.c3, rep.c4), 0.0);
  // On the diagonal xi = 0, so the bounds read c1 <= p_t(x,x) t^{dH/dW} <= c3.
  for (std::size_t k = 0; k < rep.sample_q.size(); ++k)
    if (rep.sample_xi[k] == 0.0) {
      EXPECT_GE(rep.sample_q[k], rep.c1);
      EXPECT_LE(rep.sample_q[k], rep.c3);
    }
}

TEST(HeatKernelFit, WindowErrors) {
  const Fixture st = fixture(Family::interval, 5);
  const auto pts = fixed_point_vertices(st.graph);
  EXPECT_THROW(fit_on_diagonal(st.dec, st.graph, pts, {0.05, 0.01}), WindowError);
  EXPECT_THROW(fit_on_diagonal(st.dec, st.graph, pts, {1e-6, 0.01}), WindowError);
  EXPECT_THROW(fit_on_diagonal(st.dec, st.graph, pts, {0.01, 0.5}), WindowError);
  // The scaling window is empty below vicsek level 3.
  const Fixture v = fixture(Family::vicsek, 2);
  EXPECT_THROW(check_time_window(v.dec, v.graph, scaling_window(v.graph)), WindowError);
}

TEST(Decimation, GasketRatiosNearFive) {
  const auto rep = decimation_ratios(build_fractal({Family::gasket, 4}), build_fractal({Family::gasket, 5}));
  EXPECT_EQ(rep.target, 5.0);
  EXPECT_LE(rep.max_deviation, 0.02);
  EXPECT_THROW(decimation_ratios(build_fractal({Family::gasket, 3}), build_fractal({Family::gasket, 5})),
               InvalidArgument);
}

TEST(LocalLowerEstimate, PositiveAndMonotoneInEpsilon) {
  const ExtendedFixture e = extended(5);
  const LLEReport rep = lle_check(e.base.graph, e.ext, e.center);
  ASSERT_TRUE(rep.found);
  EXPECT_GT(rep.constant, 0.0);
  EXPECT_GE(rep.epsilon, 0.05);
  // epsilons descend, so the minima can only grow along the grid.
  for (std::size_t k = 1; k < rep.minima.size(); ++k) EXPECT_GE(rep.minima[k], rep.minima[k - 1]);
}

TEST(LocalLowerEstimate, DiagonalPositiveAtSmallTimes) {
  const ExtendedFixture e = extended(4);
  const ProductDomain dom = product_domain(e.base.graph, e.ext.grid, e.center.x0, 0.0, e.center.R);
  const auto idx = dom.indices(e.ext);
  const Matrix q = extended_killed_kernel(e.ext, dom, 1e-4);
  const std::size_t z = std::lower_bound(idx.begin(), idx.end(), e.ext.index(e.center.x0, 0)) - idx.begin();
  EXPECT_GT(q(z, z), 0.0);
}

TEST(Oscillation, GroundModeDecays) {
  const ExtendedFixture e = extended(5);
  const SpectralDecomposition caloric = killed_on(e.base.graph, e.ext, e.center, 1.5);
  const Vector psi = caloric.mode(0);
  const OscillationTrial tr = oscillation_trial(e.base.graph, e.ext, e.center, caloric, psi, 0.5);
  ASSERT_FALSE(tr.degenerate);
  EXPECT_LT(tr.osc_small / tr.osc_big, 1.0);
}

TEST(Oscillation, ZeroDatumIsDegenerate) {
  const ExtendedFixture e = extended(4);
  const SpectralDecomposition caloric = killed_on(e.base.graph, e.ext, e.center, 1.5);
  const Vector zero(caloric.size(), 0.0);
  EXPECT_TRUE(oscillation_trial(e.base.graph, e.ext, e.center, caloric, zero, 0.5).degenerate);
}

TEST(Oscillation, RandomTrialsContract) {
  const ExtendedFixture e = extended(5);
  OscillationOptions opt;
  opt.trials = 20;
  const OscillationReport rep = oscillation_check(e.base.graph, e.ext, e.center, opt);
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.theta, 1.0);
  EXPECT_GT(rep.alpha, 0.0);
  EXPECT_LE(rep.alpha, 1.0);
  opt.jobs = 3;
  EXPECT_EQ(oscillation_check(e.base.graph, e.ext, e.center, opt).theta, rep.theta);
}

TEST(ParabolicHarnack, PositiveDataKeepsEveryTrial) {
  const ExtendedFixture e = extended(5);
  PHIOptions opt;
  opt.trials = 10;
  const PHIReport rep = phi_check(e.base.graph, e.ext, e.center, opt);
  EXPECT_EQ(rep.discarded, 0u);
  EXPECT_TRUE(rep.pass);
  for (double r : rep.ratios) {
    EXPECT_GT(r, 0.0);
    EXPECT_TRUE(std::isfinite(r));
  }
}

TEST(ParabolicHarnack, RejectsBadGeometry) {
  const ExtendedFixture e = extended(3);
  PHIOptions opt;
  opt.l = 1.0;
  EXPECT_THROW(phi_check(e.base.graph, e.ext, e.center, opt), InvalidArgument);
}

namespace {

HarnackReport harnack_with(const Fixture& st, std::size_t x0, double R, Vector datum, HarnackOptions opt = {}) {
  std::vector<HarnackConfig> cfg{{x0, R, {}, {std::move(datum)}}};
  return harnack_holder_main(st.graph, st.dec, 0.5, cfg, opt);
}

}  // namespace

TEST(EllipticHarnack, ConstantDatumGivesConstant) {
  const Fixture st = fixture(Family::gasket, 4);
  const std::size_t x0 = st.graph.nearest_vertex(0.5, 0.0);
  const HarnackReport rep = harnack_with(st, x0, 0.5, Vector(st.graph.size(), 1.0));
  ASSERT_EQ(rep.runs.size(), 1u);
  EXPECT_EQ(rep.runs[0].ratio, 1.0);
  for (double o : rep.runs[0].osc) EXPECT_EQ(o, 0.0);
  EXPECT_FALSE(rep.runs[0].holder_fitted);
}

TEST(EllipticHarnack, ZeroDatumIsDegenerate) {
  const Fixture st = fixture(Family::gasket, 3);
  const HarnackReport rep = harnack_with(st, st.graph.nearest_vertex(0.5, 0.0), 0.5, Vector(st.graph.size(), 0.0));
  EXPECT_TRUE(rep.runs[0].degenerate);
  EXPECT_EQ(rep.degenerate, 1u);
  EXPECT_FALSE(rep.pass);
}

TEST(EllipticHarnack, RatioInvariantUnderScaling) {
  const Fixture st = fixture(Family::gasket, 4);
  const std::size_t x0 = st.graph.nearest_vertex(0.5, 0.0);
  HarnackOptions opt;
  const auto data = harnack_exterior_data(st.graph, x0, opt, 3);
  for (const auto& [name, f] : data) {
    const HarnackReport base = harnack_with(st, x0, 0.5, f);
    for (double c : {0.25, 8.0}) {
      Vector g = f;
      for (double& v : g) v *= c;
      EXPECT_EQ(harnack_with(st, x0, 0.5, g).runs[0].ratio, base.runs[0].ratio) << name;
    }
    Vector g = f;
    for (double& v : g) v *= 3.0;
    EXPECT_NEAR(harnack_with(st, x0, 0.5, g).runs[0].ratio, base.runs[0].ratio, 1e-12 * base.runs[0].ratio);
  }
}

TEST(EllipticHarnack, HolderExponentInvariantUnderAffineMaps) {
  const Fixture st = fixture(Family::gasket, 4);
  const std::size_t x0 = st.graph.nearest_vertex(0.5, 0.0);
  HarnackOptions opt;
  opt.holder_depth = 3;
  const auto data = harnack_exterior_data(st.graph, x0, opt, 5);
  for (const auto& [name, f] : data) {
    const HarnackReport base = harnack_with(st, x0, 0.5, f, opt);
    ASSERT_TRUE(base.runs[0].holder_fitted) << name;
    Vector g = f;
    for (double& v : g) v = 2.5 * v + 0.75;
    const HarnackReport moved = harnack_with(st, x0, 0.5, g, opt);
    EXPECT_NEAR(moved.runs[0].alpha, base.runs[0].alpha, 1e-8) << name;
    EXPECT_NEAR(moved.runs[0].metric_alpha, base.runs[0].metric_alpha, 1e-8) << name;
  }
}

TEST(EllipticHarnack, DefaultDataAreNondegenerateAndHarmonicTraces) {
  const Fixture st = fixture(Family::gasket, 4);
  std::vector<HarnackConfig> cfg{{st.graph.nearest_vertex(0.5, 0.0), 0.5, {}, {}}};
  HarnackOptions opt;
  opt.holder_depth = 2;
  const HarnackReport rep = harnack_holder_main(st.graph, st.dec, 0.5, cfg, opt);
  EXPECT_EQ(rep.runs.size(), 1 + opt.bumps);
  EXPECT_EQ(rep.degenerate, 0u);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.worst_trace_residual, 1e-2);
  for (const auto& run : rep.runs) {
    EXPECT_GE(run.ratio, 1.0);
    EXPECT_TRUE(std::isfinite(run.ratio));
    EXPECT_GT(run.alpha, 0.0);
  }
}

TEST(EllipticHarnack, RejectsNegativeDataAndSmallOmega) {
  const Fixture st = fixture(Family::gasket, 3);
  const std::size_t x0 = st.graph.nearest_vertex(0.5, 0.0);
  Vector f(st.graph.size(), 1.0);
  f[0] = -1.0;
  EXPECT_THROW(harnack_with(st, x0, 0.5, f), InvalidArgument);
  std::vector<HarnackConfig> cfg{{x0, 0.5, {x0}, {Vector(st.graph.size(), 1.0)}}};
  EXPECT_THROW(harnack_holder_main(st.graph, st.dec, 0.5, cfg), InvalidArgument);
}
