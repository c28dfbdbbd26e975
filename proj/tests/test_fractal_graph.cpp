#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "fracext/fractal_graph.hpp"
#include "fracext/spectral.hpp"

using namespace fracext;

namespace {

// Independent IFS enumeration with floating coordinates and tolerance
// merging; used only to count vertices and edges.
std::pair<std::size_t, std::size_t> gasket_counts_by_enumeration(int m) {
  const double h = std::sqrt(3.0) / 2.0;
  std::vector<std::array<double, 2>> corners{{0.0, 0.0}, {1.0, 0.0}, {0.5, h}};
  std::vector<std::vector<std::array<double, 2>>> cells{corners};
  for (int level = 0; level < m; ++level) {
    std::vector<std::vector<std::array<double, 2>>> next;
    for (const auto& c : cells)
      for (int k = 0; k < 3; ++k) {
        std::vector<std::array<double, 2>> sub;
        for (const auto& p : c) sub.push_back({0.5 * (p[0] + c[k][0]), 0.5 * (p[1] + c[k][1])});
        next.push_back(sub);
      }
    cells = next;
  }
  std::vector<std::array<double, 2>> pts;
  auto find = [&](std::array<double, 2> p) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (std::abs(pts[i][0] - p[0]) < 1e-12 && std::abs(pts[i][1] - p[1]) < 1e-12) return i;
    pts.push_back(p);
    return pts.size() - 1;
  };
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& c : cells) {
    std::size_t a = find(c[0]), b = find(c[1]), d = find(c[2]);
    edges.insert(std::minmax(a, b));
    edges.insert(std::minmax(b, d));
    edges.insert(std::minmax(a, d));
  }
  return {pts.size(), edges.size()};
}

}  // namespace

TEST(BuildFractal, GasketLevelTwoCounts) {
  const FractalGraph g = build_fractal({Family::gasket, 2});
  const auto [nv, ne] = gasket_counts_by_enumeration(2);
  EXPECT_EQ(g.size(), 15u);
  EXPECT_EQ(g.edges.size(), 27u);
  EXPECT_EQ(g.size(), nv);
  EXPECT_EQ(g.edges.size(), ne);
  EXPECT_EQ(g.size(), (27u + 3u) / 2u);
}

TEST(BuildFractal, GasketCountsMatchEnumerationAcrossLevels) {
  for (int m = 0; m <= 4; ++m) {
    const FractalGraph g = build_fractal({Family::gasket, m});
    const auto [nv, ne] = gasket_counts_by_enumeration(m);
    EXPECT_EQ(g.size(), nv) << "level " << m;
    EXPECT_EQ(g.edges.size(), ne) << "level " << m;
  }
}

TEST(BuildFractal, IntervalAndVicsekSmallCases) {
  const FractalGraph iv = build_fractal({Family::interval, 3});
  EXPECT_EQ(iv.size(), 9u);
  EXPECT_EQ(iv.edges.size(), 8u);
  for (const auto& e : iv.edges) EXPECT_DOUBLE_EQ(e.conductance, 8.0);
  EXPECT_DOUBLE_EQ(iv.measure.front(), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(iv.measure[4], 1.0 / 8.0);

  const FractalGraph v0 = build_fractal({Family::vicsek, 0});
  EXPECT_EQ(v0.size(), 5u);
  EXPECT_EQ(v0.edges.size(), 4u);

  // Corners: 4 * 5^m - 4 * (5^m - 1) / 4 * ... via C(m) = 5 C(m-1) - 4, plus 5^m centers.
  const FractalGraph v2 = build_fractal({Family::vicsek, 2});
  EXPECT_EQ(v2.size(), 76u + 25u);
  EXPECT_EQ(v2.edges.size(), 4u * 25u);
}

TEST(BuildFractal, LevelAboveLimitIsRejected) {
  EXPECT_THROW(build_fractal({Family::gasket, 8}), SizeLimitError);
  EXPECT_THROW(build_fractal({Family::vicsek, 6}), SizeLimitError);
  EXPECT_THROW(build_fractal({Family::interval, 13}), SizeLimitError);
  FractalLimits tight;
  tight.gasket = 2;
  EXPECT_THROW(build_fractal({Family::gasket, 3}, tight), SizeLimitError);
  EXPECT_THROW(build_fractal({Family::gasket, -1}), InvalidArgument);
}

TEST(BuildFractal, MeasureIsProbabilityAndPositive) {
  for (auto fam : {Family::gasket, Family::vicsek, Family::interval})
    for (int m = 0; m <= 3; ++m) {
      const FractalGraph g = build_fractal({fam, m});
      double total = 0.0;
      for (double mu : g.measure) {
        EXPECT_GT(mu, 0.0);
        total += mu;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(BuildFractal, VerticesSortedLexicographically) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  for (std::size_t i = 1; i < g.size(); ++i) {
    EXPECT_TRUE(std::tie(g.vertices[i - 1].x, g.vertices[i - 1].y) < std::tie(g.vertices[i].x, g.vertices[i].y));
    EXPECT_EQ(g.vertices[i].id, i);
  }
}

TEST(BuildFractal, ScalingConstants) {
  const FractalGraph g = build_fractal({Family::gasket, 1});
  EXPECT_NEAR(g.dW, 2.321928094887362, 1e-12);
  EXPECT_NEAR(g.dH, 1.584962500721156, 1e-12);
  EXPECT_GT(g.dW, 2.0);
  const FractalGraph v = build_fractal({Family::vicsek, 1});
  EXPECT_NEAR(v.dW, 2.464973520717927, 1e-12);
  EXPECT_GT(v.dW, 2.0);
  EXPECT_DOUBLE_EQ(build_fractal({Family::interval, 1}).dW, 2.0);
}

TEST(BuildFractal, LaplacianAnnihilatesConstants) {
  for (auto fam : {Family::gasket, Family::vicsek, Family::interval}) {
    const FractalGraph g = build_fractal({fam, 3});
    const Vector ones(g.size(), 1.0);
    for (double v : apply_negative_generator(g, ones)) EXPECT_EQ(v, 0.0);
  }
}

TEST(MetricTable, IntervalEndpointsAndDiagonal) {
  const FractalGraph g = build_fractal({Family::interval, 3});
  EXPECT_DOUBLE_EQ(g.distance(0, 8), 1.0);
  for (std::size_t x = 0; x < g.size(); ++x) EXPECT_EQ(g.distance(x, x), 0.0);
}

TEST(MetricTable, GasketLevelOneCorners) {
  const FractalGraph g = build_fractal({Family::gasket, 1});
  const std::size_t p1 = g.nearest_vertex(0.0, 0.0);
  const std::size_t p2 = g.nearest_vertex(1.0, 0.0);
  const std::size_t p3 = g.nearest_vertex(0.5, std::sqrt(3.0) / 2.0);
  EXPECT_NEAR(g.distance(p1, p2), 1.0, 1e-15);
  EXPECT_NEAR(g.distance(p2, p3), 1.0, 1e-15);
}

TEST(MetricTable, IsAMetricOnAllTriples) {
  for (auto fam : {Family::gasket, Family::vicsek}) {
    const FractalGraph g = build_fractal({fam, 2});
    const std::size_t n = g.size();
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) {
        EXPECT_EQ(g.distance(x, y), g.distance(y, x));
        if (x != y) {
          EXPECT_GT(g.distance(x, y), 0.0);
        }
        for (std::size_t z = 0; z < n; ++z)
          ASSERT_LE(g.distance(x, z), g.distance(x, y) + g.distance(y, z) + 1e-14);
      }
  }
}

TEST(MetricTable, ParallelMatchesSequential) {
  const FractalGraph g = build_fractal({Family::gasket, 4});
  EXPECT_EQ(metric_table(g, 1), metric_table(g, 4));
}

TEST(MetricTable, DisconnectedGraphIsStructuralError) {
  FractalGraph g = build_fractal({Family::interval, 2});
  g.edges.erase(g.edges.begin() + 1);
  EXPECT_THROW(metric_table(g), StructuralError);
}

TEST(Ball, LargeRadiusCoversEverything) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  const auto all = ball(g, 0, 10.0);
  EXPECT_EQ(all.size(), g.size());
  EXPECT_NEAR(volume(g, all), 1.0, 1e-12);
  EXPECT_THROW(ball(g, 0, 0.0), InvalidArgument);
}

TEST(Ball, IntervalMidpoint) {
  const FractalGraph g = build_fractal({Family::interval, 3});
  const auto b = ball(g, 4, 0.2);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(g.vertices[b[0]].x, 0.375);
  EXPECT_DOUBLE_EQ(g.vertices[b[2]].x, 0.625);
  EXPECT_DOUBLE_EQ(volume(g, b), 0.375);
}

TEST(Ball, GasketVolumeGrowthSlope) {
  // Cell-counting oracle: mu(B(corner, 2^{-k})) ~ 3^{-k}, slope log3/log2.
  const FractalGraph g = build_fractal({Family::gasket, 4});
  std::vector<double> lr, lv;
  for (int q = 0; q <= 24; ++q) {
    const double r = std::exp2(-3.0 + 2.0 * q / 24.0);
    lr.push_back(std::log(r));
    lv.push_back(std::log(ball_volume(g, 0, r)));
  }
  const double slope = regression_slope(lr, lv);
  EXPECT_NEAR(slope, std::log(3.0) / std::log(2.0), 0.1 * std::log(3.0) / std::log(2.0));
}

TEST(Ball, AhlforsDeviationIsLevelIndependent) {
  std::vector<double> worst;
  for (int m = 3; m <= 5; ++m) {
    const FractalGraph g = build_fractal({Family::gasket, m});
    Rng rng(7);
    double dev = 0.0;
    for (int k = 0; k < 200; ++k) {
      const std::size_t x = rng.index(g.size());
      const double r = std::exp(rng.uniform(std::log(g.mesh_size()), std::log(0.5)));
      dev = std::max(dev, std::abs(std::log(ball_volume(g, x, r)) - g.dH * std::log(r)));
    }
    worst.push_back(dev);
  }
  for (double d : worst) EXPECT_LT(d, 3.0);
  EXPECT_LT(std::abs(worst[2] - worst[1]), 0.5);
}

TEST(FitDoubling, SingleTrivialSample) {
  const FractalGraph g = build_fractal({Family::interval, 3});
  const std::vector<DoublingSample> one{{2, 2, 0.25, 0.25}};
  const DoublingFit fit = fit_doubling(g, one);
  EXPECT_DOUBLE_EQ(fit.C_VD, 1.0);
}

TEST(FitDoubling, IntervalExponentNearOne) {
  const FractalGraph g = build_fractal({Family::interval, 6});
  const auto samples = sample_doubling(g, 400, 11);
  const DoublingFit fit = fit_doubling(g, samples);
  EXPECT_NEAR(fit.gamma, 1.0, 0.15);
  EXPECT_GE(fit.C_VD, 1.0);
}

TEST(FitDoubling, GasketExponentNearHausdorffDimension) {
  const FractalGraph g = build_fractal({Family::gasket, 5});
  const auto samples = sample_doubling(g, 400, 11);
  const DoublingFit fit = fit_doubling(g, samples);
  EXPECT_NEAR(fit.gamma, g.dH, 0.15 * g.dH);
}

TEST(FitDoubling, FittedConstantsHoldOnEverySample) {
  const FractalGraph g = build_fractal({Family::gasket, 4});
  const auto samples = sample_doubling(g, 200, 3);
  const DoublingFit fit = fit_doubling(g, samples);
  for (const auto& s : samples) {
    const double lhs = ball_volume(g, s.x, s.R);
    const double rhs = fit.C_VD * ball_volume(g, s.y, s.r) * std::pow((g.distance(s.x, s.y) + s.R) / s.r, fit.gamma);
    EXPECT_LE(lhs, rhs * (1 + 1e-12));
  }
  // Deterministic for a fixed seed.
  const DoublingFit again = fit_doubling(g, sample_doubling(g, 200, 3));
  EXPECT_EQ(fit.gamma, again.gamma);
  EXPECT_EQ(fit.C_VD, again.C_VD);
}
