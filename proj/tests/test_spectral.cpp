#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "fracext/fractal_graph.hpp"
#include "fracext/random.hpp"
#include "fracext/spectral.hpp"

using namespace fracext;

namespace {

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

Vector random_function(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Vector f(n);
  for (double& v : f) v = rng.normal();
  return f;
}

}  // namespace

TEST(Generator, IntervalNeumannSpectrum) {
  const FractalGraph g = build_fractal({Family::interval, 3});
  const auto dec = eigendecompose(make_generator(g));
  const double h = 1.0 / 8.0;
  for (std::size_t k = 0; k <= 8; ++k)
    EXPECT_NEAR(dec.eigenvalues[k], 2.0 / (h * h) * (1.0 - std::cos(k * std::numbers::pi / 8.0)), 1e-10);
}

TEST(Generator, IntervalDirichletSpectrum) {
  const FractalGraph g = build_fractal({Family::interval, 4});
  const auto dec = killed_decomposition(make_generator(g), range(1, 16));
  const double h = 1.0 / 16.0;
  ASSERT_EQ(dec.size(), 15u);
  for (std::size_t k = 1; k <= 15; ++k)
    EXPECT_NEAR(dec.eigenvalues[k - 1], 2.0 / (h * h) * (1.0 - std::cos(k * std::numbers::pi / 16.0)), 1e-9);
}

TEST(Generator, EigenvectorsAreMuOrthonormal) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  const auto dec = eigendecompose(make_generator(g));
  EXPECT_NEAR(dec.eigenvalues[0], 0.0, 1e-9);
  for (std::size_t i = 0; i < dec.size(); i += 7)
    for (std::size_t j = 0; j < dec.size(); j += 5)
      EXPECT_NEAR(weighted_dot(dec.eigenvectors.column(i), dec.eigenvectors.column(j), dec.measure), i == j ? 1.0 : 0.0,
                  1e-10);
  // Each column satisfies -L phi = lambda phi.
  for (std::size_t i = 0; i < dec.size(); i += 9) {
    const Vector phi = dec.mode(i);
    const Vector lphi = apply_negative_generator(g, phi);
    for (std::size_t x = 0; x < g.size(); ++x) EXPECT_NEAR(lphi[x], dec.eigenvalues[i] * phi[x], 1e-8 * (1 + dec.eigenvalues[i]));
  }
}

TEST(Generator, SizeLimitRespected) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  EXPECT_THROW(eigendecompose(make_generator(g), 10), SizeLimitError);
}

TEST(HeatKernel, ConservativeSymmetricPositive) {
  for (auto fam : {Family::gasket, Family::vicsek}) {
    const FractalGraph g = build_fractal({fam, 2});
    const auto dec = eigendecompose(make_generator(g));
    for (double t : {1e-3, 0.05, 1.0}) {
      const Matrix p = heat_matrix(dec, t);
      for (std::size_t x = 0; x < g.size(); ++x) {
        double mass = 0.0;
        for (std::size_t y = 0; y < g.size(); ++y) {
          mass += p(x, y) * g.measure[y];
          EXPECT_EQ(p(x, y), p(y, x));
          EXPECT_GT(p(x, y), -1e-10);
        }
        EXPECT_NEAR(mass, 1.0, 1e-10);
      }
    }
  }
}

TEST(HeatKernel, ChapmanKolmogorov) {
  const FractalGraph g = build_fractal({Family::gasket, 2});
  const auto dec = eigendecompose(make_generator(g));
  const Matrix a = heat_matrix(dec, 0.01), b = heat_matrix(dec, 0.02), ab = heat_matrix(dec, 0.03);
  for (std::size_t x = 0; x < g.size(); ++x)
    for (std::size_t z = 0; z < g.size(); ++z) {
      double acc = 0.0;
      for (std::size_t y = 0; y < g.size(); ++y) acc += a(x, y) * b(y, z) * g.measure[y];
      EXPECT_NEAR(acc, ab(x, z), 1e-9 * std::abs(ab(x, z)) + 1e-10);
    }
}

TEST(HeatKernel, DomainMonotonicity) {
  const FractalGraph g = build_fractal({Family::interval, 5});
  const auto op = make_generator(g);
  const auto big = killed_decomposition(op, range(1, 32));
  const auto small = killed_decomposition(op, range(8, 25));
  EXPECT_GE(small.eigenvalues[0], big.eigenvalues[0]);
  const Matrix pb = heat_matrix(big, 0.01), ps = heat_matrix(small, 0.01);
  for (std::size_t a = 0; a < small.size(); ++a)
    for (std::size_t b = 0; b < small.size(); ++b) {
      const std::size_t x = small.support[a] - 1, y = small.support[b] - 1;
      EXPECT_LE(ps(a, b), pb(x, y) + 1e-12);
    }
}

TEST(Killed, RejectsBadDomains) {
  const FractalGraph g = build_fractal({Family::interval, 2});
  const auto op = make_generator(g);
  EXPECT_THROW(killed_decomposition(op, std::vector<std::size_t>{}), InvalidArgument);
  EXPECT_THROW(killed_decomposition(op, range(0, 5)), InvalidArgument);
  EXPECT_THROW(killed_decomposition(op, std::vector<std::size_t>{1, 1}), InvalidArgument);
}

TEST(Fractional, OrderOneIsTheGenerator) {
  const FractalGraph g = build_fractal({Family::vicsek, 2});
  const auto dec = eigendecompose(make_generator(g));
  const Vector f = random_function(g.size(), 3);
  const Vector a = fractional_apply(dec, 1.0, f);
  const Vector b = apply_negative_generator(g, f);
  EXPECT_LT(relative_error(a, b), 1e-10);
  const Matrix fm = fractional_matrix(dec, 1.0);
  EXPECT_LT(relative_error(matvec(fm, f), b), 1e-10);
}

TEST(Fractional, PowersCompose) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  const auto dec = eigendecompose(make_generator(g));
  const Vector f = random_function(g.size(), 4);
  const Vector ab = fractional_apply(dec, 0.3, fractional_apply(dec, 0.4, f));
  EXPECT_LT(relative_error(ab, fractional_apply(dec, 0.7, f)), 1e-10);
  EXPECT_THROW(fractional_apply(dec, 0.0, f), InvalidArgument);
  EXPECT_THROW(fractional_apply(dec, 1.5, f), InvalidArgument);
}

TEST(Balakrishnan, ClosedFormValues) {
  EXPECT_NEAR(balakrishnan_power(4.0, 0.5), 2.0, 2e-6);
  EXPECT_NEAR(balakrishnan_power(1.0, 0.5), 1.0, 1e-6);
  EXPECT_NEAR(balakrishnan_power(3.0, 0.3), std::pow(3.0, 0.3), 1.4e-6);
  EXPECT_NEAR(std::pow(3.0, 0.3), 1.39038917, 1e-8);
  for (double s : {0.1, 0.5, 0.9})
    for (double l : {1e-2, 1.0, 1e3, 1e6}) EXPECT_NEAR(balakrishnan_power(l, s) / std::pow(l, s), 1.0, 1e-6);
  EXPECT_THROW(balakrishnan_power(0.0, 0.5), InvalidArgument);
  EXPECT_THROW(balakrishnan_power(1.0, 1.0), InvalidArgument);
}

TEST(Balakrishnan, TruncatedWindowRaisesTailError) {
  QuadratureSpec q;
  q.u_min = -1.0;
  q.u_max = 1.0;
  EXPECT_THROW(balakrishnan_power(1.0, 0.5, q), QuadratureError);
}

TEST(JumpKernel, MatchesSpectralRoute) {
  for (auto [fam, m] : {std::pair{Family::gasket, 2}, std::pair{Family::interval, 4}, std::pair{Family::vicsek, 1}}) {
    const FractalGraph g = build_fractal({fam, m});
    const auto op = make_generator(g);
    const auto dec = eigendecompose(op);
    const Matrix k = jump_kernel_matrix(op, dec, 0.5);
    for (std::size_t x = 0; x < g.size(); ++x)
      for (std::size_t y = 0; y < g.size(); ++y) {
        EXPECT_EQ(k(x, y), k(y, x));
        if (x != y) {
          EXPECT_GT(k(x, y), 0.0);
        }
      }
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Vector f = random_function(g.size(), seed);
      const Vector a = jump_form_apply(k, g.measure, 0.5, f);
      const Vector b = fractional_apply(dec, 0.5, f);
      EXPECT_LT(relative_error(a, b), 1e-4) << to_string(fam);
    }
  }
}

TEST(JumpKernel, OtherOrders) {
  const FractalGraph g = build_fractal({Family::gasket, 2});
  const auto op = make_generator(g);
  const auto dec = eigendecompose(op);
  const Vector f = random_function(g.size(), 8);
  for (double s : {0.2, 0.8})
    EXPECT_LT(relative_error(jump_form_apply(op, dec, s, f), fractional_apply(dec, s, f)), 1e-4) << s;
  EXPECT_THROW(jump_kernel(op, dec, 0.5, 2, 2), InvalidArgument);
}

TEST(SuperMeanValue, HeatFlowAndPositiveDrift) {
  const FractalGraph g = build_fractal({Family::gasket, 3});
  const auto op = make_generator(g);
  std::vector<std::size_t> domain;
  for (std::size_t x = 0; x < g.size(); ++x)
    if (g.vertices[x].y > 0.05) domain.push_back(x);
  const auto dec = killed_decomposition(op, domain);
  Vector u0(dec.size());
  Rng rng(5);
  for (double& v : u0) v = rng.uniform();
  const std::vector<double> times{1e-3, 5e-3, 0.02, 0.1};
  EXPECT_GE(super_mean_value_check(dec, u0, times), -1e-10);
  EXPECT_GE(super_mean_value_check(dec, u0, times, 2.0), -1e-10);
  u0[0] = -1.0;
  EXPECT_THROW(super_mean_value_check(dec, u0, times), InvalidArgument);
}
