// Builds the level-4 Sierpinski gasket, applies (-L)^{1/2} to a bump two
// ways (spectrally and through the extension's Dirichlet-to-Neumann map)
// and solves a small fractional Dirichlet problem.
#include <cmath>
#include <cstdio>

#include "fracext/extension.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/nonlocal_dirichlet.hpp"
#include "fracext/spectral.hpp"

using namespace fracext;

int main() {
  const FractalGraph g = build_fractal({Family::gasket, 4});
  const GeneratorOperator op = make_generator(g);
  const SpectralDecomposition dec = eigendecompose(op);
  std::printf("gasket level 4: %zu vertices, lambda_1 = %.6g, dH = %.4f, dW = %.4f\n", g.size(),
              dec.lambda_min_positive(), g.dH, g.dW);

  Vector f(g.size());
  for (std::size_t x = 0; x < g.size(); ++x)
    f[x] = std::exp(-8.0 * (std::pow(g.vertices[x].x - 0.5, 2) + std::pow(g.vertices[x].y - 0.3, 2)));

  const double s = 0.5;
  const Vector spectral = fractional_apply(dec, s, f);
  const YGrid grid = default_y_grid(dec, s);
  const BvpSolution ext = solve_extension_bvp(assemble_extended_operator(op, grid), f);
  std::printf("extension grid: %zu nodes up to y = %.4g, solver iterations %zu\n", grid.size(), grid.y_max(),
              ext.iterations);
  std::printf("relative gap between (-L)^s f and the extension's DtN map: %.3e\n",
              relative_error(dtn(ext.field), spectral));

  // s-harmonic in the ball B(center, 0.3), equal to f outside.
  DirichletProblem p;
  p.s = s;
  p.domain = ball(g, g.nearest_vertex(0.5, 0.3), 0.3);
  p.exterior = f;
  const DirichletSolution sol = solve_fractional_dirichlet(dec, p);
  std::printf("Dirichlet problem on %zu vertices: residual %.3e after %zu iterations\n", p.domain.size(),
              sol.residual, sol.iterations);
  return 0;
}
