#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "fracext/error.hpp"

namespace fracext {

/// Settings for improper integrals over t in (0, inf) evaluated with the
/// substitution t = e^u and the trapezoid rule on a uniform u-grid.
/// Bounds left unset are chosen per integrand from its decay rates.
struct QuadratureSpec {
  std::size_t nodes = 2000;
  double tail_tolerance = 1e-12;
  std::optional<double> u_min;
  std::optional<double> u_max;
};

/// Uniform grid in u = log t with trapezoid weights (in du).
struct LogGrid {
  std::vector<double> u;
  std::vector<double> weight;

  static LogGrid make(double u_min, double u_max, std::size_t nodes) {
    if (nodes < 2 || !(u_max > u_min)) throw InvalidArgument("log grid needs nodes >= 2 and u_max > u_min");
    LogGrid g;
    g.u.resize(nodes);
    g.weight.resize(nodes);
    const double h = (u_max - u_min) / static_cast<double>(nodes - 1);
    for (std::size_t k = 0; k < nodes; ++k) {
      g.u[k] = u_min + h * static_cast<double>(k);
      g.weight[k] = (k == 0 || k + 1 == nodes) ? 0.5 * h : h;
    }
    return g;
  }

  double t(std::size_t k) const { return std::exp(u[k]); }
  std::size_t size() const { return u.size(); }
};

/// Integrates g(u) du over the grid.
template <class F>
double integrate(const LogGrid& grid, F&& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) s += grid.weight[k] * g(grid.u[k]);
  return s;
}

/// Throws QuadratureError when the estimated truncated mass relative to
/// `scale` exceeds the tolerance.
inline void check_tails(double lower_tail, double upper_tail, double scale, double tolerance,
                        const char* what) {
  const double defect = (std::abs(lower_tail) + std::abs(upper_tail)) / std::max(std::abs(scale), 1e-300);
  if (!(defect <= tolerance))
    throw QuadratureError(std::string(what) + ": estimated tail defect " + std::to_string(defect) +
                              " exceeds tolerance",
                          defect);
}

}  // namespace fracext
