#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/linalg.hpp"
#include "fracext/parallel.hpp"
#include "fracext/random.hpp"

namespace fracext {

enum class Family { gasket, vicsek, interval };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::gasket: return "gasket";
    case Family::vicsek: return "vicsek";
    case Family::interval: return "interval";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  if (name == "gasket") return Family::gasket;
  if (name == "vicsek") return Family::vicsek;
  if (name == "interval") return Family::interval;
  throw InvalidArgument("unknown fractal family '" + std::string(name) +
                        "' (expected gasket, vicsek or interval)");
}

struct FractalSpec {
  Family family = Family::gasket;
  int level = 0;
};

/// Maximum levels per family, and the vertex count above which the
/// all-pairs metric is not tabulated at construction.
struct FractalLimits {
  int gasket = 7;
  int vicsek = 5;
  int interval = 12;
  std::size_t metric_vertices = 4000;

  int max_level(Family f) const {
    switch (f) {
      case Family::gasket: return gasket;
      case Family::vicsek: return vicsek;
      case Family::interval: return interval;
    }
    return 0;
  }
};

/// Self-similarity constants of a family.
struct ScalingConstants {
  double contraction;    // similitude ratio r
  int cells;             // number of similitudes N
  double energy_renorm;  // conductance factor rho per level
  double time_scale;     // tau = rho * N
  double dH;             // log N / log(1/r)
  double dW;             // log tau / log(1/r)
};

inline ScalingConstants scaling_constants(Family f) {
  switch (f) {
    case Family::gasket:
      return {0.5, 3, 5.0 / 3.0, 5.0, std::log(3.0) / std::log(2.0), std::log(5.0) / std::log(2.0)};
    case Family::vicsek:
      return {1.0 / 3.0, 5, 3.0, 15.0, std::log(5.0) / std::log(3.0), std::log(15.0) / std::log(3.0)};
    case Family::interval:
      return {0.5, 2, 2.0, 4.0, 1.0, 2.0};
  }
  return {};
}

struct Vertex {
  std::size_t id;
  double x;
  double y;
};

struct Edge {
  std::size_t i;
  std::size_t j;
  double conductance;
};

struct Neighbor {
  std::size_t vertex;
  double conductance;
};

/// Level-m graph approximation of a model fractal: embedded vertices,
/// conductances, a probability measure on vertices and the shortest-path
/// metric. Immutable after construction.
struct FractalGraph {
  Family family = Family::interval;
  int level = 0;
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  Vector measure;
  Matrix metric;  // empty when the vertex count exceeds FractalLimits::metric_vertices
  double dH = 1.0;
  double dW = 2.0;
  double time_scale = 4.0;
  double energy_renorm = 2.0;
  double contraction = 0.5;

  std::size_t size() const noexcept { return vertices.size(); }
  bool has_metric() const noexcept { return !metric.empty(); }

  /// Neighbor lists built from the edge list.
  std::vector<std::vector<Neighbor>> adjacency() const {
    std::vector<std::vector<Neighbor>> adj(vertices.size());
    for (const auto& e : edges) {
      adj[e.i].push_back({e.j, e.conductance});
      adj[e.j].push_back({e.i, e.conductance});
    }
    return adj;
  }

  double distance(std::size_t a, std::size_t b) const {
    if (!has_metric()) throw SizeLimitError("metric table not tabulated for this graph size");
    return metric(a, b);
  }

  double diameter() const {
    if (!has_metric()) throw SizeLimitError("metric table not tabulated for this graph size");
    return *std::max_element(metric.storage().begin(), metric.storage().end());
  }

  /// Length of one level-m edge in the embedding.
  double mesh_size() const {
    switch (family) {
      case Family::vicsek: return std::sqrt(2.0) * 0.5 * std::pow(contraction, level);
      default: return std::pow(contraction, level);
    }
  }

  /// Vertex closest (Euclidean, ties to the lower id) to a plane point.
  std::size_t nearest_vertex(double px, double py) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) {
      const double d = std::hypot(v.x - px, v.y - py);
      if (d < bd - 1e-15) {
        bd = d;
        best = v.id;
      }
    }
    return best;
  }
};

/// All-pairs shortest-path distances with Euclidean edge lengths (Dijkstra
/// from every source). Rows are independent, so `jobs` does not change the
/// result.
inline Matrix metric_table(const FractalGraph& g, unsigned jobs = 1) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& e : g.edges) {
    const double len = std::hypot(g.vertices[e.i].x - g.vertices[e.j].x,
                                  g.vertices[e.i].y - g.vertices[e.j].y);
    adj[e.i].push_back({e.j, len});
    adj[e.j].push_back({e.i, len});
  }
  Matrix d(n, n, std::numeric_limits<double>::infinity());
  parallel_for(n, jobs, [&](std::size_t src) {
    auto row = d.row(src);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    row[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (du > row[u]) continue;
      for (auto [v, len] : adj[u]) {
        const double cand = du + len;
        if (cand < row[v]) {
          row[v] = cand;
          heap.push({cand, v});
        }
      }
    }
  });
  for (double v : d.storage())
    if (!std::isfinite(v)) throw StructuralError("graph is disconnected; metric undefined");
  // Dijkstra sums edge lengths in path order; enforce exact symmetry.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = std::min(d(i, j), d(j, i));
      d(i, j) = m;
      d(j, i) = m;
    }
  return d;
}

namespace detail {

using LatticePoint = std::pair<std::int64_t, std::int64_t>;

/// Collects lattice vertices, per-vertex cell multiplicities and edges.
struct Assembly {
  std::map<LatticePoint, std::size_t> index;
  std::vector<LatticePoint> points;
  std::vector<std::int64_t> cell_hits;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;

  std::size_t add_point(LatticePoint p) {
    auto [it, inserted] = index.try_emplace(p, points.size());
    if (inserted) {
      points.push_back(p);
      cell_hits.push_back(0);
    }
    return it->second;
  }

  void add_cell(const std::vector<LatticePoint>& verts, const std::vector<std::pair<int, int>>& cell_edges,
                double conductance) {
    std::vector<std::size_t> ids;
    ids.reserve(verts.size());
    for (auto p : verts) {
      ids.push_back(add_point(p));
      ++cell_hits[ids.back()];
    }
    for (auto [a, b] : cell_edges) {
      auto key = std::minmax(ids[a], ids[b]);
      edges[{key.first, key.second}] += conductance;
    }
  }
};

}  // namespace detail

/// Builds the level-m approximation. Gasket and Vicsek vertices live on an
/// integer lattice so duplicate points from neighboring cells merge exactly.
inline FractalGraph build_fractal(const FractalSpec& spec, const FractalLimits& limits = {},
                                  unsigned jobs = 1) {
  if (spec.level < 0) throw InvalidArgument("fractal level must be non-negative");
  const int max_level = limits.max_level(spec.family);
  if (spec.level > max_level)
    throw SizeLimitError("level " + std::to_string(spec.level) + " exceeds the maximum " +
                         std::to_string(max_level) + " for family " + std::string(to_string(spec.family)));

  const ScalingConstants sc = scaling_constants(spec.family);
  const int m = spec.level;
  const double conductance = std::pow(sc.energy_renorm, m);
  detail::Assembly as;
  // Converts lattice coordinates to the plane.
  std::function<std::pair<double, double>(detail::LatticePoint)> embed;
  int verts_per_cell = 0;

  switch (spec.family) {
    case Family::gasket: {
      // Lattice basis e1 = (1, 0), e2 = (1/2, sqrt3/2), scaled by 2^m.
      const std::int64_t side = std::int64_t{1} << m;
      std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, std::int64_t>> work{{{0, 0}, side}};
      while (!work.empty()) {
        auto [corner, size] = work.back();
        work.pop_back();
        auto [a, b] = corner;
        if (size == 1) {
          as.add_cell({{a, b}, {a + 1, b}, {a, b + 1}}, {{0, 1}, {1, 2}, {0, 2}}, conductance);
          continue;
        }
        const std::int64_t h = size / 2;
        work.push_back({{a, b + h}, h});
        work.push_back({{a + h, b}, h});
        work.push_back({{a, b}, h});
      }
      const double scale = std::ldexp(1.0, -m);
      embed = [scale](detail::LatticePoint p) {
        return std::pair{(static_cast<double>(p.first) + 0.5 * static_cast<double>(p.second)) * scale,
                         std::sqrt(3.0) * 0.5 * static_cast<double>(p.second) * scale};
      };
      verts_per_cell = 3;
      break;
    }
    case Family::vicsek: {
      // Unit square scaled by 2 * 3^m so cell centers are integral.
      std::int64_t side = 2;
      for (int k = 0; k < m; ++k) side *= 3;
      std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, std::int64_t>> work{{{0, 0}, side}};
      while (!work.empty()) {
        auto [corner, size] = work.back();
        work.pop_back();
        auto [a, b] = corner;
        if (size == 2) {
          as.add_cell({{a, b}, {a + 2, b}, {a, b + 2}, {a + 2, b + 2}, {a + 1, b + 1}},
                      {{0, 4}, {1, 4}, {2, 4}, {3, 4}}, conductance);
          continue;
        }
        const std::int64_t t = size / 3;
        work.push_back({{a + t, b + t}, t});
        work.push_back({{a + 2 * t, b + 2 * t}, t});
        work.push_back({{a, b + 2 * t}, t});
        work.push_back({{a + 2 * t, b}, t});
        work.push_back({{a, b}, t});
      }
      const double scale = 1.0 / static_cast<double>(side);
      embed = [scale](detail::LatticePoint p) {
        return std::pair{static_cast<double>(p.first) * scale, static_cast<double>(p.second) * scale};
      };
      verts_per_cell = 5;
      break;
    }
    case Family::interval: {
      const std::int64_t n = std::int64_t{1} << m;
      for (std::int64_t i = 0; i < n; ++i) as.add_cell({{i, 0}, {i + 1, 0}}, {{0, 1}}, conductance);
      const double scale = std::ldexp(1.0, -m);
      embed = [scale](detail::LatticePoint p) { return std::pair{static_cast<double>(p.first) * scale, 0.0}; };
      verts_per_cell = 2;
      break;
    }
  }

  // Lexicographic order by embedded coordinates fixes the ids.
  const std::size_t n = as.points.size();
  std::vector<std::pair<double, double>> coords(n);
  for (std::size_t k = 0; k < n; ++k) coords[k] = embed(as.points[k]);
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
  std::vector<std::size_t> new_id(n);
  for (std::size_t k = 0; k < n; ++k) new_id[order[k]] = k;

  FractalGraph g;
  g.family = spec.family;
  g.level = m;
  g.dH = sc.dH;
  g.dW = sc.dW;
  g.time_scale = sc.time_scale;
  g.energy_renorm = sc.energy_renorm;
  g.contraction = sc.contraction;
  g.vertices.resize(n);
  g.measure.resize(n);
  double cell_count = 1.0;
  for (int k = 0; k < m; ++k) cell_count *= sc.cells;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t id = new_id[k];
    g.vertices[id] = {id, coords[k].first, coords[k].second};
    g.measure[id] = static_cast<double>(as.cell_hits[k]) / (verts_per_cell * cell_count);
  }
  for (const auto& [key, c] : as.edges) {
    auto [i, j] = std::minmax(new_id[key.first], new_id[key.second]);
    g.edges.push_back({i, j, c});
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair{a.i, a.j} < std::pair{b.i, b.j}; });
  if (n <= limits.metric_vertices) g.metric = metric_table(g, jobs);
  return g;
}

/// Open metric ball {y : d(center, y) < r}.
inline std::vector<std::size_t> ball(const FractalGraph& g, std::size_t center, double r) {
  if (!(r > 0.0)) throw InvalidArgument("ball radius must be positive");
  if (center >= g.size()) throw InvalidArgument("ball center out of range");
  std::vector<std::size_t> out;
  for (std::size_t y = 0; y < g.size(); ++y)
    if (g.distance(center, y) < r) out.push_back(y);
  return out;
}

inline double volume(const FractalGraph& g, std::span<const std::size_t> set) {
  double v = 0.0;
  for (auto i : set) v += g.measure[i];
  return v;
}

inline double ball_volume(const FractalGraph& g, std::size_t center, double r) {
  double v = 0.0;
  for (std::size_t y = 0; y < g.size(); ++y)
    if (g.distance(center, y) < r) v += g.measure[y];
  return v;
}

/// Least-squares slope of ys against xs.
inline double regression_slope(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Volume doubling

struct DoublingSample {
  std::size_t x;
  std::size_t y;
  double r;
  double R;
};

struct DoublingFit {
  double C_VD = 1.0;
  double gamma = 0.0;
  std::size_t samples = 0;
};

/// Random (x, y, r, R) quadruples with radii log-uniform between the mesh
/// size and half the diameter and y drawn from B(x, R).
inline std::vector<DoublingSample> sample_doubling(const FractalGraph& g, std::size_t count,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  const double lo = std::log(g.mesh_size());
  const double hi = std::log(0.5 * g.diameter());
  std::vector<DoublingSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    DoublingSample s;
    s.x = rng.index(g.size());
    double a = std::exp(rng.uniform(lo, hi));
    double b = std::exp(rng.uniform(lo, hi));
    s.r = std::min(a, b);
    s.R = std::max(a, b);
    const auto near = ball(g, s.x, s.R);
    s.y = near[rng.index(near.size())];
    out.push_back(s);
  }
  return out;
}

/// Fits V(x,R) <= C_VD V(y,r) ((d(x,y)+R)/r)^gamma over the samples.
/// For each gamma on a 0.01 grid the smallest admissible C is computed. The
/// pair kept is the one minimizing C * 2^gamma, the bound it implies for
/// doubling a radius; C_VD is then rounded up to a 2^{k/4} bucket.
inline DoublingFit fit_doubling(const FractalGraph& g, std::span<const DoublingSample> samples) {
  if (samples.empty()) throw InvalidArgument("fit_doubling needs at least one sample");
  std::vector<double> lx, ly;  // log((d+R)/r), log(V(x,R)/V(y,r))
  for (const auto& s : samples) {
    if (!(s.r > 0.0) || s.r > s.R) throw InvalidArgument("doubling sample needs 0 < r <= R");
    const double vR = ball_volume(g, s.x, s.R);
    const double vr = ball_volume(g, s.y, s.r);
    lx.push_back(std::log((g.distance(s.x, s.y) + s.R) / s.r));
    ly.push_back(std::log(vR / vr));
  }
  double best_obj = std::numeric_limits<double>::infinity();
  DoublingFit fit;
  for (int k = 0; k <= 800; ++k) {
    const double gamma = 0.01 * k;
    double logc = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) logc = std::max(logc, ly[i] - gamma * lx[i]);
    const double obj = logc + gamma * std::numbers::ln2;
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      fit.gamma = gamma;
      fit.C_VD = std::exp(logc);
    }
  }
  const double bucket = std::ceil(std::log2(fit.C_VD) * 4.0 - 1e-9) / 4.0;
  fit.C_VD = std::exp2(std::max(0.0, bucket));
  fit.samples = samples.size();
  return fit;
}

}  // namespace fracext
