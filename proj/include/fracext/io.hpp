#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/extension.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/linalg.hpp"
#include "fracext/nonlocal_dirichlet.hpp"

namespace fracext {

/// Decimal with 17 significant digits (round-trips every double).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV export

inline void write_vertices_csv(std::ostream& out, const FractalGraph& g) {
  out << "id,x,y,mass\n";
  for (const auto& v : g.vertices)
    out << v.id << ',' << format_double(v.x) << ',' << format_double(v.y) << ',' << format_double(g.measure[v.id])
        << '\n';
}

inline void write_edges_csv(std::ostream& out, const FractalGraph& g) {
  out << "i,j,conductance\n";
  for (const auto& e : g.edges) out << e.i << ',' << e.j << ',' << format_double(e.conductance) << '\n';
}

inline void write_extension_csv(std::ostream& out, const ExtensionField& field) {
  out << "x_id,y_index,y_value,U\n";
  for (std::size_t x = 0; x < field.vertices(); ++x)
    for (std::size_t j = 0; j < field.grid.size(); ++j)
      out << x << ',' << j << ',' << format_double(field.grid.nodes[j]) << ',' << format_double(field(x, j)) << '\n';
}

inline void write_solution_csv(std::ostream& out, std::span<const double> u) {
  out << "vertex_id,u\n";
  for (std::size_t x = 0; x < u.size(); ++x) out << x << ',' << format_double(u[x]) << '\n';
}

/// A row-number column named `index_name`, then one named column per vector.
inline void write_columns_csv(std::ostream& out, const std::string& index_name, const std::vector<std::string>& names,
                              const std::vector<Vector>& columns) {
  out << index_name;
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    out << r;
    for (const auto& c : columns) out << ',' << format_double(c[r]);
    out << '\n';
  }
}

template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
  auto out = detail::open_output(path);
  writer(out);
  if (!out) throw Error("write to " + path + " failed");
}

// ---------------------------------------------------------------------------
// key = value files

/// Flat `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Later keys override earlier ones.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError(source + ":" + std::to_string(number) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw FormatError(source + ":" + std::to_string(number) + ": empty key");
    out[key] = detail::trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  return parse_key_values(in, path);
}

// ---------------------------------------------------------------------------
// Dirichlet problem files
//
//   # comment
//   s = 0.5                  (optional)
//   domain = 3 4 5 6
//   exterior                 (then one "vertex_id value" pair per line)
//   0 1.0
//   1 0.25
//
// Exterior vertices not listed get the value `default`, 0 unless set by a
// `default = v` line before the table.

struct ProblemFile {
  std::vector<std::size_t> domain;
  std::map<std::size_t, double> exterior;
  double default_value = 0.0;
  std::optional<double> s;

  DirichletProblem to_problem(std::size_t n, double fallback_s) const {
    DirichletProblem p;
    p.domain = domain;
    p.exterior.assign(n, default_value);
    for (auto [x, v] : exterior) {
      if (x >= n) throw FormatError("exterior vertex " + std::to_string(x) + " out of range");
      p.exterior[x] = v;
    }
    p.s = s.value_or(fallback_s);
    return p;
  }
};

inline ProblemFile parse_problem(std::istream& in, const std::string& source = "problem") {
  ProblemFile pf;
  std::string line;
  std::size_t number = 0;
  bool table = false;
  auto fail = [&](const std::string& what) {
    throw FormatError(source + ":" + std::to_string(number) + ": " + what);
  };
  auto number_of = [&](const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      fail("bad number '" + text + "'");
    }
    if (used != text.size()) fail("bad number '" + text + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    if (table) {
      std::istringstream row(body);
      std::string id, value, extra;
      if (!(row >> id >> value) || (row >> extra)) fail("expected 'vertex_id value'");
      const double x = number_of(id);
      if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x))) fail("bad vertex id '" + id + "'");
      pf.exterior[static_cast<std::size_t>(x)] = number_of(value);
      continue;
    }
    if (body == "exterior") {
      table = true;
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail("expected key = value or 'exterior'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key == "domain") {
      std::istringstream ids(value);
      std::string id;
      while (ids >> id) {
        const double x = number_of(id);
        if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x))) fail("bad vertex id '" + id + "'");
        pf.domain.push_back(static_cast<std::size_t>(x));
      }
    } else if (key == "s") {
      pf.s = number_of(value);
    } else if (key == "default") {
      pf.default_value = number_of(value);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (pf.domain.empty()) throw FormatError(source + ": no domain vertices");
  return pf;
}

inline ProblemFile read_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  return parse_problem(in, path);
}

}  // namespace fracext
