#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fracext/checks.hpp"
#include "fracext/io.hpp"
#include "fracext/report.hpp"

namespace fracext {

enum ExitCode : int { exit_pass = 0, exit_check_failed = 1, exit_usage = 2, exit_numerical = 3 };

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw InvalidArgument("bad number for " + key + ": '" + value + "'");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw InvalidArgument("bad integer for " + key + ": '" + value + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("bad boolean for " + key + ": '" + value + "'");
}

}  // namespace detail

/// Config keys; flag --y-max sets key y_max.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "family") {
    c.family = parse_family(value);
  } else if (key == "level") {
    c.level = static_cast<int>(parse_integer(key, value));
  } else if (key == "s") {
    c.s_values.clear();
    for (const auto& v : split_list(value)) c.s_values.push_back(parse_double(key, v));
  } else if (key == "quadrature_nodes") {
    const long long n = parse_integer(key, value);
    if (n < 2) throw InvalidArgument("quadrature_nodes must be at least 2");
    c.quadrature.nodes = static_cast<std::size_t>(n);
  } else if (key == "quadrature_tail_tolerance") {
    c.quadrature.tail_tolerance = parse_double(key, value);
  } else if (key == "y_tolerance") {
    c.y_tolerance = parse_double(key, value);
  } else if (key == "y_max") {
    c.y_max = parse_double(key, value);
  } else if (key == "y_intervals") {
    const long long n = parse_integer(key, value);
    if (n < 2) throw InvalidArgument("y_intervals must be at least 2");
    c.y_intervals = static_cast<std::size_t>(n);
  } else if (key == "extended_level") {
    c.extended_level = static_cast<int>(parse_integer(key, value));
  } else if (key == "checks") {
    c.checks = split_list(value);
  } else if (key == "output") {
    c.output = value;
  } else if (key == "cache_dir") {
    c.cache_dir = value;
  } else if (key == "cache") {
    c.use_cache = parse_bool(key, value);
  } else if (key == "seed") {
    const long long v = parse_integer(key, value);
    if (v < 0) throw InvalidArgument("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(v);
  } else if (key == "jobs") {
    const long long v = parse_integer(key, value);
    if (v < 1) throw InvalidArgument("jobs must be at least 1");
    c.jobs = static_cast<unsigned>(v);
  } else {
    throw InvalidArgument("unknown configuration key '" + key + "'");
  }
}

/// Index of report files in the output directory; entries are merged by
/// file name and kept sorted.
inline Json read_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Json::object();
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline Json merge_index(const Json& old, const std::vector<std::pair<std::string, CheckReport>>& reports) {
  std::map<std::string, Json> entries;
  if (old.contains("runs"))
    for (const auto& e : old["runs"]) entries[e.value("file", std::string())] = e;
  for (const auto& [file, r] : reports) {
    Json e = Json::object();
    e["file"] = file;
    e["claim"] = r.claim;
    e["family"] = r.family;
    e["level"] = r.level;
    e["s"] = r.s;
    e["seed"] = r.seed;
    e["pass"] = r.pass;
    entries[file] = e;
  }
  Json idx = Json::object();
  Json runs = Json::array();
  bool all = true;
  for (const auto& [file, e] : entries) {
    runs.push_back(e);
    all = all && e.value("pass", false);
  }
  idx["runs"] = runs;
  idx["pass"] = all && !runs.empty();
  return idx;
}

inline std::string report_file_name(const std::string& check, double s) {
  if (!check_depends_on_s(check)) return check + ".json";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-s%g.json", check.c_str(), s);
  return buf;
}

namespace detail {

/// Function on the vertices: eigenfunction `mode` or a CSV file with
/// columns vertex_id,value.
inline Vector input_function(Session& session, const std::string& file, int mode) {
  const SpectralDecomposition& dec = session.decomposition();
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot read " + file);
    Vector f(dec.size(), 0.0);
    std::vector<char> seen(dec.size(), 0);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string body = trim(line);
      if (body.empty() || body[0] == '#' || (number == 1 && !std::isdigit(static_cast<unsigned char>(body[0]))))
        continue;
      const auto comma = body.find(',');
      if (comma == std::string::npos) throw FormatError(file + ":" + std::to_string(number) + ": expected id,value");
      const long long id = parse_integer("vertex id", trim(body.substr(0, comma)));
      if (id < 0 || static_cast<std::size_t>(id) >= f.size())
        throw FormatError(file + ":" + std::to_string(number) + ": vertex id out of range");
      f[static_cast<std::size_t>(id)] = parse_double("value", trim(body.substr(comma + 1)));
      seen[static_cast<std::size_t>(id)] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw FormatError(file + ": not every vertex has a value");
    return f;
  }
  if (mode < 0 || static_cast<std::size_t>(mode) >= dec.size()) throw InvalidArgument("mode index out of range");
  return dec.mode(static_cast<std::size_t>(mode));
}

inline std::string s_label(double s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "s=%g", s);
  return buf;
}

}  // namespace detail

/// Command-line driver. Exit codes: 0 pass, 1 check failure, 2 usage
/// error, 3 numerical failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Fractional powers, Caffarelli-Silvestre type extensions and Harnack checks on fractal graphs",
               "fracext"};
  app.require_subcommand(1);

  // Shared flags; each maps to the config key with dashes turned into underscores.
  std::string config_file;
  std::map<std::string, std::string> flag_values;
  app.add_option("--config", config_file, "key = value configuration file (flags override it)");
  std::map<std::string, CLI::Option*> flag_options;
  auto shared = [&](const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (key == "output") flag = "-o," + flag;
    flag_options[key] = app.add_option(flag, flag_values[key], help);
  };
  shared("family", "gasket, vicsek or interval");
  shared("level", "approximation level m");
  shared("s", "fractional order(s), comma separated");
  shared("output", "output directory");
  shared("seed", "seed for all random data");
  shared("jobs", "worker threads (results do not depend on it)");
  shared("cache_dir", "eigendecomposition cache directory (FRACEXT_CACHE_DIR overrides)");
  shared("cache", "use the eigendecomposition cache (true/false)");
  shared("quadrature_nodes", "log-grid nodes of the time integrals");
  shared("quadrature_tail_tolerance", "tail tolerance of the time integrals");
  shared("y_tolerance", "boundary-layer tolerance of the default y-grid");
  shared("y_max", "height of the extension grid");
  shared("y_intervals", "intervals of the extension grid");
  shared("extended_level", "level used by the lle, oscillation and phi checks");
  shared("checks", "checks run by verify-all, comma separated");

  auto* build = app.add_subcommand("build", "write vertices.csv and edges.csv");
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of -L to spectrum.csv (fills the cache)");
  auto* heat = app.add_subcommand("heatkernel", "p_t(x, .) to heatkernel.csv");
  double heat_t = 0.01;
  int heat_x = 0;
  heat->add_option("--time", heat_t, "time t")->check(CLI::PositiveNumber);
  heat->add_option("--vertex", heat_x, "vertex x")->check(CLI::NonNegativeNumber);
  auto* fracpow = app.add_subcommand("fracpow", "(-L)^s f to fracpow.csv");
  auto* extend = app.add_subcommand("extend", "extension U(x, y) of f to extension.csv");
  auto* besov = app.add_subcommand("besov", "Besov quantities D(f, r) to besov.csv");
  std::string input_file;
  int mode = 1;
  std::string method = "poisson";
  for (auto* sub : {fracpow, extend, besov}) {
    sub->add_option("--input", input_file, "CSV vertex_id,value (default: an eigenfunction)");
    sub->add_option("--mode", mode, "eigenfunction index used when no input is given");
  }
  extend->add_option("--method", method, "poisson (spectral) or bvp (variational solve)")
      ->check(CLI::IsMember({"poisson", "bvp"}));
  auto* dirichlet = app.add_subcommand("dirichlet", "solve a fractional Dirichlet problem to solution.csv");
  std::string problem_file;
  dirichlet->add_option("--problem", problem_file, "problem file")->required();
  auto* verify = app.add_subcommand("verify", "run one check");
  std::string check_name;
  verify->add_option("check", check_name, "check name")->required();
  auto* verify_all = app.add_subcommand("verify-all", "run every check and write index.json");
  auto* report = app.add_subcommand("report", "summarize index.json of the output directory");
  for (auto* sub : {build, spectrum, heat, fracpow, extend, dirichlet, verify, verify_all, report, besov})
    sub->fallthrough();

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_pass : exit_usage;
  }

  RunConfig cfg;
  try {
    std::map<std::string, std::string> settings;
    if (!config_file.empty()) settings = read_key_values(config_file);
    for (const auto& [key, opt] : flag_options)
      if (opt->count() > 0) settings[key] = flag_values[key];
    for (const auto& [key, value] : settings) apply_setting(cfg, key, value);
    validate(cfg, fracpow->parsed());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    std::filesystem::create_directories(cfg.output);
    Session session(cfg, err);
    const auto path = [&](const std::string& name) { return (cfg.output / name).string(); };

    if (build->parsed()) {
      const FractalGraph& g = session.graph();
      write_file(path("vertices.csv"), [&](std::ostream& o) { write_vertices_csv(o, g); });
      write_file(path("edges.csv"), [&](std::ostream& o) { write_edges_csv(o, g); });
      err << "wrote " << g.size() << " vertices and " << g.edges.size() << " edges to " << cfg.output.string() << "\n";
      return exit_pass;
    }
    if (spectrum->parsed()) {
      const SpectralDecomposition& dec = session.decomposition();
      write_file(path("spectrum.csv"), [&](std::ostream& o) {
        o << "index,eigenvalue\n";
        for (std::size_t i = 0; i < dec.size(); ++i) o << i << ',' << format_double(dec.eigenvalues[i]) << '\n';
      });
      return exit_pass;
    }
    if (heat->parsed()) {
      const SpectralDecomposition& dec = session.decomposition();
      if (static_cast<std::size_t>(heat_x) >= dec.size()) throw InvalidArgument("vertex out of range");
      Vector delta(dec.size(), 0.0);
      delta[static_cast<std::size_t>(heat_x)] = 1.0 / dec.measure[static_cast<std::size_t>(heat_x)];
      const Vector p = semigroup_apply(dec, heat_t, delta);
      write_file(path("heatkernel.csv"), [&](std::ostream& o) { write_columns_csv(o, "vertex_id", {"p"}, {p}); });
      return exit_pass;
    }
    if (fracpow->parsed()) {
      const Vector f = detail::input_function(session, input_file, mode);
      std::vector<std::string> names{"f"};
      std::vector<Vector> cols{f};
      for (double s : cfg.s_values) {
        names.push_back(detail::s_label(s));
        cols.push_back(fractional_apply(session.decomposition(), s, f));
      }
      write_file(path("fracpow.csv"), [&](std::ostream& o) { write_columns_csv(o, "vertex_id", names, cols); });
      return exit_pass;
    }
    if (extend->parsed()) {
      const SpectralDecomposition& dec = session.decomposition();
      const Vector f = detail::input_function(session, input_file, mode);
      const double s = cfg.s_values.front();
      YGrid grid = default_y_grid(dec, s, cfg.y_tolerance);
      if (cfg.y_max || cfg.y_intervals)
        grid = YGrid::graded(s, cfg.y_max.value_or(grid.y_max()), cfg.y_intervals.value_or(grid.intervals()));
      ExtensionField field;
      if (method == "bvp") {
        const BvpSolution sol = solve_extension_bvp(assemble_extended_operator(session.generator(cfg.level), grid), f);
        if (!(sol.residual <= 1e-10))
          throw NumericalFailure("extension solve did not converge", sol.iterations, sol.residual);
        field = sol.field;
      } else {
        field = poisson_extend(dec, s, f, grid, cfg.quadrature, cfg.jobs);
      }
      write_file(path("extension.csv"), [&](std::ostream& o) { write_extension_csv(o, field); });
      return exit_pass;
    }
    if (dirichlet->parsed()) {
      const ProblemFile pf = read_problem(problem_file);
      const DirichletProblem p = pf.to_problem(session.graph().size(), cfg.s_values.front());
      check_fractional_order(p.s, false);
      const DirichletSolution sol = solve_fractional_dirichlet(session.decomposition(), p, cfg.jobs);
      write_file(path("solution.csv"), [&](std::ostream& o) { write_solution_csv(o, sol.u); });
      err << "residual " << format_double(sol.residual) << " after " << sol.iterations << " iterations\n";
      return exit_pass;
    }
    if (besov->parsed()) {
      const FractalGraph& g = session.graph();
      const Vector f = detail::input_function(session, input_file, mode);
      std::vector<std::string> names;
      std::vector<Vector> cols;
      const Vector radii = besov_radii(g);
      names.push_back("radius");
      cols.push_back(radii);
      Vector d;
      for (double r : radii) d.push_back(besov_D(g, f, r, cfg.jobs));
      names.push_back("D");
      cols.push_back(d);
      for (double s : cfg.s_values) {
        Vector q(radii.size());
        for (std::size_t k = 0; k < radii.size(); ++k) q[k] = d[k] / std::pow(radii[k], g.dH + s * g.dW);
        names.push_back("normalized_" + detail::s_label(s));
        cols.push_back(q);
      }
      write_file(path("besov.csv"), [&](std::ostream& o) { write_columns_csv(o, "index", names, cols); });
      for (double s : cfg.s_values) {
        const double n = besov_norm(g, f, g.dH, s * g.dW, cfg.jobs).seminorm;
        out << detail::s_label(s) << " seminorm " << format_double(n) << " energy "
            << format_double(fractional_energy(session.decomposition(), s, f)) << "\n";
      }
      return exit_pass;
    }
    if (verify->parsed() || verify_all->parsed()) {
      std::vector<std::string> names;
      if (verify->parsed()) {
        require_check(check_name);
        names = {check_name};
      } else {
        names = cfg.checks.empty() ? check_names() : cfg.checks;
      }
      std::vector<std::pair<std::string, CheckReport>> reports;
      bool numerical = false;
      for (const auto& name : names) {
        const std::vector<double> orders =
            check_depends_on_s(name) ? cfg.s_values : std::vector<double>{std::numeric_limits<double>::quiet_NaN()};
        for (double s : orders) {
          CheckReport r;
          try {
            r = run_check(session, name, s);
          } catch (const InvalidArgument&) {
            throw;
          } catch (const SizeLimitError&) {
            throw;
          } catch (const Error& e) {
            // The check could not be carried out: reported as a failure.
            r = detail::new_report(session, name, s, cfg.level);
            r.statistics["error"] = e.what();
            r.pass = false;
            numerical = true;
            err << "error: " << name << ": " << e.what() << "\n";
          }
          const std::string file = report_file_name(name, s);
          write_json(cfg.output / file, r.to_json());
          out << (r.pass ? "PASS " : "FAIL ") << file << "  " << r.claim << "\n";
          reports.emplace_back(file, std::move(r));
        }
      }
      const Json index = merge_index(read_index(cfg.output / "index.json"), reports);
      write_json(cfg.output / "index.json", index);
      if (numerical) return exit_numerical;
      const bool all = std::all_of(reports.begin(), reports.end(), [](const auto& p) { return p.second.pass; });
      return all ? exit_pass : exit_check_failed;
    }
    if (report->parsed()) {
      const auto idx_path = cfg.output / "index.json";
      if (!std::filesystem::exists(idx_path)) {
        err << "error: no index.json in " << cfg.output.string() << "; run verify or verify-all first\n";
        return exit_usage;
      }
      const Json idx = read_index(idx_path);
      for (const auto& e : idx.value("runs", Json::array())) {
        const Json full = read_index(cfg.output / e.value("file", std::string()));
        out << (e.value("pass", false) ? "PASS " : "FAIL ") << e.value("file", std::string()) << "  "
            << e.value("claim", std::string()) << "\n";
        if (full.contains("statistics"))
          for (auto it = full["statistics"].begin(); it != full["statistics"].end(); ++it)
            if (!it.value().is_structured()) out << "    " << it.key() << " = " << dump_json(it.value());
      }
      return idx.value("pass", false) ? exit_pass : exit_check_failed;
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const SizeLimitError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_numerical;
  }
  return exit_usage;
}

}  // namespace fracext
