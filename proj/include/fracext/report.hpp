#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracext/error.hpp"
#include "fracext/io.hpp"
#include "fracext/linalg.hpp"

namespace fracext {

/// Insertion-ordered JSON, so reports keep a fixed field order.
using Json = nlohmann::ordered_json;

namespace detail {

inline void append_quoted(std::string& out, const std::string& s) {
  // nlohmann's escaping, applied to a lone string.
  out += Json(s).dump();
}

inline void serialize(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        append_quoted(out, it.key());
        out += ": ";
        serialize(out, it.value(), indent, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      out += scalars ? "[" : "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalars ? ", " : ",\n";
        first = false;
        if (!scalars) out += pad;
        serialize(out, v, indent, depth + 1);
      }
      out += scalars ? "]" : "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double d = j.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
        return;
      }
      std::string s = format_double(d);
      // Keep floats recognizable as floats.
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Deterministic text: fixed field order, every double at 17 significant
/// digits, non-finite numbers as null.
inline std::string dump_json(const Json& j) {
  std::string out;
  detail::serialize(out, j, 2, 0);
  out += '\n';
  return out;
}

inline Json json_array(std::span<const double> v) {
  Json a = Json::array();
  for (double d : v) a.push_back(d);
  return a;
}

/// A check report with the fixed top-level fields.
struct CheckReport {
  std::string claim;
  std::string family;
  int level = 0;
  double s = 0.0;  // NaN when the check does not depend on s
  Json parameters = Json::object();
  Json statistics = Json::object();
  std::uint64_t seed = 0;
  bool pass = false;

  Json to_json() const {
    Json j = Json::object();
    j["claim"] = claim;
    j["family"] = family;
    j["level"] = level;
    j["s"] = s;
    j["parameters"] = parameters;
    j["statistics"] = statistics;
    j["seed"] = seed;
    j["pass"] = pass;
    return j;
  }
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_file(path.string(), [&](std::ostream& out) { out << dump_json(j); });
}

}  // namespace fracext
