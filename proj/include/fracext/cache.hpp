#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "fracext/error.hpp"
#include "fracext/fractal_graph.hpp"
#include "fracext/spectral.hpp"

namespace fracext {

// Eigendecomposition cache file:
//   "FRSPEC01" | u64 n | n eigenvalues | n*n eigenvector entries (column-major)
//   | u64 FNV-1a hash of everything after the magic
// All integers and doubles little-endian.

inline constexpr char cache_magic[8] = {'F', 'R', 'S', 'P', 'E', 'C', '0', '1'};

class Fnv1a {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

namespace detail {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
  return r;
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  v = to_little(v);
  char b[8];
  std::memcpy(b, &v, 8);
  buf.append(b, 8);
}

inline void put_f64(std::string& buf, double d) { put_u64(buf, std::bit_cast<std::uint64_t>(d)); }

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return to_little(v);
}

}  // namespace detail

/// Serialized cache payload (without magic and trailing hash).
inline std::string encode_spectrum_payload(const SpectralDecomposition& dec) {
  const std::size_t n = dec.size();
  std::string buf;
  buf.reserve(8 * (1 + n + n * n));
  detail::put_u64(buf, n);
  for (double l : dec.eigenvalues) detail::put_f64(buf, l);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < n; ++x) detail::put_f64(buf, dec.eigenvectors(x, i));
  return buf;
}

inline void write_spectrum_cache(const std::string& path, const SpectralDecomposition& dec) {
  const std::string payload = encode_spectrum_payload(dec);
  Fnv1a h;
  h.update(payload.data(), payload.size());
  std::string tail;
  detail::put_u64(tail, h.value());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open " + tmp + " for writing");
    out.write(cache_magic, 8);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.write(tail.data(), 8);
    if (!out) throw Error("write to " + tmp + " failed");
  }
  std::filesystem::rename(tmp, path);
}

/// Reads a cache file for a full decomposition with the given measure.
/// Throws FormatError on bad magic, truncation, size mismatch or hash
/// mismatch.
inline SpectralDecomposition read_spectrum_cache(const std::string& path, std::span<const double> measure) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 24 || std::memcmp(data.data(), cache_magic, 8) != 0)
    throw FormatError(path + ": not an eigendecomposition cache");
  const std::uint64_t n = detail::get_u64(data.data() + 8);
  if (n != measure.size()) throw FormatError(path + ": dimension does not match the graph");
  const std::size_t expected = 8 + 8 * (1 + n + n * n) + 8;
  if (data.size() != expected) throw FormatError(path + ": truncated or oversized");
  Fnv1a h;
  h.update(data.data() + 8, expected - 16);
  if (h.value() != detail::get_u64(data.data() + expected - 8)) throw FormatError(path + ": hash mismatch");
  SpectralDecomposition dec;
  const char* p = data.data() + 16;
  dec.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i, p += 8) dec.eigenvalues[i] = std::bit_cast<double>(detail::get_u64(p));
  dec.eigenvectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < n; ++x, p += 8) dec.eigenvectors(x, i) = std::bit_cast<double>(detail::get_u64(p));
  dec.measure.assign(measure.begin(), measure.end());
  dec.support.resize(n);
  for (std::size_t x = 0; x < n; ++x) dec.support[x] = x;
  return dec;
}

/// FNV-1a over the generator's symmetric matrix and measure.
inline std::uint64_t operator_content_hash(const GeneratorOperator& op) {
  Fnv1a h;
  std::string buf;
  detail::put_u64(buf, op.size());
  for (double v : op.symmetric.storage()) detail::put_f64(buf, v);
  for (double v : op.measure) detail::put_f64(buf, v);
  h.update(buf.data(), buf.size());
  return h.value();
}

/// FRACEXT_CACHE_DIR if set, else `fallback`.
inline std::filesystem::path cache_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("FRACEXT_CACHE_DIR"); env && *env) return env;
  return fallback;
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir, const FractalGraph& g,
                                        std::uint64_t content_hash) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(content_hash));
  return dir / (std::string(to_string(g.family)) + "-" + std::to_string(g.level) + "-" + hex + ".frspec");
}

struct CacheOutcome {
  bool hit = false;
  bool rebuilt = false;  // a file existed but failed validation
  std::filesystem::path path;
};

/// Full decomposition of -L for g, read from the cache directory when a
/// valid file exists, otherwise computed and stored. An invalid file is
/// replaced and a warning goes to `diag`. An empty `dir` disables caching.
inline SpectralDecomposition cached_decomposition(const FractalGraph& g, const std::filesystem::path& dir,
                                                  CacheOutcome* outcome = nullptr, std::ostream& diag = std::cerr,
                                                  std::size_t max_dimension = 4000) {
  const GeneratorOperator op = make_generator(g);
  CacheOutcome local;
  CacheOutcome& oc = outcome ? *outcome : local;
  if (dir.empty()) return eigendecompose(op, max_dimension);
  oc.path = cache_path(dir, g, operator_content_hash(op));
  if (std::filesystem::exists(oc.path)) {
    try {
      SpectralDecomposition dec = read_spectrum_cache(oc.path.string(), op.measure);
      oc.hit = true;
      return dec;
    } catch (const FormatError& e) {
      diag << "warning: " << e.what() << "; rebuilding cache\n";
      oc.rebuilt = true;
    }
  }
  SpectralDecomposition dec = eigendecompose(op, max_dimension);
  std::filesystem::create_directories(dir);
  write_spectrum_cache(oc.path.string(), dec);
  return dec;
}

}  // namespace fracext
