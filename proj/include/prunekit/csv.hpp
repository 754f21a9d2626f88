#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace prunekit {

// Shortest round-trip decimal formatting so CSV output is bit-stable across
// reruns and exact when parsed back.
inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

// Row assembler: csv_row("a", 1, 2.5) -> "a,1,2.5\n"
namespace detail {
inline void csv_append(std::string& out, const std::string& v) { out += v; }
inline void csv_append(std::string& out, const char* v) { out += v; }
inline void csv_append(std::string& out, double v) { out += format_double(v); }
inline void csv_append(std::string& out, int v) { out += std::to_string(v); }
inline void csv_append(std::string& out, long v) { out += std::to_string(v); }
inline void csv_append(std::string& out, std::size_t v) { out += std::to_string(v); }
}  // namespace detail

template <typename... Ts>
std::string csv_row(const Ts&... fields) {
  std::string out;
  bool first = true;
  (
      [&] {
        if (!first) out += ',';
        first = false;
        detail::csv_append(out, fields);
      }(),
      ...);
  out += '\n';
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace prunekit
