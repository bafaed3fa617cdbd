#pragma once

// Internal CSV helpers. Locale-free: parsing uses std::from_chars, output
// uses snprintf with fixed formats so identical data produces identical bytes.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "traindyn/errors.hpp"

namespace traindyn::csv {

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void fail(const std::filesystem::path& path, std::size_t line,
                              std::size_t column, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ": line " << line << ", column " << column << ": " << what;
  throw ParseError(os.str());
}

inline long parse_int(std::string_view field, const std::filesystem::path& path,
                      std::size_t line, std::size_t column) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail(path, line, column, "expected an integer, got '" + std::string(field) + "'");
  }
  return v;
}

inline double parse_double(std::string_view field, const std::filesystem::path& path,
                           std::size_t line, std::size_t column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail(path, line, column, "expected a number, got '" + std::string(field) + "'");
  }
  return v;
}

/// Reads all lines, dropping trailing \r and a final empty line.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

/// Shortest exact round-trip representation.
inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace traindyn::csv
