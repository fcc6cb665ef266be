#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "conelab/error.hpp"

namespace conelab {

/// A point of R^d. Dimension is a runtime property; lexicographic operator< gives the canonical order.
using RealVector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline bool is_zero(std::span<const double> v) {
  for (double c : v) {
    if (c != 0.0) return false;
  }
  return true;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_real(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Parse a full-string decimal number; throws InvalidArgument on trailing garbage.
inline double parse_real(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

/// Comma-separated list of reals, e.g. "0,1.5".
inline RealVector parse_real_list(std::string_view text) {
  RealVector out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_real(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace conelab
