#pragma once

// Run configuration: flat key = value lines grouped under [section] headers.
// '#' starts a comment. Unknown sections or keys are rejected.
//
//   [intensity]  d, alpha, beta, eps, rmax, box_lower, box_upper, one_sided
//   [run]        seed, n_samples, chunks, n_max, mc_per_order, cells
//   [functions]  laplace, campbell, bogoliubov, cone_phi, cone_h
//   [output]     csv, manifest

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "conelab/error.hpp"
#include "conelab/function_dsl.hpp"
#include "conelab/intensity.hpp"
#include "conelab/vector.hpp"

namespace conelab {

struct RunConfig {
  // intensity
  int d = 1;
  double alpha = 1.0;
  double beta = 2.0;
  double eps = 0.5;
  double rmax = 2.0;
  RealVector box_lower;
  RealVector box_upper;
  bool one_sided = false;
  // run
  std::uint64_t seed = 1;
  std::size_t n_samples = 100000;
  unsigned chunks = 1;
  std::size_t n_max = 30;
  std::size_t mc_per_order = 4096;
  std::size_t cells = 10;
  // functions, as grammar text; empty means the built-in default for the window
  std::map<std::string, std::string> functions;
  // output
  std::string csv_path;
  std::string manifest_path;

  IntensitySpec intensity() const {
    try {
      const RealVector lo = box_lower.empty() ? RealVector(d, 0.0) : box_lower;
      const RealVector hi = box_upper.empty() ? RealVector(d, 1.0) : box_upper;
      return IntensitySpec(VelocityLaw(d, alpha, beta), MarkAnnulus(eps, rmax, one_sided), PositionWindow(lo, hi));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class Int>
Int parse_count(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || out < 0) {
    throw Error(ErrorCode::InvalidConfig, key + " must be a non-negative integer, got '" + value + "'");
  }
  return static_cast<Int>(out);
}

inline double parse_config_real(const std::string& key, const std::string& value) {
  try {
    return parse_real(value);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, key + " must be a number, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::InvalidConfig, key + " must be true or false");
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  static const std::map<std::string, std::set<std::string>> kKeys = {
      {"intensity", {"d", "alpha", "beta", "eps", "rmax", "box_lower", "box_upper", "one_sided"}},
      {"run", {"seed", "n_samples", "chunks", "n_max", "mc_per_order", "cells"}},
      {"functions", {"laplace", "campbell", "bogoliubov", "cone_phi", "cone_h"}},
      {"output", {"csv", "manifest"}},
  };
  RunConfig cfg;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::InvalidConfig, where + "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!kKeys.count(section)) throw Error(ErrorCode::InvalidConfig, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, where + "expected key = value");
    if (section.empty()) throw Error(ErrorCode::InvalidConfig, where + "key outside of a section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!kKeys.at(section).count(key)) {
      throw Error(ErrorCode::InvalidConfig, where + "unknown key '" + key + "' in [" + section + "]");
    }
    const std::string name = section + "." + key;
    if (section == "intensity") {
      if (key == "d") cfg.d = detail::parse_count<int>(name, value);
      else if (key == "alpha") cfg.alpha = detail::parse_config_real(name, value);
      else if (key == "beta") cfg.beta = detail::parse_config_real(name, value);
      else if (key == "eps") cfg.eps = detail::parse_config_real(name, value);
      else if (key == "rmax") cfg.rmax = detail::parse_config_real(name, value);
      else if (key == "one_sided") cfg.one_sided = detail::parse_bool(name, value);
      else {
        RealVector v;
        try {
          v = parse_real_list(value);
        } catch (const Error&) {
          throw Error(ErrorCode::InvalidConfig, name + " must be a comma-separated list of numbers");
        }
        (key == "box_lower" ? cfg.box_lower : cfg.box_upper) = std::move(v);
      }
    } else if (section == "run") {
      if (key == "seed") cfg.seed = detail::parse_count<std::uint64_t>(name, value);
      else if (key == "n_samples") cfg.n_samples = detail::parse_count<std::size_t>(name, value);
      else if (key == "chunks") cfg.chunks = detail::parse_count<unsigned>(name, value);
      else if (key == "n_max") cfg.n_max = detail::parse_count<std::size_t>(name, value);
      else if (key == "mc_per_order") cfg.mc_per_order = detail::parse_count<std::size_t>(name, value);
      else cfg.cells = detail::parse_count<std::size_t>(name, value);
    } else if (section == "functions") {
      cfg.functions[key] = value;
    } else {
      (key == "csv" ? cfg.csv_path : cfg.manifest_path) = value;
    }
  }
  if (cfg.n_samples < 1) throw Error(ErrorCode::InvalidConfig, "run.n_samples must be >= 1");
  if (cfg.chunks < 1) throw Error(ErrorCode::InvalidConfig, "run.chunks must be >= 1");
  if (cfg.cells < 1) throw Error(ErrorCode::InvalidConfig, "run.cells must be >= 1");
  if (cfg.d < 1) throw Error(ErrorCode::InvalidConfig, "intensity.d must be >= 1");
  if (!cfg.box_lower.empty() && cfg.box_lower.size() != static_cast<std::size_t>(cfg.d))
    throw Error(ErrorCode::InvalidConfig, "intensity.box_lower must have d entries");
  if (!cfg.box_upper.empty() && cfg.box_upper.size() != static_cast<std::size_t>(cfg.d))
    throw Error(ErrorCode::InvalidConfig, "intensity.box_upper must have d entries");
  (void)cfg.intensity();  // validates the intensity invariants
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config file '" + path + "'");
  return parse_run_config(in);
}

}  // namespace conelab
