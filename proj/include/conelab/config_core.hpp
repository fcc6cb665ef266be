#pragma once

// Finite marked configurations, vector-valued discrete measures and the
// reflection map between them. Every object here is a finite restriction to
// a compact phase window; infinite configurations are never materialized.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conelab/error.hpp"
#include "conelab/vector.hpp"

namespace conelab {

/// A velocity-position pair (v, x) with v != 0.
struct MarkedPoint {
  RealVector velocity;
  RealVector position;

  bool operator==(const MarkedPoint&) const = default;
};

/// Axis-aligned closed box of positions.
class PositionWindow {
 public:
  PositionWindow() = default;
  PositionWindow(RealVector lower, RealVector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require(lower_.size() == upper_.size() && !lower_.empty(), ErrorCode::InvalidArgument,
            "window bounds must have equal, nonzero dimension");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]) && lower_[i] <= upper_[i],
              ErrorCode::InvalidArgument, "window requires finite lower <= upper componentwise");
    }
  }

  /// Unit box [0,1]^d.
  static PositionWindow unit(int d) {
    return PositionWindow(RealVector(d, 0.0), RealVector(d, 1.0));
  }

  const RealVector& lower() const { return lower_; }
  const RealVector& upper() const { return upper_; }
  int dimension() const { return static_cast<int>(lower_.size()); }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lower_.size(); ++i) v *= upper_[i] - lower_[i];
    return v;
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
    }
    return true;
  }

  /// True when the two boxes share a set of positive volume.
  bool overlaps(const PositionWindow& other) const {
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (std::min(upper_[i], other.upper_[i]) <= std::max(lower_[i], other.lower_[i])) return false;
    }
    return true;
  }

  bool operator==(const PositionWindow&) const = default;

 private:
  RealVector lower_;
  RealVector upper_;
};

/// Compact velocity set {v : eps <= |v| <= rmax}. With one_sided set, only the
/// half-space v_1 > 0 is kept (in d = 1: positive velocities).
class MarkAnnulus {
 public:
  MarkAnnulus() = default;
  MarkAnnulus(double eps, double rmax, bool one_sided = false)
      : eps_(eps), rmax_(rmax), one_sided_(one_sided) {
    require(eps > 0.0 && eps <= rmax && std::isfinite(rmax), ErrorCode::InvalidArgument,
            "mark annulus requires 0 < eps <= rmax < inf");
  }

  double eps() const { return eps_; }
  double rmax() const { return rmax_; }
  bool one_sided() const { return one_sided_; }

  bool contains(std::span<const double> v) const {
    const double r = norm(v);
    if (r < eps_ || r > rmax_) return false;
    return !one_sided_ || v[0] > 0.0;
  }

  /// Positive-measure intersection test, treating the two as radial shells.
  bool overlaps(const MarkAnnulus& other) const {
    return std::min(rmax_, other.rmax_) > std::max(eps_, other.eps_);
  }

  bool operator==(const MarkAnnulus&) const = default;

 private:
  double eps_ = 1.0;
  double rmax_ = 1.0;
  bool one_sided_ = false;
};

namespace detail {

inline bool position_less(const RealVector& a, const RealVector& b) { return a < b; }

inline void check_point(const MarkedPoint& p, std::size_t d) {
  require(p.position.size() == d && p.velocity.size() == d, ErrorCode::InvalidArgument,
          "marked point dimension mismatch");
  require(!is_zero(p.velocity), ErrorCode::ZeroVelocity, "velocity must be nonzero");
}

}  // namespace detail

class VectorDiscreteMeasure;

/// Pinpointed finite configuration: distinct positions, nonzero velocities,
/// kept sorted lexicographically by position so equality is structural.
class FiniteConfiguration {
 public:
  FiniteConfiguration() = default;

  /// Validates and canonically sorts. Throws DuplicatePosition or ZeroVelocity.
  static FiniteConfiguration from_points(std::vector<MarkedPoint> points) {
    if (!points.empty()) {
      const std::size_t d = points.front().position.size();
      for (const auto& p : points) detail::check_point(p, d);
    }
    std::sort(points.begin(), points.end(), [](const MarkedPoint& a, const MarkedPoint& b) {
      return detail::position_less(a.position, b.position);
    });
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i - 1].position == points[i].position) {
        throw Error(ErrorCode::DuplicatePosition, "two points share a position");
      }
    }
    FiniteConfiguration c;
    c.points_ = std::move(points);
    return c;
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int dimension() const { return points_.empty() ? 0 : static_cast<int>(points_.front().position.size()); }
  const MarkedPoint& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  const std::vector<MarkedPoint>& points() const { return points_; }

  /// Sub-configuration selected by bit i of mask for point i. Order is preserved.
  FiniteConfiguration subset(std::uint64_t mask) const {
    FiniteConfiguration c;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if ((mask >> i) & 1U) c.points_.push_back(points_[i]);
    }
    return c;
  }

  bool has_position(std::span<const double> x) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), x, [](const MarkedPoint& p, std::span<const double> key) {
      return std::lexicographical_compare(p.position.begin(), p.position.end(), key.begin(), key.end());
    });
    return it != points_.end() && std::equal(it->position.begin(), it->position.end(), x.begin(), x.end());
  }

  /// gamma ∪ {p}; throws DuplicatePosition if p's position is occupied.
  FiniteConfiguration with_point(const MarkedPoint& p) const {
    if (!points_.empty()) detail::check_point(p, points_.front().position.size());
    else require(!is_zero(p.velocity), ErrorCode::ZeroVelocity, "velocity must be nonzero");
    if (has_position(p.position)) throw Error(ErrorCode::DuplicatePosition, "position already occupied");
    FiniteConfiguration c = *this;
    auto it = std::upper_bound(c.points_.begin(), c.points_.end(), p, [](const MarkedPoint& a, const MarkedPoint& b) {
      return detail::position_less(a.position, b.position);
    });
    c.points_.insert(it, p);
    return c;
  }

  /// Union of two configurations with disjoint supports.
  FiniteConfiguration merged(const FiniteConfiguration& other) const {
    std::vector<MarkedPoint> all = points_;
    all.insert(all.end(), other.points_.begin(), other.points_.end());
    return from_points(std::move(all));
  }

  bool operator==(const FiniteConfiguration&) const = default;

 private:
  friend FiniteConfiguration unreflect(const VectorDiscreteMeasure& eta);
  std::vector<MarkedPoint> points_;
};

/// Finite vector-valued discrete measure eta = sum v_x delta_x, atoms sorted by position.
class VectorDiscreteMeasure {
 public:
  struct Atom {
    RealVector position;
    RealVector velocity;
    bool operator==(const Atom&) const = default;
  };

  VectorDiscreteMeasure() = default;

  /// Validates (distinct positions, nonzero velocities) and sorts.
  static VectorDiscreteMeasure from_atoms(std::vector<Atom> atoms) {
    std::vector<MarkedPoint> pts;
    pts.reserve(atoms.size());
    for (auto& a : atoms) pts.push_back({std::move(a.velocity), std::move(a.position)});
    return reflect_points(FiniteConfiguration::from_points(std::move(pts)));
  }

  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  auto begin() const { return atoms_.begin(); }
  auto end() const { return atoms_.end(); }

  /// tau(eta): the positions carrying an atom.
  std::vector<RealVector> support() const {
    std::vector<RealVector> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) out.push_back(a.position);
    return out;
  }

  VectorDiscreteMeasure subset(std::uint64_t mask) const {
    VectorDiscreteMeasure m;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if ((mask >> i) & 1U) m.atoms_.push_back(atoms_[i]);
    }
    return m;
  }

  /// Pairing <h (x) phi, eta> = sum_x phi(x) <h, v_x>.
  template <class PositionFn>
  double pair(std::span<const double> h, PositionFn&& phi) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += phi(a.position) * dot(h, a.velocity);
    return s;
  }

  bool operator==(const VectorDiscreteMeasure&) const = default;

 private:
  friend VectorDiscreteMeasure reflect(const FiniteConfiguration& gamma);
  static VectorDiscreteMeasure reflect_points(const FiniteConfiguration& gamma) {
    VectorDiscreteMeasure m;
    m.atoms_.reserve(gamma.size());
    for (const auto& p : gamma) m.atoms_.push_back({p.position, p.velocity});
    return m;
  }
  std::vector<Atom> atoms_;
};

/// Reflection map: marked configuration -> vector measure with atom v_x at x.
inline VectorDiscreteMeasure reflect(const FiniteConfiguration& gamma) {
  return VectorDiscreteMeasure::reflect_points(gamma);
}

/// Inverse of reflect.
inline FiniteConfiguration unreflect(const VectorDiscreteMeasure& eta) {
  FiniteConfiguration c;
  c.points_.reserve(eta.size());
  for (const auto& a : eta) c.points_.push_back({a.velocity, a.position});
  return c;
}

inline FiniteConfiguration validate_pinpointed(std::vector<MarkedPoint> points) {
  return FiniteConfiguration::from_points(std::move(points));
}

/// V_Lambda(gamma): sum of |v_x| over points with x in the window.
inline double local_velocity(const FiniteConfiguration& gamma, const PositionWindow& window) {
  double s = 0.0;
  for (const auto& p : gamma) {
    if (window.contains(p.position)) s += norm(p.velocity);
  }
  return s;
}

/// Keeps atoms with x in the window and |v_x| in the annulus.
inline VectorDiscreteMeasure project(const VectorDiscreteMeasure& eta, const PositionWindow& window,
                                     const MarkAnnulus& marks) {
  std::vector<VectorDiscreteMeasure::Atom> kept;
  for (const auto& a : eta) {
    if (window.contains(a.position) && marks.contains(a.velocity)) kept.push_back(a);
  }
  return VectorDiscreteMeasure::from_atoms(std::move(kept));
}

// ---------------------------------------------------------------------------
// CSV: header x_1..x_d,v_1..v_d then one marked point per row.

inline std::string csv_header(int d) {
  std::string h;
  for (int i = 1; i <= d; ++i) h += (i > 1 ? ",x_" : "x_") + std::to_string(i);
  for (int i = 1; i <= d; ++i) h += ",v_" + std::to_string(i);
  return h;
}

inline std::string csv_row(const MarkedPoint& p) {
  std::string row;
  for (std::size_t i = 0; i < p.position.size(); ++i) {
    if (i) row += ',';
    row += format_real(p.position[i]);
  }
  for (double c : p.velocity) row += ',' + format_real(c);
  return row;
}

inline void write_csv(std::ostream& out, const FiniteConfiguration& gamma, int d) {
  out << csv_header(d) << '\n';
  for (const auto& p : gamma) out << csv_row(p) << '\n';
}

inline void write_csv(std::ostream& out, const VectorDiscreteMeasure& eta, int d) {
  write_csv(out, unreflect(eta), d);
}

inline FiniteConfiguration read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header_fields = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  require(header_fields % 2 == 0 && header_fields > 0, ErrorCode::InvalidArgument, "bad CSV header");
  const int d = static_cast<int>(header_fields / 2);
  require(line == csv_header(d), ErrorCode::InvalidArgument, "CSV header must be " + csv_header(d));
  std::vector<MarkedPoint> pts;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const RealVector values = parse_real_list(line);
    require(values.size() == static_cast<std::size_t>(2 * d), ErrorCode::InvalidArgument,
            "CSV row width mismatch");
    pts.push_back({RealVector(values.begin() + d, values.end()), RealVector(values.begin(), values.begin() + d)});
  }
  return FiniteConfiguration::from_points(std::move(pts));
}

}  // namespace conelab
