#pragma once

// Singular velocity laws lambda(dv) = |v|^{-alpha} exp(-|v|^beta) dv with
// alpha in [d, d+1), and the product intensity sigma = lambda (x) m restricted
// to a compact phase window I x Lambda.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "conelab/config_core.hpp"
#include "conelab/error.hpp"
#include "conelab/numeric.hpp"
#include "conelab/random.hpp"

namespace conelab {

class VelocityLaw {
 public:
  VelocityLaw(int d, double alpha, double beta) : d_(d), alpha_(alpha), beta_(beta) {
    require(d >= 1, ErrorCode::InvalidArgument, "dimension must be >= 1");
    require(alpha >= d && alpha < d + 1, ErrorCode::InvalidArgument, "alpha must lie in [d, d+1)");
    require(beta > 0.0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be > 0");
  }

  int dimension() const { return d_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// Lebesgue density |v|^{-alpha} exp(-|v|^beta) at radius r.
  double density(double r) const { return std::pow(r, -alpha_) * std::exp(-std::pow(r, beta_)); }

  /// Radial density r^{d-1-alpha} exp(-r^beta), i.e. the density of |v| up to the sphere area.
  double radial_density(double r) const {
    return std::pow(r, d_ - 1 - alpha_) * std::exp(-std::pow(r, beta_));
  }

  bool operator==(const VelocityLaw&) const = default;

 private:
  int d_;
  double alpha_;
  double beta_;
};

/// Total angular measure of the directions allowed by the annulus.
inline double angular_mass(int d, const MarkAnnulus& marks) {
  return unit_sphere_area(d) * (marks.one_sided() ? 0.5 : 1.0);
}

struct IntensitySpec {
  VelocityLaw law;
  MarkAnnulus marks;
  PositionWindow window;

  IntensitySpec(VelocityLaw law_, MarkAnnulus marks_, PositionWindow window_)
      : law(law_), marks(marks_), window(std::move(window_)) {
    require(window.dimension() == law.dimension(), ErrorCode::InvalidArgument,
            "position window dimension differs from velocity dimension");
  }

  int dimension() const { return law.dimension(); }
};

inline constexpr QuadratureOptions kIntensityQuadrature{1e-10, 0.0, 4000};

/// lambda(I) = s_{d-1} * int_eps^rmax r^{d-1-alpha} exp(-r^beta) dr.
inline double lambda_mass(const VelocityLaw& law, const MarkAnnulus& marks) {
  if (marks.eps() == marks.rmax()) return 0.0;
  auto f = [&](double r) { return law.radial_density(r); };
  return angular_mass(law.dimension(), marks) *
         integrate_adaptive(f, marks.eps(), marks.rmax(), kIntensityQuadrature).value;
}

/// int |v|^n lambda(dv) over the annulus, or over all of R^d_0 when marks is empty.
inline double lambda_moment(const VelocityLaw& law, int n, const std::optional<MarkAnnulus>& marks) {
  require(n >= 0, ErrorCode::InvalidArgument, "moment order must be >= 0");
  const int d = law.dimension();
  if (marks) {
    if (marks->eps() == marks->rmax()) return 0.0;
    auto f = [&](double r) { return std::pow(r, n) * law.radial_density(r); };
    return angular_mass(d, *marks) * integrate_adaptive(f, marks->eps(), marks->rmax(), kIntensityQuadrature).value;
  }
  const double k = d + n - law.alpha();
  if (k <= 0.0) {
    throw Error(ErrorCode::DivergentMoment, "moment of order " + std::to_string(n) +
                                                " diverges at the origin (lambda has infinite mass)");
  }
  const double beta = law.beta();
  // [0,1]: u = r^k removes the power singularity, r^{k-1} dr = du / k.
  auto near = [&](double u) { return std::exp(-std::pow(u, beta / k)); };
  const double head = integrate_adaptive(near, 0.0, 1.0, kIntensityQuadrature).value / k;
  // [1,inf): t = r^beta gives a gamma-type integrand, cut where exp(-t) underflows.
  const double s = k / beta - 1.0;
  auto far = [&](double t) { return std::pow(t, s) * std::exp(-t); };
  const double t_max = 2.0 * std::max(s, 0.0) + 800.0;
  const double tail = integrate_adaptive(far, 1.0, t_max, kIntensityQuadrature).value / beta;
  return unit_sphere_area(d) * (head + tail);
}

inline double sigma_mass(const IntensitySpec& sigma) {
  const double vol = sigma.window.volume();
  if (vol == 0.0) return 0.0;
  return vol * lambda_mass(sigma.law, sigma.marks);
}

/// Inverse-CDF sampler for velocities restricted to a mark annulus.
///
/// The normalized radial CDF is tabulated on 4096 log-spaced nodes; within a
/// node interval the CDF is evaluated by 5-point Gauss-Legendre and inverted
/// by safeguarded Newton steps until it matches the target to 1e-12.
class VelocitySampler {
 public:
  static constexpr std::size_t kNodes = 4096;

  VelocitySampler(const VelocityLaw& law, const MarkAnnulus& marks) : law_(law), marks_(marks) {
    const auto gl = gauss_legendre(5);
    gl_nodes_ = gl.nodes;
    gl_weights_ = gl.weights;
    if (marks.eps() == marks.rmax()) return;
    nodes_.resize(kNodes);
    cumulative_.assign(kNodes, 0.0);
    const double log_lo = std::log(marks.eps());
    const double log_hi = std::log(marks.rmax());
    for (std::size_t i = 0; i < kNodes; ++i) {
      nodes_[i] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / (kNodes - 1));
    }
    nodes_.front() = marks.eps();
    nodes_.back() = marks.rmax();
    CompensatedSum acc;
    for (std::size_t i = 1; i < kNodes; ++i) {
      acc.add(segment_integral(nodes_[i - 1], nodes_[i]));
      cumulative_[i] = acc.value();
    }
    total_ = cumulative_.back();
  }

  const VelocityLaw& law() const { return law_; }
  const MarkAnnulus& marks() const { return marks_; }

  /// Normalized CDF of |v| from the table.
  double cdf(double r) const {
    if (nodes_.empty()) return r < marks_.eps() ? 0.0 : 1.0;
    if (r <= nodes_.front()) return 0.0;
    if (r >= nodes_.back()) return 1.0;
    const auto k = static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), r) - nodes_.begin()) - 1;
    return (cumulative_[k] + segment_integral(nodes_[k], r)) / total_;
  }

  /// Radius with CDF equal to u in [0, 1).
  double radius_for(double u) const {
    if (nodes_.empty()) return marks_.eps();
    const double target = u * total_;
    auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), target) -
                                      cumulative_.begin());
    k = std::clamp<std::size_t>(k, 1, kNodes - 1) - 1;
    double lo = nodes_[k];
    double hi = nodes_[k + 1];
    const double need = target - cumulative_[k];
    const double width = cumulative_[k + 1] - cumulative_[k];
    double r = width > 0.0 ? lo + (hi - lo) * std::clamp(need / width, 0.0, 1.0) : lo;
    for (int iter = 0; iter < 100; ++iter) {
      const double residual = segment_integral(nodes_[k], r) - need;
      if (std::abs(residual) <= 1e-12 * total_) break;
      if (residual > 0.0) hi = r;
      else lo = r;
      const double step = residual / law_.radial_density(r);
      double next = r - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == r) break;
      r = next;
    }
    return r;
  }

  /// Velocity with |v| from the radial law and a uniform direction (half-sphere if one-sided).
  RealVector sample(RandomStream& rng) const {
    const double r = radius_for(rng.uniform());
    const int d = law_.dimension();
    RealVector v(d);
    if (d == 1) {
      v[0] = (marks_.one_sided() || rng.uniform() < 0.5) ? r : -r;
      return v;
    }
    double len = 0.0;
    do {
      for (auto& c : v) c = rng.normal();
      len = norm(v);
    } while (len == 0.0);
    const double flip = (marks_.one_sided() && v[0] < 0.0) ? -1.0 : 1.0;
    for (auto& c : v) c *= flip * r / len;
    return v;
  }

 private:
  double segment_integral(double a, double b) const {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < gl_nodes_.size(); ++i) s += gl_weights_[i] * law_.radial_density(c + h * gl_nodes_[i]);
    return s * h;
  }

  VelocityLaw law_;
  MarkAnnulus marks_;
  std::vector<double> gl_nodes_;
  std::vector<double> gl_weights_;
  std::vector<double> nodes_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

/// One-off velocity draw; builds the CDF table, so reuse a VelocitySampler in loops.
inline RealVector sample_velocity(const VelocityLaw& law, const MarkAnnulus& marks, RandomStream& rng) {
  return VelocitySampler(law, marks).sample(rng);
}

}  // namespace conelab
