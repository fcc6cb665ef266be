#pragma once

// Independent reference values for tests. Nothing here calls the library's
// quadrature; closed forms use boost::math and the C++ standard library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "conelab/conelab.hpp"

namespace oracle {

/// lambda([eps, rmax]) for d = 1, alpha = 1, beta = 2: E1(eps^2) - E1(rmax^2).
inline double mass_d1_a1_b2(double eps, double rmax) {
  return boost::math::expint(1, eps * eps) - boost::math::expint(1, rmax * rmax);
}

/// int |v| lambda(dv) over eps <= |v| <= rmax for d = 1, alpha = 1, beta = 2.
inline double first_moment_d1_a1_b2(double eps, double rmax) {
  return std::sqrt(std::numbers::pi) * (std::erf(rmax) - std::erf(eps));
}

/// Full-range radial moment: |S^{d-1}| Gamma((d + n - alpha)/beta) / beta.
inline double full_moment(int d, double alpha, double beta, int n) {
  const double area = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
  return area * boost::math::tgamma((d + n - alpha) / beta) / beta;
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

/// int (exp(c v) - 1) lambda(dv) over both signs of v, d = 1, alpha = 1, beta = 2.
inline double cone_exponent_d1(double c, double eps, double rmax) {
  return integrate([c](double r) { return (std::expm1(c * r) + std::expm1(-c * r)) * std::exp(-r * r) / r; }, eps,
                   rmax);
}

// Reference setup used across tests: d = 1, alpha = 1, beta = 2, marks [0.5, 2], window [0, 1].
inline const double kMass = mass_d1_a1_b2(0.5, 2.0);
inline const double kCampbell = first_moment_d1_a1_b2(0.5, 2.0);
inline const double kLaplace = std::exp(std::expm1(-0.5) * kMass);
inline const double kBogoliubov = std::exp(0.2 * kMass);
inline const double kCone = std::exp(cone_exponent_d1(0.5, 0.5, 2.0));

}  // namespace oracle

namespace fixture {

inline conelab::IntensitySpec reference_sigma(bool one_sided = false) {
  using namespace conelab;
  return IntensitySpec(VelocityLaw(1, 1.0, 2.0), MarkAnnulus(0.5, 2.0, one_sided), PositionWindow::unit(1));
}

/// Random pinpointing configuration of the given size: positions in [0,1]^d, velocity components in [-2,2].
inline conelab::FiniteConfiguration random_configuration(conelab::RandomStream& rng, std::size_t size, int d) {
  using namespace conelab;
  std::vector<MarkedPoint> pts;
  while (pts.size() < size) {
    MarkedPoint p{RealVector(d), RealVector(d)};
    for (auto& c : p.position) c = rng.uniform();
    for (auto& c : p.velocity) c = rng.uniform(-2.0, 2.0);
    if (is_zero(p.velocity)) continue;
    bool taken = false;
    for (const auto& q : pts) taken = taken || q.position == p.position;
    if (!taken) pts.push_back(std::move(p));
  }
  return FiniteConfiguration::from_points(std::move(pts));
}

}  // namespace fixture
