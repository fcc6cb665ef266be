#pragma once

// Exact checks on a finite ground set S of weighted marked points. The
// discrete Lebesgue-Poisson measure gives subset xi ⊆ S the weight
// w(xi) = prod_{i in xi} w_i, and every identity below is a finite sum.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "conelab/combinat.hpp"
#include "conelab/config_core.hpp"
#include "conelab/error.hpp"
#include "conelab/numeric.hpp"
#include "conelab/random.hpp"

namespace conelab {

inline constexpr std::size_t kGroundBudget = 20;
inline constexpr std::size_t kIdentityBudget = 12;

class GroundSet {
 public:
  GroundSet() = default;

  /// Atoms are sorted canonically; weights (and probabilities) follow their atoms.
  GroundSet(std::vector<MarkedPoint> atoms, std::vector<double> weights,
            std::optional<std::vector<double>> inclusion = std::nullopt) {
    require(atoms.size() == weights.size(), ErrorCode::InvalidArgument, "one weight per atom");
    require(!inclusion || inclusion->size() == atoms.size(), ErrorCode::InvalidArgument,
            "one inclusion probability per atom");
    require(atoms.size() <= kGroundBudget, ErrorCode::BudgetExceeded, "ground set larger than 20 atoms");
    for (double w : weights) require(w > 0.0, ErrorCode::InvalidArgument, "weights must be positive");
    if (inclusion) {
      for (double p : *inclusion) require(p > 0.0 && p < 1.0, ErrorCode::InvalidArgument, "inclusion probabilities in (0,1)");
    }
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return atoms[a].position < atoms[b].position; });
    std::vector<MarkedPoint> sorted_atoms;
    for (auto i : order) {
      sorted_atoms.push_back(atoms[i]);
      weights_.push_back(weights[i]);
      if (inclusion) inclusion_.push_back((*inclusion)[i]);
    }
    config_ = FiniteConfiguration::from_points(std::move(sorted_atoms));
  }

  std::size_t size() const { return config_.size(); }
  const FiniteConfiguration& configuration() const { return config_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& inclusion() const { return inclusion_; }
  bool has_inclusion() const { return !inclusion_.empty() || config_.empty(); }

  FiniteConfiguration subset(std::uint64_t mask) const { return config_.subset(mask); }

  double weight(std::uint64_t mask) const {
    double w = 1.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if ((mask >> i) & 1U) w *= weights_[i];
    }
    return w;
  }

 private:
  FiniteConfiguration config_;
  std::vector<double> weights_;
  std::vector<double> inclusion_;
};

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
};

/// H(xi1, xi2) for Minlos identity 1.
using PairFunction = std::function<double(const FiniteConfiguration&, const FiniteConfiguration&)>;
/// H(eta, p) for Minlos identity 2, p a point of eta.
using PointFunction = std::function<double(const FiniteConfiguration&, const MarkedPoint&)>;

namespace detail {

inline IdentityCheck make_check(double lhs, double rhs) { return {lhs, rhs, std::abs(lhs - rhs)}; }

inline std::uint64_t full_mask(std::size_t n) { return (std::uint64_t{1} << n) - 1; }

}  // namespace detail

/// sum over xi ⊆ S of w(xi) G(xi).
inline double oracle_lp_sum(const ConfigurationFunction& g, const GroundSet& ground) {
  detail::check_budget(ground.size(), kGroundBudget, "oracle_lp_sum");
  CompensatedSum sum;
  for (std::uint64_t mask = 0; mask <= detail::full_mask(ground.size()); ++mask) {
    sum.add(ground.weight(mask) * g(ground.subset(mask)));
  }
  return sum.value();
}

/// Minlos identity 1 on disjoint ordered pairs:
///   sum_{xi1 ∩ xi2 = ∅} w(xi1) w(xi2) G(xi1 ∪ xi2) H(xi1, xi2)
///     = sum_eta w(eta) G(eta) sum_{xi ⊆ eta} H(xi, eta \ xi).
inline IdentityCheck verify_minlos_1(const ConfigurationFunction& g, const PairFunction& h, const GroundSet& ground) {
  detail::check_budget(ground.size(), kIdentityBudget, "verify_minlos_1");
  const std::size_t n = ground.size();

  // Left: each atom goes to xi1, xi2 or neither.
  CompensatedSum lhs;
  std::vector<int> part(n, 0);
  while (true) {
    std::uint64_t m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (part[i] == 1) m1 |= std::uint64_t{1} << i;
      if (part[i] == 2) m2 |= std::uint64_t{1} << i;
    }
    lhs.add(ground.weight(m1) * ground.weight(m2) * g(ground.subset(m1 | m2)) * h(ground.subset(m1), ground.subset(m2)));
    std::size_t i = 0;
    while (i < n && ++part[i] == 3) part[i++] = 0;
    if (i == n) break;
  }

  // Right: eta, then every xi ⊆ eta via submask enumeration.
  CompensatedSum rhs;
  for (std::uint64_t eta = 0; eta <= detail::full_mask(n); ++eta) {
    CompensatedSum inner;
    for (std::uint64_t xi = eta;; xi = (xi - 1) & eta) {
      inner.add(h(ground.subset(xi), ground.subset(eta & ~xi)));
      if (xi == 0) break;
    }
    rhs.add(ground.weight(eta) * g(ground.subset(eta)) * inner.value());
  }
  return detail::make_check(lhs.value(), rhs.value());
}

/// Minlos identity 2:
///   sum_eta w(eta) sum_{p in eta} H(eta, p) = sum_eta w(eta) sum_{p not in eta} w_p H(eta ∪ {p}, p).
inline IdentityCheck verify_minlos_2(const PointFunction& h, const GroundSet& ground) {
  detail::check_budget(ground.size(), kIdentityBudget, "verify_minlos_2");
  const std::size_t n = ground.size();
  const auto& atoms = ground.configuration();
  CompensatedSum lhs, rhs;
  for (std::uint64_t eta = 0; eta <= detail::full_mask(n); ++eta) {
    const double w = ground.weight(eta);
    const auto config = ground.subset(eta);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (eta & bit) {
        lhs.add(w * h(config, atoms[i]));
      } else {
        rhs.add(w * ground.weights()[i] * h(ground.subset(eta | bit), atoms[i]));
      }
    }
  }
  return detail::make_check(lhs.value(), rhs.value());
}

/// Bernoulli analogue of int G d(rho_mu) = int KG d(mu): atom i is present
/// independently with probability pi_i, so the correlation function is prod pi_i.
inline IdentityCheck verify_bernoulli_duality(const ConfigurationFunction& g, const GroundSet& ground) {
  detail::check_budget(ground.size(), kIdentityBudget, "verify_bernoulli_duality");
  require(ground.has_inclusion(), ErrorCode::InvalidArgument, "ground set needs inclusion probabilities");
  const std::size_t n = ground.size();
  const auto& pi = ground.inclusion();
  const std::uint64_t all = detail::full_mask(n);

  std::vector<double> table(all + 1);
  for (std::uint64_t m = 0; m <= all; ++m) table[m] = g(ground.subset(m));

  CompensatedSum lhs, rhs;
  for (std::uint64_t gamma = 0; gamma <= all; ++gamma) {
    double corr = 1.0;
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = (gamma >> i) & 1U;
      corr *= in ? pi[i] : 1.0;
      prob *= in ? pi[i] : 1.0 - pi[i];
    }
    lhs.add(table[gamma] * corr);
    CompensatedSum kg;
    for (std::uint64_t xi = gamma;; xi = (xi - 1) & gamma) {
      kg.add(table[xi]);
      if (xi == 0) break;
    }
    rhs.add(prob * kg.value());
  }
  return detail::make_check(lhs.value(), rhs.value());
}

// ---------------------------------------------------------------------------
// Random instances for the verify-exact suite and property tests.

namespace detail {

inline std::uint64_t hash_configuration(std::uint64_t h, const FiniteConfiguration& gamma) {
  h = splitmix64(h ^ gamma.size());
  for (const auto& p : gamma) {
    for (double c : p.position) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(c));
    for (double c : p.velocity) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(c));
  }
  return h;
}

inline double hash_to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

}  // namespace detail

/// Pseudo-random G with values in [-1, 1), a fixed function of the configuration's contents.
inline ConfigurationFunction random_configuration_function(std::uint64_t seed) {
  return {[seed](const FiniteConfiguration& gamma) {
            return detail::hash_to_unit(detail::hash_configuration(splitmix64(seed), gamma));
          },
          FunctionClass::BoundedBoundedSupport};
}

inline PairFunction random_pair_function(std::uint64_t seed) {
  return [seed](const FiniteConfiguration& a, const FiniteConfiguration& b) {
    const auto h = detail::hash_configuration(detail::hash_configuration(splitmix64(seed ^ 0xa11ce), a), b);
    return detail::hash_to_unit(h);
  };
}

inline PointFunction random_point_function(std::uint64_t seed) {
  return [seed](const FiniteConfiguration& eta, const MarkedPoint& p) {
    const auto h = detail::hash_configuration(splitmix64(seed ^ 0xb0b), eta);
    return detail::hash_to_unit(detail::hash_configuration(h, FiniteConfiguration::from_points({p})));
  };
}

/// Ground set of the given size in dimension d: positions uniform in [0,1]^d,
/// velocities with components in [-2,2] (nonzero), weights in [0.1,1),
/// inclusion probabilities in [0.05,0.95).
inline GroundSet random_ground_set(RandomStream& rng, std::size_t size, int d) {
  std::vector<MarkedPoint> atoms;
  std::vector<double> weights, inclusion;
  while (atoms.size() < size) {
    MarkedPoint p{RealVector(d), RealVector(d)};
    for (auto& c : p.position) c = rng.uniform();
    do {
      for (auto& c : p.velocity) c = rng.uniform(-2.0, 2.0);
    } while (is_zero(p.velocity));
    const bool taken = std::any_of(atoms.begin(), atoms.end(), [&](const MarkedPoint& q) { return q.position == p.position; });
    if (taken) continue;
    atoms.push_back(std::move(p));
    weights.push_back(rng.uniform(0.1, 1.0));
    inclusion.push_back(rng.uniform(0.05, 0.95));
  }
  return GroundSet(std::move(atoms), std::move(weights), std::move(inclusion));
}

}  // namespace conelab
