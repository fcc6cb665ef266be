#pragma once

// Exact K-calculus on finite configurations and finite vector measures.
// Sums run over all sub-configurations (2^n terms) or ordered tripartitions
// (3^n terms); explicit budgets turn those costs into errors instead of hangs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "conelab/config_core.hpp"
#include "conelab/error.hpp"
#include "conelab/function_dsl.hpp"
#include "conelab/numeric.hpp"

namespace conelab {

/// Function-class labels; metadata only, never enforced.
enum class FunctionClass { BoundedLocalSupport, BoundedBoundedSupport, CompactMarks, Unrestricted };

inline constexpr std::size_t kSubsetBudget = 25;
inline constexpr std::size_t kTripartitionBudget = 15;

struct ConfigurationFunction {
  std::function<double(const FiniteConfiguration&)> evaluator;
  FunctionClass class_tag = FunctionClass::Unrestricted;

  double operator()(const FiniteConfiguration& gamma) const { return evaluator(gamma); }
};

struct ConeFunction {
  std::function<double(const VectorDiscreteMeasure&)> evaluator;
  FunctionClass class_tag = FunctionClass::Unrestricted;

  double operator()(const VectorDiscreteMeasure& eta) const { return evaluator(eta); }
};

namespace detail {

inline void check_budget(std::size_t n, std::size_t budget, const char* what) {
  if (n > budget) {
    throw Error(ErrorCode::BudgetExceeded, std::string(what) + ": " + std::to_string(n) +
                                               " points exceeds the enumeration budget of " + std::to_string(budget));
  }
}

/// Values of G on every sub-configuration, indexed by bitmask.
inline std::vector<double> tabulate(const ConfigurationFunction& g, const FiniteConfiguration& gamma) {
  const std::uint64_t count = std::uint64_t{1} << gamma.size();
  std::vector<double> table(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) table[mask] = g(gamma.subset(mask));
  return table;
}

}  // namespace detail

/// (KG)(gamma) = sum over all xi ⊆ gamma of G(xi).
inline double k_transform(const ConfigurationFunction& g, const FiniteConfiguration& gamma) {
  detail::check_budget(gamma.size(), kSubsetBudget, "k_transform");
  const std::uint64_t count = std::uint64_t{1} << gamma.size();
  CompensatedSum sum;
  for (std::uint64_t mask = 0; mask < count; ++mask) sum.add(g(gamma.subset(mask)));
  return sum.value();
}

/// (K^{-1}F)(gamma) = sum over xi ⊆ gamma of (-1)^{|gamma \ xi|} F(xi).
inline double k_inverse(const ConfigurationFunction& f, const FiniteConfiguration& gamma) {
  detail::check_budget(gamma.size(), kSubsetBudget, "k_inverse");
  const std::size_t n = gamma.size();
  const std::uint64_t count = std::uint64_t{1} << n;
  CompensatedSum sum;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    const auto missing = n - static_cast<std::size_t>(__builtin_popcountll(mask));
    const double term = f(gamma.subset(mask));
    sum.add(missing % 2 == 0 ? term : -term);
  }
  return sum.value();
}

/// Wraps KG as a configuration function.
inline ConfigurationFunction k_transformed(ConfigurationFunction g) {
  const auto tag = g.class_tag;
  return {[g = std::move(g)](const FiniteConfiguration& gamma) { return k_transform(g, gamma); }, tag};
}

inline ConfigurationFunction k_inverted(ConfigurationFunction f) {
  const auto tag = f.class_tag;
  return {[f = std::move(f)](const FiniteConfiguration& gamma) { return k_inverse(f, gamma); }, tag};
}

/// (G1 * G2)(gamma) = sum over ordered tripartitions (xi1, xi2, xi3) of gamma of
/// G1(xi1 ∪ xi2) G2(xi2 ∪ xi3). Each point is assigned to one of the three parts.
inline double star_convolution(const ConfigurationFunction& g1, const ConfigurationFunction& g2,
                               const FiniteConfiguration& gamma) {
  detail::check_budget(gamma.size(), kTripartitionBudget, "star_convolution");
  const std::size_t n = gamma.size();
  const auto t1 = detail::tabulate(g1, gamma);
  const auto t2 = detail::tabulate(g2, gamma);
  std::vector<int> part(n, 0);  // 0 -> xi1, 1 -> xi2, 2 -> xi3
  CompensatedSum sum;
  while (true) {
    std::uint64_t left = 0;
    std::uint64_t right = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (part[i] <= 1) left |= std::uint64_t{1} << i;
      if (part[i] >= 1) right |= std::uint64_t{1} << i;
    }
    sum.add(t1[left] * t2[right]);
    std::size_t i = 0;
    while (i < n && ++part[i] == 3) part[i++] = 0;
    if (i == n) break;
  }
  return sum.value();
}

inline ConfigurationFunction star(ConfigurationFunction g1, ConfigurationFunction g2) {
  return {[g1 = std::move(g1), g2 = std::move(g2)](const FiniteConfiguration& gamma) {
            return star_convolution(g1, g2, gamma);
          },
          FunctionClass::Unrestricted};
}

/// Lebesgue-Poisson exponent e(f, gamma) = product of f over the points of gamma.
inline double coherent_state(const FunctionSpec& f, const FiniteConfiguration& gamma) {
  double prod = 1.0;
  for (const auto& p : gamma) prod *= evaluate(f, p);
  return prod;
}

inline ConfigurationFunction coherent(FunctionSpec f) {
  return {[f = std::move(f)](const FiniteConfiguration& gamma) { return coherent_state(f, gamma); },
          FunctionClass::BoundedLocalSupport};
}

/// Cone coherent state: product over x in tau(eta) of <h, v_x> phi(x), phi velocity-independent.
inline double coherent_state_cone(std::span<const double> h, const FunctionSpec& phi, const VectorDiscreteMeasure& eta) {
  double prod = 1.0;
  for (const auto& a : eta) prod *= dot(h, a.velocity) * evaluate_position(phi, a.position);
  return prod;
}

inline ConeFunction coherent_cone(RealVector h, FunctionSpec phi) {
  return {[h = std::move(h), phi = std::move(phi)](const VectorDiscreteMeasure& eta) {
            return coherent_state_cone(h, phi, eta);
          },
          FunctionClass::BoundedLocalSupport};
}

/// K-transform on the cone: sum over sub-measures (subsets of atoms) of eta.
inline double k_transform_cone(const ConeFunction& g, const VectorDiscreteMeasure& eta) {
  detail::check_budget(eta.size(), kSubsetBudget, "k_transform_cone");
  const std::uint64_t count = std::uint64_t{1} << eta.size();
  CompensatedSum sum;
  for (std::uint64_t mask = 0; mask < count; ++mask) sum.add(g(eta.subset(mask)));
  return sum.value();
}

/// G ∘ reflect, the configuration-side counterpart of a cone function.
inline ConfigurationFunction pull_back(ConeFunction g) {
  const auto tag = g.class_tag;
  return {[g = std::move(g)](const FiniteConfiguration& gamma) { return g(reflect(gamma)); }, tag};
}

}  // namespace conelab
