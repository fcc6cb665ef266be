#pragma once

// Monte Carlo estimators under the Poisson measure pi_sigma, each paired with
// its closed form. Standard errors are plain sample standard deviations over
// draws divided by sqrt(n); no variance reduction is applied.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conelab/combinat.hpp"
#include "conelab/config_core.hpp"
#include "conelab/function_dsl.hpp"
#include "conelab/intensity.hpp"
#include "conelab/numeric.hpp"
#include "conelab/sampler.hpp"

namespace conelab {

struct McPlan {
  std::uint64_t seed = 1;
  std::size_t n_samples = 100000;
  unsigned chunks = 1;
};

struct MCResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> closed_form;
  std::optional<double> z_score;
};

inline MCResult make_result(double estimate, double std_error, std::size_t n, std::optional<double> closed_form) {
  MCResult r{estimate, std_error, n, closed_form, std::nullopt};
  if (closed_form && std_error > 0.0) r.z_score = (estimate - *closed_form) / std_error;
  return r;
}

/// Mean and standard error of value(gamma) over n Poisson draws.
template <class Value>
RunningStats poisson_mean(const PoissonSampler& sampler, const McPlan& plan, Value&& value) {
  auto blocks = run_blocks(plan.seed, plan.n_samples, plan.chunks,
                           [&](RandomStream& rng, std::size_t first, std::size_t last) {
                             RunningStats s;
                             for (std::size_t i = first; i < last; ++i) s.push(value(sampler.sample(rng)));
                             return s;
                           });
  RunningStats stats;
  for (const auto& b : blocks) stats.merge(b);
  return stats;
}

enum class FunctionalKind { Laplace, Campbell, Bogoliubov, ConeLaplace };

inline const char* to_string(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::Laplace: return "laplace";
    case FunctionalKind::Campbell: return "campbell";
    case FunctionalKind::Bogoliubov: return "bogoliubov";
    case FunctionalKind::ConeLaplace: return "cone_laplace";
  }
  return "unknown";
}

inline std::optional<FunctionalKind> parse_functional_kind(std::string_view s) {
  if (s == "laplace") return FunctionalKind::Laplace;
  if (s == "campbell") return FunctionalKind::Campbell;
  if (s == "bogoliubov") return FunctionalKind::Bogoliubov;
  if (s == "cone_laplace") return FunctionalKind::ConeLaplace;
  return std::nullopt;
}

/// Test function plus, for cone_laplace, the direction h (f is then the position profile phi).
struct FunctionalArgs {
  FunctionSpec f;
  RealVector h;
};

namespace detail {

inline void check_functional_args(FunctionalKind kind, const FunctionalArgs& args, const IntensitySpec& sigma) {
  check_dimension(args.f, sigma.dimension());
  if (kind == FunctionalKind::ConeLaplace) {
    require(args.h.size() == static_cast<std::size_t>(sigma.dimension()), ErrorCode::InvalidArgument,
            "cone_laplace needs h of dimension d");
    require(!depends_on_velocity(args.f), ErrorCode::InvalidArgument,
            "cone_laplace position profile must not depend on velocity");
  }
}

inline double one_plus_checked(double phi) {
  require(1.0 + phi > 0.0, ErrorCode::InvalidArgument, "1 + phi must be positive");
  return 1.0 + phi;
}

}  // namespace detail

/// log Phi_lambda^h(r) = int_I (exp(<h,v> r) - 1) lambda(dv) over the mark annulus.
inline double log_phi_lambda_h(const VelocityLaw& law, const MarkAnnulus& marks, std::span<const double> h, double r) {
  const IntensitySpec unit(law, marks, PositionWindow::unit(law.dimension()));
  PhaseStructure s;
  s.x_breaks.resize(law.dimension());
  s.directional = true;
  return integrate_phase(unit, s, [&](std::span<const double> v, std::span<const double>) {
    return std::expm1(dot(h, v) * r);
  });
}

inline double phi_lambda_h(const VelocityLaw& law, const MarkAnnulus& marks, std::span<const double> h, double r) {
  return std::exp(log_phi_lambda_h(law, marks, h, r));
}

inline double closed_form_functional(FunctionalKind kind, const FunctionalArgs& args, const IntensitySpec& sigma) {
  detail::check_functional_args(kind, args, sigma);
  const int d = sigma.dimension();
  switch (kind) {
    case FunctionalKind::Laplace:
      return std::exp(integrate_phase(sigma, structure_of(args.f, d), [&](std::span<const double> v, std::span<const double> x) {
        return std::expm1(evaluate(args.f, v, x));
      }));
    case FunctionalKind::Campbell:
      return integrate_sigma(args.f, sigma);
    case FunctionalKind::Bogoliubov:
      return std::exp(integrate_sigma(args.f, sigma));
    case FunctionalKind::ConeLaplace: {
      // exp(int_Lambda log Phi(phi(x)) dx); phi is constant on the cells of its boxes.
      auto s = structure_of(args.f, d);
      s.directional = true;
      return std::exp(integrate_phase(sigma, s, [&](std::span<const double> v, std::span<const double> x) {
        return std::expm1(dot(args.h, v) * evaluate_position(args.f, x));
      }));
    }
  }
  return 0.0;
}

inline MCResult estimate_functional(FunctionalKind kind, const FunctionalArgs& args, const IntensitySpec& sigma,
                                    const McPlan& plan) {
  detail::check_functional_args(kind, args, sigma);
  const PoissonSampler sampler(sigma);
  auto value = [&](const FiniteConfiguration& gamma) -> double {
    switch (kind) {
      case FunctionalKind::Laplace: {
        double s = 0.0;
        for (const auto& p : gamma) s += evaluate(args.f, p);
        return std::exp(s);
      }
      case FunctionalKind::Campbell: {
        double s = 0.0;
        for (const auto& p : gamma) s += evaluate(args.f, p);
        return s;
      }
      case FunctionalKind::Bogoliubov: {
        double prod = 1.0;
        for (const auto& p : gamma) prod *= detail::one_plus_checked(evaluate(args.f, p));
        return prod;
      }
      case FunctionalKind::ConeLaplace:
        return std::exp(reflect(gamma).pair(args.h, [&](const RealVector& x) { return evaluate_position(args.f, x); }));
    }
    return 0.0;
  };
  const auto stats = poisson_mean(sampler, plan, value);
  return make_result(stats.mean(), stats.std_error(), stats.count(), closed_form_functional(kind, args, sigma));
}

struct SeriesValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Truncated generating-functional series sum_{n <= order} (int phi dsigma)^n / n!
/// with the bound on the omitted terms.
inline SeriesValue bogoliubov_expansion(const FunctionSpec& phi, const IntensitySpec& sigma, std::size_t order) {
  const double x = integrate_sigma(phi, sigma);
  double term = 1.0;
  CompensatedSum sum;
  sum.add(term);
  for (std::size_t n = 1; n <= order; ++n) {
    term *= x / static_cast<double>(n);
    sum.add(term);
  }
  return {sum.value(), poisson_tail(std::abs(x), order)};
}

// ---------------------------------------------------------------------------
// Factorial moments

struct PhaseBox {
  MarkAnnulus marks;
  PositionWindow window;

  bool contains(const MarkedPoint& p) const { return marks.contains(p.velocity) && window.contains(p.position); }
  bool overlaps(const PhaseBox& other) const {
    return marks.overlaps(other.marks) && window.overlaps(other.window);
  }
};

/// sigma(A) for a phase box, intersected with the window of sigma.
inline double phase_box_mass(const PhaseBox& box, const IntensitySpec& sigma) {
  const int d = sigma.dimension();
  double vol = 1.0;
  for (int i = 0; i < d; ++i) {
    const double lo = std::max(box.window.lower()[i], sigma.window.lower()[i]);
    const double hi = std::min(box.window.upper()[i], sigma.window.upper()[i]);
    if (hi <= lo) return 0.0;
    vol *= hi - lo;
  }
  const double eps = std::max(box.marks.eps(), sigma.marks.eps());
  const double rmax = std::min(box.marks.rmax(), sigma.marks.rmax());
  if (rmax <= eps) return 0.0;
  const bool one_sided = box.marks.one_sided() || sigma.marks.one_sided();
  return vol * lambda_mass(sigma.law, MarkAnnulus(eps, rmax, one_sided));
}

namespace detail {

/// Number of n-tuples of distinct points with point i in box i, by backtracking.
inline double count_distinct_tuples(const std::vector<std::vector<char>>& member, std::size_t box,
                                    std::vector<char>& used) {
  if (box == member.size()) return 1.0;
  double total = 0.0;
  for (std::size_t p = 0; p < used.size(); ++p) {
    if (used[p] || !member[box][p]) continue;
    used[p] = 1;
    total += count_distinct_tuples(member, box + 1, used);
    used[p] = 0;
  }
  return total;
}

}  // namespace detail

/// E[number of ordered n-tuples of distinct points with the i-th point in A_i].
/// Closed form for the Poisson measure: product of sigma(A_i).
inline MCResult factorial_moment_mc(const std::vector<PhaseBox>& boxes, const IntensitySpec& sigma, const McPlan& plan) {
  require(!boxes.empty(), ErrorCode::InvalidArgument, "need at least one box");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    require(boxes[i].window.dimension() == sigma.dimension(), ErrorCode::InvalidArgument, "box dimension mismatch");
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (boxes[i].overlaps(boxes[j])) {
        throw Error(ErrorCode::OverlappingBoxes, "boxes " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
  double closed = 1.0;
  for (const auto& b : boxes) closed *= phase_box_mass(b, sigma);
  const PoissonSampler sampler(sigma);
  const auto stats = poisson_mean(sampler, plan, [&](const FiniteConfiguration& gamma) {
    std::vector<std::vector<char>> member(boxes.size(), std::vector<char>(gamma.size(), 0));
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      for (std::size_t p = 0; p < gamma.size(); ++p) member[b][p] = boxes[b].contains(gamma[p]) ? 1 : 0;
    }
    std::vector<char> used(gamma.size(), 0);
    return detail::count_distinct_tuples(member, 0, used);
  });
  return make_result(stats.mean(), stats.std_error(), stats.count(), closed);
}

// ---------------------------------------------------------------------------
// K-duality

/// Checks int G d(rho) = int KG d(pi_sigma) for the Poisson measure, whose
/// correlation measure is L_sigma. estimate is the Monte Carlo mean of KG,
/// closed_form the Lebesgue-Poisson series value of int G dL_sigma, and
/// std_error combines both sampling errors.
inline MCResult k_duality_check(const ConfigurationFunction& g, const IntensitySpec& sigma, const McPlan& plan,
                                LpSeriesOptions series) {
  series.seed = derive_seed(plan.seed, 0x1b5eULL);
  series.chunks = plan.chunks;
  const auto lhs = lp_series_expectation(g, sigma, series);
  const PoissonSampler sampler(sigma);
  const auto rhs = poisson_mean(sampler, plan, [&](const FiniteConfiguration& gamma) { return k_transform(g, gamma); });
  const double se = std::hypot(rhs.std_error(), lhs.std_error);
  return make_result(rhs.mean(), se, rhs.count(), lhs.estimate);
}

// ---------------------------------------------------------------------------
// Correlation density of a tilted Poisson measure

/// Product tilt dmu/dpi_sigma (gamma) = exp(-int phi dsigma) prod_{p in gamma} (1 + phi(p)).
class TiltDensity {
 public:
  TiltDensity(FunctionSpec phi, const IntensitySpec& sigma)
      : phi_(std::move(phi)), log_normalization_(-integrate_sigma(phi_, sigma)) {}

  const FunctionSpec& phi() const { return phi_; }
  double normalization() const { return std::exp(log_normalization_); }

  double product(const FiniteConfiguration& gamma) const {
    double prod = 1.0;
    for (const auto& p : gamma) prod *= detail::one_plus_checked(evaluate(phi_, p));
    return prod;
  }

  double density(const FiniteConfiguration& gamma) const { return normalization() * product(gamma); }

  /// Correlation function of the tilted measure: prod (1 + phi).
  double correlation(const FiniteConfiguration& gamma) const { return product(gamma); }

 private:
  FunctionSpec phi_;
  double log_normalization_;
};

/// k_mu(gamma0) = int D(gamma0 ∪ xi) pi_sigma(d xi), averaged over Poisson draws xi.
inline MCResult correlation_density_mc(const FiniteConfiguration& gamma0, const TiltDensity& tilt,
                                       const IntensitySpec& sigma, const McPlan& plan) {
  for (const auto& p : gamma0) {
    require(sigma.window.contains(p.position) && sigma.marks.contains(p.velocity), ErrorCode::InvalidArgument,
            "gamma0 must lie inside the phase window of sigma");
  }
  const double base = tilt.density(gamma0);
  const PoissonSampler sampler(sigma);
  const auto stats = poisson_mean(sampler, plan, [&](const FiniteConfiguration& xi) { return base * tilt.product(xi); });
  return make_result(stats.mean(), stats.std_error(), stats.count(), tilt.correlation(gamma0));
}

// ---------------------------------------------------------------------------
// Position correlation functions kappa^(n)

struct CorrelationTable {
  int order = 1;
  std::size_t cells_per_axis = 10;
  PositionWindow window;
  RealVector h;
  double eps = 0.0;
  double rmax = 0.0;
  std::size_t n_samples = 0;
  /// Flat row-major over order * d axes; entry index = sum cell_k * cells^k in argument order.
  std::vector<double> estimate;
  std::vector<double> std_error;
  std::vector<std::size_t> counts;  // tuples that fell in the cell, over all draws
  std::vector<double> closed_form;

  std::size_t cells() const { return static_cast<std::size_t>(std::pow(cells_per_axis, window.dimension())); }
  double z_score(std::size_t i) const {
    return std_error[i] > 0.0 ? (estimate[i] - closed_form[i]) / std_error[i] : 0.0;
  }
};

namespace detail {

inline std::size_t cell_index(const PositionWindow& w, std::size_t cells, std::span<const double> x) {
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (int i = 0; i < w.dimension(); ++i) {
    const double t = (x[i] - w.lower()[i]) / (w.upper()[i] - w.lower()[i]);
    auto k = static_cast<std::size_t>(std::floor(t * static_cast<double>(cells)));
    if (k >= cells) k = cells - 1;
    idx += k * stride;
    stride *= cells;
  }
  return idx;
}

}  // namespace detail

/// Histogram estimate of kappa^(n)_h on a regular grid over the window of sigma (n = 1 or 2).
/// Closed form for the Poisson measure: (int_I <h,v> lambda(dv))^n in every cell.
inline CorrelationTable kappa_position_mc(int order, const RealVector& h, std::size_t cells_per_axis,
                                          const IntensitySpec& sigma, const McPlan& plan) {
  require(order == 1 || order == 2, ErrorCode::InvalidArgument, "kappa order must be 1 or 2");
  require(h.size() == static_cast<std::size_t>(sigma.dimension()), ErrorCode::InvalidArgument, "h dimension mismatch");
  require(cells_per_axis >= 1, ErrorCode::InvalidArgument, "need at least one cell per axis");
  require(sigma.window.volume() > 0.0, ErrorCode::InvalidArgument, "kappa needs a window of positive volume");

  CorrelationTable table;
  table.order = order;
  table.cells_per_axis = cells_per_axis;
  table.window = sigma.window;
  table.h = h;
  table.eps = sigma.marks.eps();
  table.rmax = sigma.marks.rmax();
  const std::size_t cells = table.cells();
  const std::size_t entries = order == 1 ? cells : cells * cells;
  const double cell_volume = sigma.window.volume() / static_cast<double>(cells);

  const PoissonSampler sampler(sigma);
  struct Partial {
    std::vector<double> sum, sum_sq;
    std::vector<std::size_t> counts;
  };
  auto blocks = run_blocks(plan.seed, plan.n_samples, plan.chunks, [&](RandomStream& rng, std::size_t first, std::size_t last) {
    Partial part{std::vector<double>(entries, 0.0), std::vector<double>(entries, 0.0), std::vector<std::size_t>(entries, 0)};
    std::vector<std::size_t> touched;
    std::vector<double> scratch(entries, 0.0);
    std::vector<char> seen(entries, 0);
    for (std::size_t s = first; s < last; ++s) {
      const auto gamma = sampler.sample(rng);
      touched.clear();
      auto add = [&](std::size_t idx, double w) {
        if (!seen[idx]) {
          seen[idx] = 1;
          touched.push_back(idx);
        }
        scratch[idx] += w;
        part.counts[idx] += 1;
      };
      std::vector<std::size_t> cell(gamma.size());
      std::vector<double> weight(gamma.size());
      for (std::size_t p = 0; p < gamma.size(); ++p) {
        cell[p] = detail::cell_index(sigma.window, cells_per_axis, gamma[p].position);
        weight[p] = dot(h, gamma[p].velocity) / cell_volume;
      }
      if (order == 1) {
        for (std::size_t p = 0; p < gamma.size(); ++p) add(cell[p], weight[p]);
      } else {
        // Each unordered pair feeds (a,b) and (b,a) with the same value in the same order.
        for (std::size_t p = 0; p < gamma.size(); ++p) {
          for (std::size_t q = p + 1; q < gamma.size(); ++q) {
            const double w = weight[p] * weight[q];
            add(cell[p] * cells + cell[q], w);
            add(cell[q] * cells + cell[p], w);
          }
        }
      }
      for (const auto idx : touched) {
        const double v = scratch[idx];
        part.sum[idx] += v;
        part.sum_sq[idx] += v * v;
        scratch[idx] = 0.0;
        seen[idx] = 0;
      }
    }
    return part;
  });

  std::vector<CompensatedSum> sum(entries), sum_sq(entries);
  table.counts.assign(entries, 0);
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < entries; ++i) {
      sum[i].add(b.sum[i]);
      sum_sq[i].add(b.sum_sq[i]);
      table.counts[i] += b.counts[i];
    }
  }
  const double n = static_cast<double>(plan.n_samples);
  table.n_samples = plan.n_samples;
  table.estimate.resize(entries);
  table.std_error.resize(entries);
  for (std::size_t i = 0; i < entries; ++i) {
    const double mean = sum[i].value() / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq[i].value() - n * mean * mean) / (n - 1.0)) : 0.0;
    table.estimate[i] = mean;
    table.std_error[i] = std::sqrt(var / n);
  }
  PhaseStructure linear;
  linear.x_breaks.resize(sigma.dimension());
  linear.directional = true;
  const IntensitySpec unit(sigma.law, sigma.marks, PositionWindow::unit(sigma.dimension()));
  const double first_moment =
      integrate_phase(unit, linear, [&](std::span<const double> v, std::span<const double>) { return dot(h, v); });
  table.closed_form.assign(entries, order == 1 ? first_moment : first_moment * first_moment);
  return table;
}

}  // namespace conelab
