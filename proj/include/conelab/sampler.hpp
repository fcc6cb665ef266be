#pragma once

// Poisson configurations on a compact phase window and Lebesgue-Poisson
// series expectations.
//
// Monte Carlo work is cut into fixed blocks of kBlockSize draws; block b reads
// RandomStream(seed, b). Workers ("chunks") take contiguous ranges of blocks
// and results are merged in block order, so the chunk count never changes a
// single bit of the output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "conelab/combinat.hpp"
#include "conelab/config_core.hpp"
#include "conelab/intensity.hpp"
#include "conelab/random.hpp"

namespace conelab {

inline constexpr std::size_t kBlockSize = 1024;

/// Run block_fn(rng, first, last) over [0, n) in blocks; returns per-block results in block order.
template <class BlockFn>
auto run_blocks(std::uint64_t seed, std::size_t n, unsigned chunks, BlockFn&& block_fn) {
  using Result = decltype(block_fn(std::declval<RandomStream&>(), std::size_t{}, std::size_t{}));
  const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<Result> results(blocks);
  auto work = [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      RandomStream rng(seed, b);
      results[b] = block_fn(rng, b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(chunks, 1, std::max<std::size_t>(blocks, 1));
  if (workers <= 1) {
    work(0, blocks);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b0 = blocks * w / workers;
    const std::size_t b1 = blocks * (w + 1) / workers;
    threads.emplace_back([&, w, b0, b1] {
      try {
        work(b0, b1);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Sampler for pi_sigma restricted to the window of sigma.
class PoissonSampler {
 public:
  explicit PoissonSampler(IntensitySpec sigma)
      : sigma_(std::move(sigma)), velocities_(sigma_.law, sigma_.marks), mass_(sigma_mass(sigma_)) {}

  const IntensitySpec& intensity() const { return sigma_; }
  double mass() const { return mass_; }

  /// One point from sigma normalized to a probability on I x Lambda.
  MarkedPoint sample_point(RandomStream& rng) const {
    const int d = sigma_.dimension();
    MarkedPoint p;
    p.position.resize(d);
    for (int i = 0; i < d; ++i) p.position[i] = rng.uniform(sigma_.window.lower()[i], sigma_.window.upper()[i]);
    p.velocity = velocities_.sample(rng);
    return p;
  }

  /// n i.i.d. points; a point landing on an occupied position is redrawn.
  FiniteConfiguration sample_points(std::size_t n, RandomStream& rng) const {
    std::vector<MarkedPoint> pts;
    pts.reserve(n);
    while (pts.size() < n) {
      MarkedPoint p = sample_point(rng);
      const bool collides = std::any_of(pts.begin(), pts.end(), [&](const MarkedPoint& q) { return q.position == p.position; });
      if (!collides) pts.push_back(std::move(p));
    }
    return FiniteConfiguration::from_points(std::move(pts));
  }

  /// N ~ Poisson(sigma mass), then N i.i.d. points.
  FiniteConfiguration sample(RandomStream& rng) const {
    if (mass_ == 0.0) return {};
    const auto count = rng.poisson(mass_);
    return sample_points(static_cast<std::size_t>(count), rng);
  }

 private:
  IntensitySpec sigma_;
  VelocitySampler velocities_;
  double mass_;
};

inline FiniteConfiguration sample_poisson(const IntensitySpec& sigma, RandomStream& rng) {
  return PoissonSampler(sigma).sample(rng);
}

struct SampleBatch {
  std::vector<FiniteConfiguration> configs;
  IntensitySpec sigma;
  std::uint64_t seed;
  std::size_t n;
};

inline SampleBatch sample_batch(const IntensitySpec& sigma, std::uint64_t seed, std::size_t n, unsigned chunks = 1) {
  const PoissonSampler sampler(sigma);
  auto blocks = run_blocks(seed, n, chunks, [&](RandomStream& rng, std::size_t first, std::size_t last) {
    std::vector<FiniteConfiguration> out;
    out.reserve(last - first);
    for (std::size_t i = first; i < last; ++i) out.push_back(sampler.sample(rng));
    return out;
  });
  SampleBatch batch{{}, sigma, seed, n};
  batch.configs.reserve(n);
  for (auto& b : blocks) {
    for (auto& c : b) batch.configs.push_back(std::move(c));
  }
  return batch;
}

/// |G(xi)| <= scale * per_point^{|xi|}; used to bound the series tail.
struct GrowthBound {
  double scale = 1.0;
  double per_point = 1.0;
};

struct LpSeriesResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double truncation_bound = 0.0;
  std::size_t n_max = 0;
};

/// scale * sum_{n > n_max} x^n / n!, summed directly to avoid cancellation.
inline double poisson_tail(double x, std::size_t n_max, double scale = 1.0) {
  if (x <= 0.0) return 0.0;
  double term = 1.0;
  for (std::size_t k = 1; k <= n_max + 1; ++k) term *= x / static_cast<double>(k);
  double tail = 0.0;
  for (std::size_t k = n_max + 1; k < n_max + 10000; ++k) {
    tail += term;
    if (term < 1e-18 * tail) break;
    term *= x / static_cast<double>(k + 1);
  }
  return scale * tail;
}

struct LpSeriesOptions {
  std::size_t n_max = 30;
  std::size_t mc_per_order = 4096;
  std::uint64_t seed = 1;
  unsigned chunks = 1;
  GrowthBound bound{};
  double tolerance = 1e-6;  // largest acceptable truncation bound
};

/// Estimates int G dL_sigma = sum_{n <= n_max} (m^n / n!) E[G(n i.i.d. sigma-points)].
/// Throws TruncationTooLoose when the tail bound exceeds options.tolerance.
inline LpSeriesResult lp_series_expectation(const ConfigurationFunction& g, const IntensitySpec& sigma,
                                            const LpSeriesOptions& opt) {
  const PoissonSampler sampler(sigma);
  const double m = sampler.mass();
  LpSeriesResult result;
  result.n_max = opt.n_max;
  result.truncation_bound = poisson_tail(m * opt.bound.per_point, opt.n_max, opt.bound.scale);
  if (result.truncation_bound > opt.tolerance) {
    throw Error(ErrorCode::TruncationTooLoose, "series tail bound " + format_real(result.truncation_bound) +
                                                   " exceeds tolerance " + format_real(opt.tolerance));
  }
  CompensatedSum total;
  double variance = 0.0;
  total.add(g(FiniteConfiguration{}));
  double coeff = 1.0;  // m^n / n!
  for (std::size_t order = 1; order <= opt.n_max && m > 0.0; ++order) {
    coeff *= m / static_cast<double>(order);
    auto blocks = run_blocks(derive_seed(opt.seed, order), opt.mc_per_order, opt.chunks,
                             [&](RandomStream& rng, std::size_t first, std::size_t last) {
                               RunningStats s;
                               for (std::size_t i = first; i < last; ++i) s.push(g(sampler.sample_points(order, rng)));
                               return s;
                             });
    RunningStats stats;
    for (const auto& b : blocks) stats.merge(b);
    total.add(coeff * stats.mean());
    variance += coeff * coeff * stats.std_error() * stats.std_error();
  }
  result.estimate = total.value();
  result.std_error = std::sqrt(variance);
  return result;
}

}  // namespace conelab
