#pragma once

// cone-lab command line: sample, moments, estimate, verify-exact, verify-mc.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 a
// mathematical identity failed (exact |diff| > 1e-12 or |z| > 4), 3 numerical
// failure (quadrature, truncation, budget). Errors go to stderr as
// "ERROR <ErrorCode name>: message".

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conelab/combinat.hpp"
#include "conelab/config_core.hpp"
#include "conelab/error.hpp"
#include "conelab/estimators.hpp"
#include "conelab/function_dsl.hpp"
#include "conelab/intensity.hpp"
#include "conelab/oracle.hpp"
#include "conelab/run_config.hpp"
#include "conelab/sampler.hpp"

namespace conelab::cli {

enum ExitCode : int { kOk = 0, kInvalidConfig = 1, kVerificationFailed = 2, kNumericalFailure = 3 };

inline constexpr double kExactTolerance = 1e-12;
inline constexpr double kHardZ = 4.0;

inline const char* kEstimateHeader = "quantity,kind,estimate,std_error,closed_form,z_score,n_samples,seed";
inline const char* kExactHeader = "identity,instance_seed,lhs,rhs,abs_diff,pass";
inline const char* kMomentsHeader = "quantity,order,range,value";

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::QuadratureFailure:
    case ErrorCode::DivergentMoment:
    case ErrorCode::BudgetExceeded:
    case ErrorCode::TruncationTooLoose:
      return kNumericalFailure;
    default:
      return kInvalidConfig;
  }
}

inline std::string optional_field(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

inline std::string estimate_row(const std::string& quantity, const std::string& kind, const MCResult& r,
                                std::uint64_t seed) {
  return quantity + "," + kind + "," + format_real(r.estimate) + "," + format_real(r.std_error) + "," +
         optional_field(r.closed_form) + "," + optional_field(r.z_score) + "," + std::to_string(r.n_samples) + "," +
         std::to_string(seed);
}

/// Default test functions tied to the phase window of the configuration.
struct DefaultFunctions {
  FunctionSpec laplace, campbell, bogoliubov, cone_phi;
  RealVector cone_h;
};

inline DefaultFunctions resolve_functions(const RunConfig& cfg, const IntensitySpec& sigma) {
  const MarkAnnulus two_sided(sigma.marks.eps(), sigma.marks.rmax());
  DefaultFunctions out;
  auto pick = [&](const std::string& key, FunctionSpec fallback) {
    auto it = cfg.functions.find(key);
    if (it == cfg.functions.end() || it->second.empty()) return fallback;
    auto f = parse_function(it->second);
    check_dimension(f, sigma.dimension());
    return f;
  };
  out.laplace = pick("laplace", -0.5 * indicator(two_sided, sigma.window));
  out.campbell = pick("campbell", radial_mark(1) * position_bump(sigma.window));
  out.bogoliubov = pick("bogoliubov", 0.2 * indicator(two_sided, sigma.window));
  out.cone_phi = pick("cone_phi", 0.5 * position_bump(sigma.window));
  out.cone_h = RealVector(sigma.dimension(), 0.0);
  out.cone_h[0] = 1.0;
  if (auto it = cfg.functions.find("cone_h"); it != cfg.functions.end() && !it->second.empty()) {
    out.cone_h = parse_real_list(it->second);
    require(out.cone_h.size() == static_cast<std::size_t>(sigma.dimension()), ErrorCode::InvalidConfig,
            "functions.cone_h must have d entries");
  }
  return out;
}

inline unsigned effective_chunks(unsigned configured) {
  if (const char* env = std::getenv("CONELAB_CHUNKS"); env && *env) {
    try {
      const double v = parse_real(env);
      if (v >= 1.0 && v == static_cast<unsigned>(v)) return static_cast<unsigned>(v);
    } catch (const Error&) {
    }
    throw Error(ErrorCode::InvalidConfig, "CONELAB_CHUNKS must be a positive integer");
  }
  return configured;
}

/// Output stream that is either a file or the supplied default.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error(ErrorCode::InvalidConfig, "cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

// ---------------------------------------------------------------------------

inline int cmd_moments(const RunConfig& cfg, int max_order, std::ostream& out) {
  const auto sigma = cfg.intensity();
  out << kMomentsHeader << '\n';
  out << "lambda_mass,0,annulus," << format_real(lambda_mass(sigma.law, sigma.marks)) << '\n';
  for (int n = 1; n <= max_order; ++n) {
    out << "lambda_moment," << n << ",annulus," << format_real(lambda_moment(sigma.law, n, sigma.marks)) << '\n';
  }
  for (int n = 1; n <= max_order; ++n) {
    out << "lambda_moment," << n << ",full," << format_real(lambda_moment(sigma.law, n, std::nullopt)) << '\n';
  }
  out << "sigma_mass,0,annulus," << format_real(sigma_mass(sigma)) << '\n';
  return kOk;
}

inline int cmd_sample(const RunConfig& cfg, unsigned chunks, std::ostream& out, const std::string& manifest_path) {
  const auto sigma = cfg.intensity();
  const auto batch = sample_batch(sigma, cfg.seed, cfg.n_samples, chunks);
  const int d = sigma.dimension();
  out << "config_id," << csv_header(d) << '\n';
  std::size_t total = 0;
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t i = 0; i < batch.configs.size(); ++i) {
    for (const auto& p : batch.configs[i]) out << i << ',' << csv_row(p) << '\n';
    total += batch.configs[i].size();
    counts.push_back(batch.configs[i].size());
  }
  if (!manifest_path.empty()) {
    std::ofstream manifest(manifest_path, std::ios::app | std::ios::binary);
    if (!manifest) throw Error(ErrorCode::InvalidConfig, "cannot write manifest '" + manifest_path + "'");
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    nlohmann::json record = {
        {"command", "sample"},
        {"seed", cfg.seed},
        {"n", cfg.n_samples},
        {"d", d},
        {"alpha", cfg.alpha},
        {"beta", cfg.beta},
        {"eps", sigma.marks.eps()},
        {"rmax", sigma.marks.rmax()},
        {"one_sided", sigma.marks.one_sided()},
        {"box_lower", sigma.window.lower()},
        {"box_upper", sigma.window.upper()},
        {"sigma_mass", sigma_mass(sigma)},
        {"total_points", total},
        {"counts", counts},
        {"timestamp", stamp},
    };
    manifest << record.dump() << '\n';
  }
  return kOk;
}

inline int cmd_estimate(const RunConfig& cfg, FunctionalKind kind, const std::string& f_text, const std::string& h_text,
                        unsigned chunks, std::size_t sweep, std::ostream& out) {
  const auto sigma = cfg.intensity();
  const auto defaults = resolve_functions(cfg, sigma);
  FunctionalArgs args;
  switch (kind) {
    case FunctionalKind::Laplace: args.f = defaults.laplace; break;
    case FunctionalKind::Campbell: args.f = defaults.campbell; break;
    case FunctionalKind::Bogoliubov: args.f = defaults.bogoliubov; break;
    case FunctionalKind::ConeLaplace: args.f = defaults.cone_phi; break;
  }
  args.h = defaults.cone_h;
  if (!f_text.empty()) args.f = parse_function(f_text);
  if (!h_text.empty()) args.h = parse_real_list(h_text);

  out << kEstimateHeader << '\n';
  const std::size_t steps = std::max<std::size_t>(sweep, 1);
  bool violated = false;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t n = std::max<std::size_t>(1, cfg.n_samples >> (steps - 1 - k));
    const auto r = estimate_functional(kind, args, sigma, {cfg.seed, n, chunks});
    if (r.z_score && std::abs(*r.z_score) > kHardZ) violated = true;
    out << estimate_row(to_string(kind), "functional", r, cfg.seed) << '\n';
  }
  return violated ? kVerificationFailed : kOk;
}

inline int cmd_verify_exact(std::uint64_t seed, std::size_t instances, std::size_t max_size,
                            std::size_t max_size_duality, int d, std::ostream& out) {
  require(max_size <= kIdentityBudget && max_size_duality <= kIdentityBudget, ErrorCode::InvalidConfig,
          "ground sets are limited to 12 atoms");
  out << kExactHeader << '\n';
  bool failed = false;
  auto emit = [&](const char* name, std::uint64_t s, const IdentityCheck& c) {
    const bool pass = c.abs_diff <= kExactTolerance;
    failed |= !pass;
    out << name << ',' << s << ',' << format_real(c.lhs) << ',' << format_real(c.rhs) << ','
        << format_real(c.abs_diff) << ',' << (pass ? "true" : "false") << '\n';
  };
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    RandomStream rng(s, 0);
    const auto small = static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_size + 1));
    const auto large = static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_size_duality + 1));
    const auto ground = random_ground_set(rng, small, d);
    const auto ground_duality = random_ground_set(rng, large, d);
    emit("minlos_1", s, verify_minlos_1(random_configuration_function(s), random_pair_function(s), ground));
    emit("minlos_2", s, verify_minlos_2(random_point_function(s), ground));
    emit("bernoulli_duality", s, verify_bernoulli_duality(random_configuration_function(s ^ 1), ground_duality));
  }
  return failed ? kVerificationFailed : kOk;
}

/// Monte Carlo identity suite; every row carries its closed form and z-score.
inline int cmd_verify_mc(const RunConfig& cfg, unsigned chunks, std::ostream& out) {
  const auto sigma = cfg.intensity();
  const auto fns = resolve_functions(cfg, sigma);
  const int d = sigma.dimension();
  out << kEstimateHeader << '\n';
  bool violated = false;
  std::uint64_t salt = 0;
  auto plan = [&] { return McPlan{derive_seed(cfg.seed, ++salt), cfg.n_samples, chunks}; };
  auto emit = [&](const std::string& quantity, const std::string& kind, const MCResult& r) {
    if (r.z_score && std::abs(*r.z_score) > kHardZ) violated = true;
    out << estimate_row(quantity, kind, r, cfg.seed) << '\n';
  };

  emit("laplace", "functional", estimate_functional(FunctionalKind::Laplace, {fns.laplace, {}}, sigma, plan()));
  emit("campbell", "functional", estimate_functional(FunctionalKind::Campbell, {fns.campbell, {}}, sigma, plan()));
  const auto bogo = estimate_functional(FunctionalKind::Bogoliubov, {fns.bogoliubov, {}}, sigma, plan());
  emit("bogoliubov", "functional", bogo);
  emit("cone_laplace", "functional",
       estimate_functional(FunctionalKind::ConeLaplace, {fns.cone_phi, fns.cone_h}, sigma, plan()));

  const auto series = bogoliubov_expansion(fns.bogoliubov, sigma, 12);
  emit("bogoliubov_expansion", "series",
       make_result(bogo.estimate, bogo.std_error, bogo.n_samples, series.value));

  // Split the window in two halves along the first axis.
  RealVector mid_upper = sigma.window.upper();
  RealVector mid_lower = sigma.window.lower();
  mid_upper[0] = mid_lower[0] = 0.5 * (sigma.window.lower()[0] + sigma.window.upper()[0]);
  const PhaseBox left{sigma.marks, PositionWindow(sigma.window.lower(), mid_upper)};
  const PhaseBox right{sigma.marks, PositionWindow(mid_lower, sigma.window.upper())};
  emit("factorial_moment_1", "factorial_moment", factorial_moment_mc({left}, sigma, plan()));
  emit("factorial_moment_2", "factorial_moment", factorial_moment_mc({left, right}, sigma, plan()));

  LpSeriesOptions series_opt;
  series_opt.n_max = cfg.n_max;
  series_opt.mc_per_order = cfg.mc_per_order;
  ConfigurationFunction single_in_left{[&](const FiniteConfiguration& xi) {
                                         return (xi.size() == 1 && left.contains(xi[0])) ? 1.0 : 0.0;
                                       },
                                       FunctionClass::BoundedBoundedSupport};
  emit("k_duality_single", "k_duality", k_duality_check(single_in_left, sigma, plan(), series_opt));
  series_opt.bound = {1.0, 1.0 + 0.2};
  emit("k_duality_coherent", "k_duality",
       k_duality_check(coherent(fns.bogoliubov), sigma, plan(), series_opt));

  // Two reference points at 1/3 and 2/3 of the window along the first axis.
  RealVector v0(d, 0.0);
  v0[0] = 0.5 * (sigma.marks.eps() + sigma.marks.rmax());
  std::vector<MarkedPoint> pts;
  for (double t : {1.0 / 3.0, 2.0 / 3.0}) {
    RealVector x(d);
    for (int i = 0; i < d; ++i) x[i] = sigma.window.lower()[i] + t * (sigma.window.upper()[i] - sigma.window.lower()[i]);
    pts.push_back({v0, x});
  }
  const auto gamma0 = FiniteConfiguration::from_points(pts);
  emit("correlation_density", "correlation_density",
       correlation_density_mc(gamma0, TiltDensity(fns.bogoliubov, sigma), sigma, plan()));

  const auto kappa = kappa_position_mc(1, fns.cone_h, cfg.cells, sigma, plan());
  for (std::size_t i = 0; i < kappa.estimate.size(); ++i) {
    emit("kappa1[" + std::to_string(i) + "]", "kappa_position",
         make_result(kappa.estimate[i], kappa.std_error[i], kappa.n_samples, kappa.closed_form[i]));
  }
  return violated ? kVerificationFailed : kOk;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the cone-lab binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cone-lab: Poisson sampling and K-calculus checks for singular velocity intensities"};
  app.require_subcommand(1);

  std::string config_path, out_path, manifest_path, kind_text, f_text, h_text;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_samples;
  std::optional<unsigned> chunks;
  int max_order = 2;
  std::size_t sweep = 1;
  std::uint64_t exact_seed = 1;
  std::size_t instances = 500, max_size = 8, max_size_duality = 12;
  int exact_d = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--out", out_path, "output CSV (default: [output] csv, else stdout)");
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--n", n_samples, "override run.n_samples");
    sub->add_option("--chunks", chunks, "override run.chunks");
  };
  auto* sample = app.add_subcommand("sample", "draw Poisson configurations");
  add_common(sample);
  sample->add_option("--manifest", manifest_path, "JSON-lines manifest (default: <out>.manifest.jsonl)");
  auto* moments = app.add_subcommand("moments", "lambda masses and moments");
  add_common(moments);
  moments->add_option("--max-order", max_order, "highest moment order")->check(CLI::Range(1, 64));
  auto* estimate = app.add_subcommand("estimate", "Monte Carlo functional against its closed form");
  add_common(estimate);
  estimate->add_option("--kind", kind_text, "laplace | campbell | bogoliubov | cone_laplace")->required();
  estimate->add_option("--f", f_text, "test function (grammar text)");
  estimate->add_option("--direction", h_text, "direction h for cone_laplace, comma separated");
  estimate->add_option("--sweep", sweep, "emit rows at n/2^(k-1), ..., n")->check(CLI::Range(1, 20));
  auto* verify_exact = app.add_subcommand("verify-exact", "exact finite-ground-set identities");
  verify_exact->add_option("--seed", exact_seed, "suite seed");
  verify_exact->add_option("--instances", instances, "random instances per identity");
  verify_exact->add_option("--max-size", max_size, "largest ground set for the Minlos identities");
  verify_exact->add_option("--max-size-duality", max_size_duality, "largest ground set for Bernoulli duality");
  verify_exact->add_option("--d", exact_d, "dimension")->check(CLI::Range(1, 8));
  verify_exact->add_option("--out", out_path, "output CSV (default stdout)");
  auto* verify_mc = app.add_subcommand("verify-mc", "Monte Carlo identity suite");
  add_common(verify_mc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ERROR InvalidConfig: " << e.what() << '\n';
    return kInvalidConfig;
  }

  try {
    if (verify_exact->parsed()) {
      OutputTarget target(out_path, out);
      return cmd_verify_exact(exact_seed, instances, max_size, max_size_duality, exact_d, target.get());
    }
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (n_samples) cfg.n_samples = *n_samples;
    if (chunks) cfg.chunks = *chunks;
    if (cfg.n_samples < 1 || cfg.chunks < 1) throw Error(ErrorCode::InvalidConfig, "n and chunks must be >= 1");
    const unsigned workers = effective_chunks(cfg.chunks);
    if (out_path.empty()) out_path = cfg.csv_path;
    OutputTarget target(out_path, out);
    if (moments->parsed()) return cmd_moments(cfg, max_order, target.get());
    if (sample->parsed()) {
      if (manifest_path.empty()) manifest_path = cfg.manifest_path;
      if (manifest_path.empty() && !out_path.empty() && out_path != "-") manifest_path = out_path + ".manifest.jsonl";
      return cmd_sample(cfg, workers, target.get(), manifest_path);
    }
    if (estimate->parsed()) {
      const auto kind = parse_functional_kind(kind_text);
      if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown --kind '" + kind_text + "'");
      return cmd_estimate(cfg, *kind, f_text, h_text, workers, sweep, target.get());
    }
    return cmd_verify_mc(cfg, workers, target.get());
  } catch (const Error& e) {
    err << "ERROR " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace conelab::cli
