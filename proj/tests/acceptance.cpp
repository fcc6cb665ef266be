// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "conelab/cli.hpp"
#include "support.hpp"

using namespace conelab;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

const PositionWindow kUnit = PositionWindow::unit(1);
const MarkAnnulus kMarks(0.5, 2.0);

// ---------------------------------------------------------------------------

Outcome a1_k_round_trip() {
  RandomStream rng(101, 0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto g = random_configuration_function(derive_seed(101, i));
    const auto size = static_cast<std::size_t>(rng.uniform() * 9.0);
    const auto gamma = fixture::random_configuration(rng, size, 1 + i % 3);
    worst = std::max(worst, std::abs(k_inverse(k_transformed(g), gamma) - g(gamma)));
    worst = std::max(worst, std::abs(k_transform(k_inverted(g), gamma) - g(gamma)));
  }
  return {worst <= 1e-9, fmt("200 instances, |gamma| <= 8, max abs error %.3g (tol 1e-9)", worst)};
}

Outcome a2_star_homomorphism() {
  RandomStream rng(202, 0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto g1 = random_configuration_function(derive_seed(202, 2 * i));
    const auto g2 = random_configuration_function(derive_seed(202, 2 * i + 1));
    const auto size = static_cast<std::size_t>(rng.uniform() * 7.0);
    const auto gamma = fixture::random_configuration(rng, size, 1 + i % 2);
    const double lhs = k_transform(star(g1, g2), gamma);
    const double rhs = k_transform(g1, gamma) * k_transform(g2, gamma);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
  }
  return {worst <= 1e-9, fmt("100 pairs, |gamma| <= 6, max relative error %.3g (tol 1e-9)", worst)};
}

Outcome a3_coherent_states() {
  RandomStream rng(303, 0);
  const auto f = 0.3 * radial_mark(1) + linear_mark({-0.2, 0.1}) + constant(-0.1);
  const RealVector h{1.0, -0.5};
  const auto phi = 0.5 * position_bump(PositionWindow({0.0, 0.0}, {0.5, 1.0})) + constant(0.2);
  double worst = 0.0;
  bool cone_exact = true;
  for (int i = 0; i < 200; ++i) {
    const auto size = static_cast<std::size_t>(rng.uniform() * 11.0);
    const auto gamma = fixture::random_configuration(rng, size, 2);
    double expected = 1.0;
    for (const auto& p : gamma) expected *= 1.0 + evaluate(f, p);
    worst = std::max(worst, std::abs(k_transform(coherent(f), gamma) - expected));
    const auto cone = coherent_cone(h, phi);
    cone_exact = cone_exact && k_transform_cone(cone, reflect(gamma)) == k_transform(pull_back(cone), gamma);
  }
  return {worst <= 1e-12 && cone_exact,
          fmt("200 instances, |gamma| <= 10, max abs error %.3g (tol 1e-12); cone via reflection exact: ", worst) +
              (cone_exact ? "yes" : "no")};
}

Outcome a4_reflection_k_relation() {
  RandomStream rng(404, 0);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto g = random_configuration_function(derive_seed(404, i));
    const ConeFunction cone{[&](const VectorDiscreteMeasure& eta) { return g(unreflect(eta)); },
                            FunctionClass::Unrestricted};
    const auto size = static_cast<std::size_t>(rng.uniform() * 11.0);
    const auto eta = reflect(fixture::random_configuration(rng, size, 1 + i % 3));
    if (k_transform_cone(cone, eta) != k_transform(g, unreflect(eta))) ++mismatches;
  }
  return {mismatches == 0, fmt("200 instances, %.0f inexact", mismatches)};
}

/// Runs the exact suite once and keeps the worst |lhs - rhs| per identity.
std::map<std::string, std::pair<double, int>> exact_suite() {
  std::ostringstream out;
  cli::cmd_verify_exact(505, 500, 8, 12, 1, out);
  std::map<std::string, std::pair<double, int>> worst;
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string field; std::getline(ls, field, ',');) f.push_back(field);
    auto& w = worst[f[0]];
    w.first = std::max(w.first, std::stod(f[4]));
    w.second += 1;
  }
  return worst;
}

Outcome a5_minlos(const std::map<std::string, std::pair<double, int>>& suite) {
  const auto m1 = suite.at("minlos_1");
  const auto m2 = suite.at("minlos_2");
  const bool pass = m1.first <= 1e-12 && m2.first <= 1e-12 && m1.second == 500 && m2.second == 500;
  return {pass, fmt("500 instances each, |S| <= 8, max |lhs-rhs| %.3g and %.3g (tol 1e-12)", m1.first, m2.first)};
}

Outcome a6_bernoulli(const std::map<std::string, std::pair<double, int>>& suite) {
  const auto b = suite.at("bernoulli_duality");
  return {b.first <= 1e-12 && b.second == 500, fmt("500 instances, |S| <= 12, max |lhs-rhs| %.3g (tol 1e-12)", b.first)};
}

Outcome a7_quadrature() {
  const VelocityLaw law(1, 1.0, 2.0);
  const double mass = lambda_mass(law, kMarks);
  const double m1 = lambda_moment(law, 1, std::nullopt);
  const double m2 = lambda_moment(law, 2, std::nullopt);
  const double eps = 1e-4;
  const double diff = lambda_mass(law, MarkAnnulus(eps, 2.0)) - lambda_mass(law, MarkAnnulus(2 * eps, 2.0));
  const double ln4 = 2.0 * std::log(2.0);
  const bool pass = std::abs(mass - 1.0405) <= 1e-3 && std::abs(mass - oracle::kMass) <= 1e-9 &&
                    std::abs(m1 - std::sqrt(std::numbers::pi)) <= 1e-6 && std::abs(m2 - 1.0) <= 1e-6 &&
                    std::abs(diff / ln4 - 1.0) <= 0.01;
  return {pass, fmt("mass %.10f, moment1 - sqrt(pi) %.2g, moment2 - 1 %.2g", mass, m1 - std::sqrt(std::numbers::pi),
                    m2 - 1.0) +
                    fmt(", divergence ratio %.5f", diff / ln4)};
}

Outcome a8_sampler() {
  const auto sigma = fixture::reference_sigma();
  const std::size_t n = 100000;
  const auto batch = sample_batch(sigma, 808, n);
  RunningStats counts;
  for (const auto& c : batch.configs) counts.push(static_cast<double>(c.size()));
  const double m = sigma_mass(sigma);
  const double z_mean = (counts.mean() - m) / std::sqrt(m / n);
  const double z_var = (counts.variance() - m) / std::sqrt((m + 2.0 * m * m) / n);

  const VelocitySampler radial(sigma.law, sigma.marks);
  RandomStream rng(808, 1);
  const int k = 10000;
  std::vector<double> r(k);
  for (auto& x : r) x = norm(radial.sample(rng));
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  for (int i = 0; i < k; ++i) {
    const double f = oracle::mass_d1_a1_b2(0.5, r[i]) / oracle::kMass;
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / k), std::abs(f - static_cast<double>(i + 1) / k)});
  }
  const double ks_limit = 1.628 / std::sqrt(static_cast<double>(k));
  const bool pass = std::abs(z_mean) <= 3.0 && std::abs(z_var) <= 3.0 && ks <= ks_limit;
  return {pass, fmt("count mean z %.2f, variance z %.2f, radial KS %.4f", z_mean, z_var, ks) +
                    fmt(" (limit %.4f)", ks_limit)};
}

/// |z| <= 3 passes; 3 < |z| <= 4 is retried once with a fresh seed; |z| > 4 fails.
struct RetryResult {
  bool pass;
  double z;
  bool retried;
};

RetryResult retry_once(const std::function<MCResult(std::uint64_t)>& run, std::uint64_t seed) {
  double z = *run(seed).z_score;
  if (std::abs(z) <= 3.0) return {true, z, false};
  if (std::abs(z) > 4.0) return {false, z, false};
  z = *run(derive_seed(seed, 0xfeed)).z_score;
  return {std::abs(z) <= 3.0, z, true};
}

Outcome a9_monte_carlo() {
  const auto sigma = fixture::reference_sigma();
  const std::size_t n = 100000;
  struct Check {
    const char* name;
    double reference;  // published digits
    double oracle;     // independent closed form
    std::function<MCResult(std::uint64_t)> run;
  };
  auto functional = [&](FunctionalKind kind, FunctionalArgs args) {
    return [=](std::uint64_t seed) { return estimate_functional(kind, args, sigma, {seed, n, 1}); };
  };
  const PhaseBox left{kMarks, PositionWindow({0.0}, {0.5})};
  const PhaseBox right{kMarks, PositionWindow({0.5}, {1.0})};
  const std::vector<Check> checks = {
      {"laplace", 0.6641, oracle::kLaplace,
       functional(FunctionalKind::Laplace, {-0.5 * indicator(kMarks, kUnit), {}})},
      {"campbell", 0.8416, oracle::kCampbell,
       functional(FunctionalKind::Campbell, {radial_mark(1) * position_bump(kUnit), {}})},
      {"bogoliubov", 1.2313, oracle::kBogoliubov,
       functional(FunctionalKind::Bogoliubov, {0.2 * indicator(kMarks, kUnit), {}})},
      {"cone_laplace", 1.102, oracle::kCone,
       functional(FunctionalKind::ConeLaplace, {0.5 * position_bump(kUnit), {1.0}})},
      {"factorial_1", 0.5203, 0.5 * oracle::kMass,
       [&](std::uint64_t seed) { return factorial_moment_mc({left}, sigma, {seed, n, 1}); }},
      {"factorial_2", 0.2707, 0.25 * oracle::kMass * oracle::kMass,
       [&](std::uint64_t seed) { return factorial_moment_mc({left, right}, sigma, {seed, n, 1}); }},
  };
  bool pass = true;
  std::string detail;
  std::uint64_t salt = 0;
  for (const auto& c : checks) {
    const double closed = *c.run(1).closed_form;
    const bool digits = std::abs(closed - c.reference) <= 1e-3;
    const bool oracle_ok = std::abs(closed - c.oracle) <= 1e-9 * std::max(1.0, std::abs(c.oracle));
    const auto r = retry_once(c.run, derive_seed(909, ++salt));
    pass = pass && r.pass && oracle_ok && digits;
    detail += std::string(detail.empty() ? "" : "; ") + c.name + fmt(" z=%.2f", r.z) + (r.retried ? " (retried)" : "") +
              (oracle_ok && digits ? "" : " closed form off");
  }
  return {pass, detail};
}

Outcome a10_correlation_density() {
  const auto sigma = fixture::reference_sigma();
  const auto gamma0 = FiniteConfiguration::from_points({{{1.25}, {1.0 / 3.0}}, {{-0.75}, {2.0 / 3.0}}});
  const auto r = correlation_density_mc(gamma0, TiltDensity(0.2 * indicator(kMarks, kUnit), sigma), sigma,
                                        {1010, 100000, 1});
  const auto zero = correlation_density_mc(gamma0, TiltDensity(constant(0.0), sigma), sigma, {1011, 100000, 1});
  const bool pass = std::abs(*r.closed_form - 1.44) <= 1e-12 && std::abs(*r.z_score) <= 3.0 && zero.estimate == 1.0 &&
                    zero.std_error == 0.0;
  return {pass, fmt("phi=0.2 ind: k=%.5f +- %.5f (z=%.2f)", r.estimate, r.std_error, *r.z_score) +
                    fmt("; phi=0: k=%.17g", zero.estimate)};
}

Outcome a11_kappa() {
  const auto sym = kappa_position_mc(1, {1.0}, 10, fixture::reference_sigma(false), {1111, 100000, 1});
  const auto one = kappa_position_mc(1, {1.0}, 10, fixture::reference_sigma(true), {1112, 100000, 1});
  double z_sym = 0.0, z_one = 0.0;
  for (std::size_t i = 0; i < sym.cells(); ++i) {
    z_sym = std::max(z_sym, std::abs(sym.z_score(i)));
    z_one = std::max(z_one, std::abs(one.z_score(i)));
  }
  const bool closed_ok = std::abs(one.closed_form[0] - 0.4208) <= 1e-4 &&
                         std::abs(one.closed_form[0] - 0.5 * oracle::kCampbell) <= 1e-10 && sym.closed_form[0] == 0.0;
  return {closed_ok && z_sym <= 3.0 && z_one <= 3.0,
          fmt("10 cells: symmetric max |z| %.2f; one-sided closed form %.10f, max |z| %.2f", z_sym, one.closed_form[0],
              z_one)};
}

std::vector<std::string> estimate_column(const std::string& csv) {
  std::vector<std::string> col;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string field; std::getline(ls, field, ',');) f.push_back(field);
    col.push_back(f.size() > 2 ? f[0] + "=" + f[2] : line);
  }
  return col;
}

Outcome a12_determinism() {
  const std::string config = std::string(CONELAB_SOURCE_DIR) + "/configs/base.cfg";
  const char* argv[] = {"cone-lab", "verify-mc", "--config", config.c_str()};
  auto run_with = [&](const char* chunks) {
    ::setenv("CONELAB_CHUNKS", chunks, 1);
    std::ostringstream out, err;
    const int code = cli::run(4, argv, out, err);
    return std::make_pair(code, out.str());
  };
  const auto a = run_with("1");
  const auto b = run_with("4");
  ::unsetenv("CONELAB_CHUNKS");
  const auto ca = estimate_column(a.second);
  const auto cb = estimate_column(b.second);
  const bool pass = a.first == 0 && b.first == 0 && !ca.empty() && ca == cb;
  return {pass, fmt("CONELAB_CHUNKS=1 vs 4: %.0f rows, exit codes %.0f/%.0f, estimate columns ",
                    static_cast<double>(ca.size()), a.first, b.first) +
                    (ca == cb ? "identical" : "differ")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* id, const char* what, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", what, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  report("A1", "K-transform round trips", a1_k_round_trip);
  report("A2", "convolution homomorphism", a2_star_homomorphism);
  report("A3", "coherent states", a3_coherent_states);
  report("A4", "reflection K-relation", a4_reflection_k_relation);
  const auto suite = exact_suite();
  report("A5", "Minlos identities", [&] { return a5_minlos(suite); });
  report("A6", "Bernoulli K-duality", [&] { return a6_bernoulli(suite); });
  report("A7", "quadrature oracle", a7_quadrature);
  report("A8", "sampler laws", a8_sampler);
  report("A9", "Monte Carlo vs closed forms", a9_monte_carlo);
  report("A10", "correlation density", a10_correlation_density);
  report("A11", "kappa^(1)", a11_kappa);
  report("A12", "determinism across chunks", a12_determinism);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
