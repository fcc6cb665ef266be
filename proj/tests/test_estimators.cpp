#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace conelab;

namespace {

const PositionWindow kUnit = PositionWindow::unit(1);
const MarkAnnulus kMarks(0.5, 2.0);

FunctionalArgs args(FunctionSpec f, RealVector h = {}) { return {std::move(f), std::move(h)}; }

void expect_consistent(const MCResult& r, double z_max = 4.0) {
  ASSERT_TRUE(r.closed_form.has_value());
  ASSERT_TRUE(r.z_score.has_value());
  EXPECT_LE(std::abs(*r.z_score), z_max) << "estimate " << r.estimate << " closed form " << *r.closed_form
                                          << " se " << r.std_error;
}

}  // namespace

TEST(ClosedForms, ReferenceFunctionals) {
  const auto sigma = fixture::reference_sigma();
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Laplace, args(-0.5 * indicator(kMarks, kUnit)), sigma),
              oracle::kLaplace, 1e-10);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Campbell, args(radial_mark(1) * position_bump(kUnit)), sigma),
              oracle::kCampbell, 1e-10);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Bogoliubov, args(0.2 * indicator(kMarks, kUnit)), sigma),
              oracle::kBogoliubov, 1e-10);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::ConeLaplace, args(0.5 * position_bump(kUnit), {1.0}), sigma),
              oracle::kCone, 1e-10);
}

TEST(ClosedForms, PublishedDigits) {
  const auto sigma = fixture::reference_sigma();
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Laplace, args(-0.5 * indicator(kMarks, kUnit)), sigma), 0.6641,
              1e-4);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Campbell, args(radial_mark(1) * position_bump(kUnit)), sigma),
              0.8416, 1e-4);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::Bogoliubov, args(0.2 * indicator(kMarks, kUnit)), sigma), 1.2313,
              1e-4);
  EXPECT_NEAR(closed_form_functional(FunctionalKind::ConeLaplace, args(0.5 * position_bump(kUnit), {1.0}), sigma),
              1.102, 1e-3);
}

TEST(ClosedForms, PhiLambdaH) {
  const VelocityLaw law(1, 1.0, 2.0);
  const RealVector h{1.0};
  EXPECT_NEAR(log_phi_lambda_h(law, kMarks, h, 0.5), oracle::cone_exponent_d1(0.5, 0.5, 2.0), 1e-10);
  EXPECT_EQ(phi_lambda_h(law, kMarks, h, 0.0), 1.0);
}

TEST(ClosedForms, ConeInHigherDimension) {
  // d = 2, h = (0, 1): int (exp(v_2 c) - 1) lambda(dv) = 2 pi int (I0(c r) - 1) r^{1-alpha} e^{-r^2} dr.
  const IntensitySpec sigma(VelocityLaw(2, 2.5, 2.0), kMarks, PositionWindow::unit(2));
  const double c = 0.4;
  const double exponent = 2.0 * std::numbers::pi * oracle::integrate(
      [&](double r) { return (std::cyl_bessel_i(0.0, c * r) - 1.0) * std::pow(r, 1.0 - 2.5) * std::exp(-r * r); }, 0.5,
      2.0);
  const auto f = args(c * position_bump(PositionWindow::unit(2)), {0.0, 1.0});
  EXPECT_NEAR(closed_form_functional(FunctionalKind::ConeLaplace, f, sigma), std::exp(exponent), 1e-9);
}

TEST(Functionals, MonteCarloAgreesWithClosedForms) {
  const auto sigma = fixture::reference_sigma();
  const McPlan plan{31, 20000, 1};
  expect_consistent(estimate_functional(FunctionalKind::Laplace, args(-0.5 * indicator(kMarks, kUnit)), sigma, plan));
  expect_consistent(
      estimate_functional(FunctionalKind::Campbell, args(radial_mark(1) * position_bump(kUnit)), sigma, plan));
  expect_consistent(estimate_functional(FunctionalKind::Bogoliubov, args(0.2 * indicator(kMarks, kUnit)), sigma, plan));
  expect_consistent(
      estimate_functional(FunctionalKind::ConeLaplace, args(0.5 * position_bump(kUnit), {1.0}), sigma, plan));
}

TEST(Functionals, TwoDimensionalCampbell) {
  const IntensitySpec sigma(VelocityLaw(2, 2.5, 1.0), MarkAnnulus(0.25, 3.0), PositionWindow({0.0, 0.0}, {1.0, 0.5}));
  const auto f = radial_mark(1) + linear_mark({1.0, 1.0});
  const auto r = estimate_functional(FunctionalKind::Campbell, args(f), sigma, {5, 20000, 1});
  const double expected = 0.5 * 2.0 * std::numbers::pi *
                          oracle::integrate([](double r) { return std::pow(r, 1.0 - 1.5) * std::exp(-r); }, 0.25, 3.0);
  EXPECT_NEAR(*r.closed_form, expected, 1e-9);
  expect_consistent(r);
}

TEST(Functionals, ArgumentValidation) {
  const auto sigma = fixture::reference_sigma();
  EXPECT_THROW(estimate_functional(FunctionalKind::ConeLaplace, args(position_bump(kUnit)), sigma, {1, 10, 1}), Error);
  EXPECT_THROW(estimate_functional(FunctionalKind::ConeLaplace, args(radial_mark(1), {1.0}), sigma, {1, 10, 1}), Error);
  EXPECT_THROW(estimate_functional(FunctionalKind::Campbell, args(linear_mark({1.0, 2.0})), sigma, {1, 10, 1}), Error);
  EXPECT_THROW(estimate_functional(FunctionalKind::Bogoliubov, args(constant(-1.5)), sigma, {1, 1000, 1}), Error);
}

TEST(Functionals, KindNames) {
  for (auto k : {FunctionalKind::Laplace, FunctionalKind::Campbell, FunctionalKind::Bogoliubov,
                 FunctionalKind::ConeLaplace}) {
    EXPECT_EQ(parse_functional_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_functional_kind("fourier").has_value());
}

TEST(Functionals, DeterministicAcrossChunks) {
  const auto sigma = fixture::reference_sigma();
  const auto f = args(-0.5 * indicator(kMarks, kUnit));
  const auto a = estimate_functional(FunctionalKind::Laplace, f, sigma, {8, 9000, 1});
  const auto b = estimate_functional(FunctionalKind::Laplace, f, sigma, {8, 9000, 5});
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Functionals, StandardErrorShrinksAsRootN) {
  const auto sigma = fixture::reference_sigma();
  const auto f = args(radial_mark(1) * position_bump(kUnit));
  const auto small = estimate_functional(FunctionalKind::Campbell, f, sigma, {12, 20000, 1});
  const auto large = estimate_functional(FunctionalKind::Campbell, f, sigma, {12, 40000, 1});
  EXPECT_NEAR(large.std_error / small.std_error, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

TEST(BogoliubovExpansion, ConvergesToExponential) {
  const auto sigma = fixture::reference_sigma();
  const auto phi = 0.2 * indicator(kMarks, kUnit);
  const auto s12 = bogoliubov_expansion(phi, sigma, 12);
  EXPECT_NEAR(s12.value, oracle::kBogoliubov, 1e-12);
  const auto s2 = bogoliubov_expansion(phi, sigma, 2);
  EXPECT_LE(std::abs(s2.value - oracle::kBogoliubov), s2.tail_bound * (1.0 + 1e-12));
  EXPECT_GT(s2.tail_bound, 0.0);
}

TEST(FactorialMoments, ClosedFormsAndMonteCarlo) {
  const auto sigma = fixture::reference_sigma();
  const PhaseBox left{kMarks, PositionWindow({0.0}, {0.5})};
  const PhaseBox right{kMarks, PositionWindow({0.5}, {1.0})};
  const auto one = factorial_moment_mc({left}, sigma, {3, 20000, 1});
  EXPECT_NEAR(*one.closed_form, 0.5 * oracle::kMass, 1e-10);
  expect_consistent(one);
  const auto two = factorial_moment_mc({left, right}, sigma, {4, 20000, 1});
  EXPECT_NEAR(*two.closed_form, 0.25 * oracle::kMass * oracle::kMass, 1e-10);
  expect_consistent(two);
}

TEST(FactorialMoments, DisjointInMarksOnly) {
  const auto sigma = fixture::reference_sigma();
  const PhaseBox slow{MarkAnnulus(0.5, 1.0), kUnit};
  const PhaseBox fast{MarkAnnulus(1.0, 2.0), kUnit};
  const auto r = factorial_moment_mc({slow, fast}, sigma, {6, 20000, 1});
  EXPECT_NEAR(*r.closed_form, oracle::mass_d1_a1_b2(0.5, 1.0) * oracle::mass_d1_a1_b2(1.0, 2.0), 1e-10);
  expect_consistent(r);
}

TEST(FactorialMoments, OverlappingBoxesRejected) {
  const auto sigma = fixture::reference_sigma();
  const PhaseBox a{kMarks, PositionWindow({0.0}, {0.6})};
  const PhaseBox b{kMarks, PositionWindow({0.4}, {1.0})};
  try {
    factorial_moment_mc({a, b}, sigma, {1, 10, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlappingBoxes);
  }
}

TEST(KDuality, SingletonAndCoherent) {
  const auto sigma = fixture::reference_sigma();
  LpSeriesOptions series;
  series.mc_per_order = 2048;
  const ConfigurationFunction single{[](const FiniteConfiguration& g) { return g.size() == 1 ? 1.0 : 0.0; },
                                     FunctionClass::BoundedBoundedSupport};
  const auto r1 = k_duality_check(single, sigma, {21, 20000, 1}, series);
  EXPECT_NEAR(*r1.closed_form, oracle::kMass, 1e-9);
  expect_consistent(r1);

  series.bound = {1.0, 1.2};
  const auto r2 = k_duality_check(coherent(0.2 * indicator(kMarks, kUnit)), sigma, {22, 20000, 1}, series);
  EXPECT_NEAR(*r2.closed_form, oracle::kBogoliubov, 1e-9);
  expect_consistent(r2);
}

TEST(CorrelationDensity, TiltedPoisson) {
  const auto sigma = fixture::reference_sigma();
  const auto gamma0 = FiniteConfiguration::from_points({{{1.0}, {0.25}}, {{-1.5}, {0.75}}});
  const auto r = correlation_density_mc(gamma0, TiltDensity(0.2 * indicator(kMarks, kUnit), sigma), sigma,
                                        {17, 20000, 1});
  EXPECT_NEAR(*r.closed_form, 1.44, 1e-12);
  expect_consistent(r);
}

TEST(CorrelationDensity, ZeroTiltIsExactlyOne) {
  const auto sigma = fixture::reference_sigma();
  const auto gamma0 = FiniteConfiguration::from_points({{{1.0}, {0.25}}, {{-1.5}, {0.75}}});
  const auto r = correlation_density_mc(gamma0, TiltDensity(constant(0.0), sigma), sigma, {1, 5000, 1});
  EXPECT_EQ(r.estimate, 1.0);
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_EQ(*r.closed_form, 1.0);
}

TEST(CorrelationDensity, DensityNormalizes) {
  // E_pi[D] = 1.
  const auto sigma = fixture::reference_sigma();
  const TiltDensity tilt(0.3 * radial_mark(1), sigma);
  const PoissonSampler sampler(sigma);
  const auto stats = poisson_mean(sampler, {2, 20000, 1}, [&](const FiniteConfiguration& g) { return tilt.density(g); });
  EXPECT_NEAR(stats.mean(), 1.0, 4.0 * stats.std_error());
  EXPECT_THROW(correlation_density_mc(FiniteConfiguration::from_points({{{3.0}, {0.5}}}), tilt, sigma, {1, 10, 1}),
               Error);
}

TEST(Kappa, SymmetricAnnulusVanishes) {
  const auto sigma = fixture::reference_sigma();
  const auto t = kappa_position_mc(1, {1.0}, 5, sigma, {41, 20000, 1});
  ASSERT_EQ(t.estimate.size(), 5U);
  for (std::size_t i = 0; i < t.cells(); ++i) {
    EXPECT_EQ(t.closed_form[i], 0.0);
    EXPECT_LE(std::abs(t.z_score(i)), 4.0);
  }
}

TEST(Kappa, OneSidedMatchesFirstMoment) {
  const auto sigma = fixture::reference_sigma(true);
  const auto t = kappa_position_mc(1, {1.0}, 5, sigma, {42, 20000, 1});
  for (std::size_t i = 0; i < t.cells(); ++i) {
    EXPECT_NEAR(t.closed_form[i], 0.5 * oracle::kCampbell, 1e-10);
    EXPECT_LE(std::abs(t.z_score(i)), 4.0);
  }
}

TEST(Kappa, SecondOrderIsSymmetric) {
  const auto sigma = fixture::reference_sigma(true);
  const auto t = kappa_position_mc(2, {1.0}, 4, sigma, {43, 20000, 3});
  ASSERT_EQ(t.estimate.size(), 16U);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      EXPECT_EQ(t.estimate[a * 4 + b], t.estimate[b * 4 + a]);
      EXPECT_LE(std::abs(t.z_score(a * 4 + b)), 4.5);
    }
  }
  EXPECT_NEAR(t.closed_form[0], 0.25 * oracle::kCampbell * oracle::kCampbell, 1e-10);
  EXPECT_THROW(kappa_position_mc(3, {1.0}, 4, sigma, {1, 10, 1}), Error);
}
