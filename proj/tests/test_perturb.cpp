#include "circspec/perturb.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace circspec;
using circspec::testing::vec;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

TrigPolynomial constant_scalar(cplx c) { return TrigPolynomial::scalar({{0.0, c}}); }

TrigPolynomial sin2pi(double amp = 1.0) {
  return TrigPolynomial::scalar({{kTwoPi, amp / (2.0 * kI)}, {-kTwoPi, -amp / (2.0 * kI)}});
}

NemytskyMap square_map(int dim = 1) { return NemytskyMap::polynomial(dim, {{2, constant_scalar(1.0)}}); }

PeriodicSystem scalar_decay() { return PeriodicSystem::constant(CMatrix::Constant(1, 1, -1.0)); }

// a(t) = -1 + 0.3 cos(2 pi t), b(t) = 1 + 0.5 cos(2 pi t)
PeriodicSystem heat4() {
  const auto cos2pi = TrigPolynomial::scalar({{kTwoPi, 0.5}, {-kTwoPi, 0.5}});
  return PeriodicSystem::heat(4, constant_scalar(-1.0) + cplx(0.3) * cos2pi, constant_scalar(1.0) + cplx(0.5) * cos2pi);
}

TrigPolynomial heat_forcing() {
  return TrigPolynomial(4, {{0.0, vec({1.0, 0.0, 0.3, 0.0})}, {std::sqrt(2.0), vec({0.0, 0.5, 0.0, 0.1})}});
}

// RK4 for u' = -u + eps u^2 + c from u(t0) = 0 up to t = 0.
double logistic_oracle(double eps, double c, double t0 = -50.0, int steps = 200000) {
  const double h = -t0 / steps;
  auto rhs = [&](double u) { return -u + eps * u * u + c; };
  double u = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = rhs(u), k2 = rhs(u + 0.5 * h * k1), k3 = rhs(u + 0.5 * h * k2), k4 = rhs(u + h * k3);
    u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

}  // namespace

TEST(FrequencyModule, ContainsCombinations) {
  const auto mod = FrequencyModule::generate({1.0, std::sqrt(2.0)}, 3, 3);
  EXPECT_TRUE(mod.contains(0.0));
  EXPECT_TRUE(mod.contains(2.0 - std::sqrt(2.0)));
  EXPECT_TRUE(mod.contains(3.0 + kTwoPi * 3));
  EXPECT_TRUE(mod.contains(-2.0 * std::sqrt(2.0) + 1.0 - kTwoPi));
  EXPECT_FALSE(mod.contains(4.0));
  EXPECT_FALSE(mod.contains(kTwoPi * 4));
  EXPECT_TRUE(std::is_sorted(mod.members().begin(), mod.members().end()));
  EXPECT_EQ(mod.base().size(), 2u);
}

TEST(FrequencyModule, Overflow) {
  EXPECT_EQ(code_of([] { FrequencyModule::generate({1.0, 1.3, 1.7, 2.9}, 3, 3, 100); }), ErrorCode::ModuleOverflow);
}

TEST(FrequencyModule, BaseIgnoresIntegerMultiplesAndSigns) {
  const auto mod = FrequencyModule::generate({0.0, kTwoPi, 1.5, -1.5});
  EXPECT_EQ(mod.base().size(), 1u);
  EXPECT_EQ(mod.size(), 7u * 7u);
}

TEST(NemytskyApply, ConstantSquares) {
  const auto r = nemytsky_apply(square_map(), constant_scalar(1.7), 3);
  ASSERT_EQ(r.value.size(), 1u);
  EXPECT_NEAR(std::abs(r.value.modes()[0].coeff(0) - 1.7 * 1.7), 0.0, 1e-14);
  EXPECT_EQ(r.dropped_mass, 0.0);
}

TEST(NemytskyApply, SingleCombinationFrequency) {
  const auto r = nemytsky_apply(square_map(), TrigPolynomial::single(1.0, vec({1.0})), 3);
  ASSERT_EQ(r.value.size(), 1u);
  EXPECT_NEAR(r.value.modes()[0].omega, 2.0, 1e-14);
  EXPECT_NEAR(std::abs(r.value.modes()[0].coeff(0) - 1.0), 0.0, 1e-14);
}

TEST(NemytskyApply, ProductToSum) {
  const auto H = NemytskyMap::polynomial(1, {{1, sin2pi()}});
  const double w = std::sqrt(2.0);
  const auto r = nemytsky_apply(H, TrigPolynomial::single(w, vec({1.0})), 3);
  ASSERT_EQ(r.value.size(), 2u);
  for (const auto& m : r.value.modes()) {
    const double sign = m.omega > w ? 1.0 : -1.0;
    EXPECT_NEAR(std::fabs(m.omega - w), kTwoPi, 1e-12);
    EXPECT_NEAR(std::abs(m.coeff(0) - sign / (2.0 * kI)), 0.0, 1e-14);
  }
}

TEST(NemytskyApply, MatchesPointwiseEvaluation) {
  std::mt19937_64 rng(7);
  const TrigPolynomial g(2, {{0.4, circspec::testing::random_vector(rng, 2, 0.3)},
                             {-1.1, circspec::testing::random_vector(rng, 2, 0.3)}});
  const auto H = NemytskyMap::polynomial(
      2, {{2, TrigPolynomial(2, {{0.0, vec({1.0, -0.5})}, {kTwoPi, vec({0.2, 0.1})}})}, {3, sin2pi(0.7)}});
  const auto r = nemytsky_apply(H, g, 6, 3);
  EXPECT_EQ(r.dropped_mass, 0.0);
  for (double t : {-3.2, 0.0, 0.37, 11.9}) EXPECT_LT((r.value(t) - H.eval(t, g(t))).norm(), 1e-13);
}

TEST(NemytskyApply, TruncationIsBoundedByDroppedMass) {
  const TrigPolynomial g = TrigPolynomial::scalar({{1.0, 0.6}, {std::sqrt(3.0), -0.4}});
  const auto H = NemytskyMap::polynomial(1, {{3, constant_scalar(1.0)}});
  const auto r = nemytsky_apply(H, g, 2);
  EXPECT_GT(r.dropped_mass, 0.0);
  for (double t = -5.0; t < 5.0; t += 0.173)
    EXPECT_LE((r.value(t) - H.eval(t, g(t))).norm(), r.dropped_mass * (1.0 + 1e-12) + 1e-14);
}

TEST(NemytskyApply, HeatCollocationMatchesPointwise) {
  const auto sys = heat4();
  const auto H = NemytskyMap::heat_quadratic(sys);
  const TrigPolynomial g(4, {{0.0, vec({0.3, 0.1, 0.0, -0.2})}, {std::sqrt(2.0), vec({0.0, 0.2, 0.1, 0.0})}});
  const auto r = nemytsky_apply(H, g, 3);
  EXPECT_EQ(r.dropped_mass, 0.0);
  for (double t : {0.0, 0.25, 1.7, -4.4}) EXPECT_LT((r.value(t) - H.eval(t, g(t))).norm(), 1e-13);
}

TEST(NemytskyMap, HeatCollocationIsGalerkinProduct) {
  // w = sin x: (2/pi) int_0^pi sin^2 x sin(n x) dx is 8/(3 pi) for n = 1,
  // -8/(15 pi) for n = 3 and 0 for even n; collocation is close, not exact
  const auto H = NemytskyMap::heat_quadratic(PeriodicSystem::heat(4, constant_scalar(-1.0), constant_scalar(1.0)));
  const CVector out = H.eval(0.0, vec({1.0, 0.0, 0.0, 0.0}));
  const double pi = std::numbers::pi;
  EXPECT_NEAR(out(0).real(), 8.0 / (3.0 * pi), 1e-2);
  EXPECT_NEAR(out(1).real(), 0.0, 1e-12);
  EXPECT_NEAR(out(2).real(), -8.0 / (15.0 * pi), 1e-2);
  EXPECT_NEAR(out(3).real(), 0.0, 1e-12);
}

TEST(NemytskyMap, VanishesAtZeroAndIsPeriodic) {
  const auto H = NemytskyMap::polynomial(2, {{1, sin2pi()}, {2, constant_scalar(0.5)}});
  std::mt19937_64 rng(3);
  for (double t : {0.0, 0.3, -2.7}) {
    EXPECT_EQ(H.eval(t, CVector::Zero(2)).norm(), 0.0);
    const CVector x = circspec::testing::random_vector(rng, 2);
    EXPECT_LT((H.eval(t + 1.0, x) - H.eval(t, x)).norm(), 1e-13);
  }
  EXPECT_EQ(code_of([] { NemytskyMap::polynomial(1, {{0, constant_scalar(1.0)}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { NemytskyMap::polynomial(1, {{2, TrigPolynomial::single(1.0, vec({1.0}))}}); }),
            ErrorCode::InvalidArgument);
}

TEST(NemytskyMap, LipschitzModulusBoundsDifferences) {
  const auto H = NemytskyMap::polynomial(2, {{1, sin2pi(0.5)}, {2, constant_scalar(1.0)}, {3, constant_scalar(-0.2)}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double prev = H.lip(0.0);
  EXPECT_GE(prev, 0.0);
  for (double r = 0.1; r < 4.0; r += 0.1) {
    EXPECT_GE(H.lip(r), prev);
    prev = H.lip(r);
  }
  for (int k = 0; k < 200; ++k) {
    const double r = 2.0 * ut(rng);
    CVector x = circspec::testing::random_vector(rng, 2), y = circspec::testing::random_vector(rng, 2);
    x *= r / std::max(x.norm(), r);
    y *= r / std::max(y.norm(), r);
    const double t = ut(rng);
    EXPECT_LE((H.eval(t, x) - H.eval(t, y)).norm(), H.lip(r) * (x - y).norm() + 1e-12);
  }
}

TEST(NemytskyMap, HeatLipschitzModulusBoundsDifferences) {
  const auto H = NemytskyMap::heat_quadratic(heat4());
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const double r = 1.5;
    CVector x = circspec::testing::random_vector(rng, 4), y = circspec::testing::random_vector(rng, 4);
    x *= r / std::max(x.norm(), r);
    y *= r / std::max(y.norm(), r);
    const double t = 0.1 * k;
    EXPECT_LE((H.eval(t, x) - H.eval(t, y)).norm(), H.lip(r) * (x - y).norm() + 1e-12);
  }
}

TEST(NemytskyMap, LipOverride) {
  auto H = square_map();
  H.set_lip_override({0.5, 3.0});
  EXPECT_DOUBLE_EQ(H.lip(2.0), 6.5);
  EXPECT_EQ(code_of([&] { H.set_lip_override({-1.0}); }), ErrorCode::InvalidArgument);
}

TEST(CutoffApply, InsideBallIsIdentical) {
  const auto g = TrigPolynomial::scalar({{0.0, 0.25}, {1.0, 0.25}});
  const auto H = square_map();
  const auto a = cutoff_apply(H, g, 1.0);
  const auto b = nemytsky_apply(H, g, 3);
  EXPECT_LT((a.value - b.value).coeff_norm_sum(), 1e-15);
}

TEST(CutoffApply, RadialRescale) {
  const auto r = cutoff_apply(square_map(), constant_scalar(2.0 * 0.8), 0.8);
  ASSERT_EQ(r.value.size(), 1u);
  EXPECT_NEAR(std::abs(r.value.modes()[0].coeff(0) - 0.64), 0.0, 1e-14);
}

TEST(CutoffApply, ZeroGivesZero) {
  const auto r = cutoff_apply(square_map(), TrigPolynomial::zero(1), 1.0);
  EXPECT_EQ(r.value.coeff_norm_sum(), 0.0);
}

TEST(EstimateRho, ScalarDecay) {
  EXPECT_NEAR(estimate_rho(scalar_decay(), {0.0}).rho, 1.0, 1e-9);
  EXPECT_NEAR(estimate_rho(scalar_decay(), {1.0}).rho, 1.0 / std::sqrt(2.0), 1e-9);
  const auto both = estimate_rho(scalar_decay(), {0.0, 1.0});
  EXPECT_NEAR(both.rho, 1.0, 1e-9);
  EXPECT_EQ(both.probe_freqs.size(), 2u);
}

TEST(EstimateRho, Resonance) {
  const auto sys = PeriodicSystem::constant(CMatrix::Constant(1, 1, cplx(0.0, 0.5)));
  EXPECT_EQ(code_of([&] { estimate_rho(sys, {0.5}); }), ErrorCode::Resonance);
}

TEST(EstimateRho, LowerBoundsTheSolutionOperator) {
  // every single-mode solve has gain at most rho
  const auto sys = scalar_decay();
  const auto est = estimate_rho(sys, {0.0, 0.7, -2.0});
  for (double w : {0.0, 0.7, -2.0}) {
    const auto u = solve_linear(sys, TrigPolynomial::single(w, vec({1.0})));
    EXPECT_LE(window_norm(u), est.rho * (1.0 + 1e-9));
  }
}

TEST(EpsilonThreshold, Examples) {
  EXPECT_DOUBLE_EQ(epsilon_threshold(1.0, [](double r) { return r; }, 1.0), 0.125);
  EXPECT_TRUE(std::isinf(epsilon_threshold(1.0, [](double) { return 0.0; }, 1.0)));
  EXPECT_DOUBLE_EQ(epsilon_threshold(2.0, [](double) { return 1.0; }, 0.5), 0.125);
  EXPECT_EQ(code_of([] { epsilon_threshold(0.0, [](double r) { return r; }, 1.0); }), ErrorCode::InvalidArgument);
}

TEST(SolvePerturbed, ZeroEpsilonIsLinearSolve) {
  const auto f = constant_scalar(0.5) + sin2pi(0.2);
  const auto res = solve_perturbed(scalar_decay(), f, square_map(), 0.0);
  EXPECT_EQ(res.report.iterations, 1);
  const auto lin = solve_linear(scalar_decay(), f);
  for (double t : {0.0, 0.3, 5.1}) EXPECT_EQ((res.w(t) - lin(t)).norm(), 0.0);
}

TEST(SolvePerturbed, LogisticMatchesIntegration) {
  const auto res = solve_perturbed(scalar_decay(), constant_scalar(0.5), square_map(), 0.05);
  const double exact = (1.0 - std::sqrt(1.0 - 4.0 * 0.05 * 0.5)) / (2.0 * 0.05);
  EXPECT_NEAR(std::abs(res.w(0.0)(0) - exact), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(res.w(0.0)(0) - logistic_oracle(0.05, 0.5)), 0.0, 1e-5);
  const auto& rep = res.report;
  EXPECT_NEAR(rep.rho, 1.0, 1e-9);
  EXPECT_NEAR(rep.epsilon_0, 0.125, 1e-9);
  EXPECT_TRUE(rep.bound_ok);
  EXPECT_FALSE(rep.cutoff_active);
  EXPECT_LT(rep.contraction_factor, 1.0);
  EXPECT_LE(rep.final_norm, 2.0 * rep.rho * rep.M * (1.0 + 1e-6));
  EXPECT_LE(rep.final_norm, rep.inverse_bound);
  EXPECT_TRUE(rep.certified);
}

TEST(SolvePerturbed, ContractionMatchesTheory) {
  const auto res = solve_perturbed(scalar_decay(), constant_scalar(0.5) + sin2pi(0.3), square_map(), 0.05);
  const auto& rep = res.report;
  EXPECT_LE(rep.contraction_factor, rep.rho * rep.epsilon * 2.0 * rep.lip_at_bound + 0.05);
}

TEST(SolvePerturbed, RestartFromPerturbedSeed) {
  const auto f = constant_scalar(0.5) + sin2pi(0.3);
  const auto base = solve_perturbed(scalar_decay(), f, square_map(), 0.05);
  PerturbOptions opts;
  const double delta = 0.1 * base.report.rho * base.report.M;
  opts.initial_offset = TrigPolynomial::scalar({{0.0, 0.5 * delta}, {1.0, 0.5 * delta}});
  const auto moved = solve_perturbed(scalar_decay(), f, square_map(), 0.05, opts);
  double diff = 0.0;
  for (double t = 0.0; t < 5.0; t += 1.0 / 64.0) diff = std::max(diff, (moved.w(t) - base.w(t)).norm());
  EXPECT_LT(diff, 10.0 * opts.picard_tol);
}

TEST(SolvePerturbed, SmallEpsilonContinuity) {
  const auto f = constant_scalar(0.5) + sin2pi(0.3);
  const auto w0 = solve_perturbed(scalar_decay(), f, square_map(), 0.0);
  const double eps0 = w0.report.epsilon_0;
  double prev = 0.0;
  for (double k : {1e-3, 1e-2}) {
    const auto w = solve_perturbed(scalar_decay(), f, square_map(), k * eps0);
    double d = 0.0;
    for (double t = 0.0; t < 3.0; t += 1.0 / 64.0) d = std::max(d, (w.w(t) - w0.w(t)).norm());
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(SolvePerturbed, EpsilonTooLarge) {
  const auto sys = scalar_decay();
  const auto f = constant_scalar(0.5);
  EXPECT_EQ(code_of([&] { solve_perturbed(sys, f, square_map(), 10.0 * 0.125); }), ErrorCode::EpsilonTooLarge);
  PerturbOptions opts;
  opts.force = true;
  // forced past the threshold the iteration may still converge
  const auto res = solve_perturbed(sys, f, square_map(), 0.2, opts);
  EXPECT_GT(res.report.epsilon, res.report.epsilon_0);
}

TEST(SolvePerturbed, ForcedDivergenceIsReported) {
  // no real fixed point of w = 0.5 + 3 w^2; the cut-off map keeps it bounded
  // but the fixed point of the cut problem sits on the ball boundary
  PerturbOptions opts;
  opts.force = true;
  const auto code = code_of([&] { solve_perturbed(scalar_decay(), constant_scalar(0.5), square_map(), 3.0, opts); });
  EXPECT_TRUE(code == ErrorCode::IterationDiverged || code == ErrorCode::CutoffActiveAtFixedPoint);
}

TEST(SolvePerturbed, HeatQuadraticDemo) {
  const auto sys = heat4();
  const auto res = solve_perturbed(sys, heat_forcing(), NemytskyMap::heat_quadratic(sys), 1e-3);
  EXPECT_TRUE(res.report.certified);
  EXPECT_LT(res.report.residual, 1e-5);
  EXPECT_TRUE(res.report.bound_ok);
  EXPECT_LT(res.report.contraction_factor, 1.0);
}

TEST(SolvePerturbed, PlanarPolynomial) {
  std::vector<MatrixEntry> entries{{0, 0, constant_scalar(-1.0) + sin2pi(0.4)},
                                   {0, 1, constant_scalar(0.5)},
                                   {1, 0, constant_scalar(-0.5)},
                                   {1, 1, constant_scalar(-0.8)}};
  const auto sys = PeriodicSystem::general(2, entries);
  const TrigPolynomial f(2, {{0.0, vec({0.3, 0.0})}, {std::sqrt(2.0), vec({0.0, 0.2})}});
  const auto H = NemytskyMap::polynomial(2, {{2, TrigPolynomial(2, {{0.0, vec({1.0, 0.5})}})}});
  PerturbOptions opts;
  const auto res = solve_perturbed(sys, f, H, 0.02, opts);
  EXPECT_TRUE(res.report.certified);
  EXPECT_TRUE(res.report.bound_ok);
  EXPECT_LE(res.report.final_norm, res.report.inverse_bound);
}
