#include "circspec/solver.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace circspec;
using circspec::testing::random_trig;
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

TrigPolynomial sin2pi(double amp = 1.0, int k = 1) {
  return TrigPolynomial::scalar({{kTwoPi * k, amp / (2.0 * kI)}, {-kTwoPi * k, -amp / (2.0 * kI)}});
}

PeriodicSystem scalar_decay() { return PeriodicSystem::constant(CMatrix::Constant(1, 1, -1.0)); }

// A(t) = A0 + A1 sin(2 pi t) with a stable A0.
PeriodicSystem planar_system() {
  const double a0[2][2] = {{-1.0, 0.6}, {-0.4, -0.8}};
  const double a1[2][2] = {{0.5, -0.3}, {0.2, 0.7}};
  std::vector<MatrixEntry> entries;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      entries.push_back({i, j, TrigPolynomial::scalar({{0.0, a0[i][j]}}) + sin2pi(a1[i][j])});
  return PeriodicSystem::general(2, entries);
}

TrigPolynomial planar_forcing() {
  return TrigPolynomial(2, {{0.0, vec({1.0, -0.5})}, {std::numbers::sqrt2, vec({cplx(0.3, 0.2), 0.7})},
                            {-2.5, vec({0.1, cplx(0.0, 0.4)})}});
}

// Classical RK4 for x' = A(t) x + f(t), fixed step.
CVector rk4_forward(const PeriodicSystem& sys, const TrigPolynomial& f, CVector x, double t0, double t1,
                    double step) {
  const auto n = static_cast<long>(std::llround((t1 - t0) / step));
  const double h = (t1 - t0) / static_cast<double>(n);
  auto rhs = [&](double t, const CVector& y) -> CVector { return sys.A(t) * y + f(t); };
  for (long i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const CVector k1 = rhs(t, x);
    const CVector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const CVector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const CVector k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

TEST(ApplyG, IdentityFlowConstant) {
  const auto sys = PeriodicSystem::constant(CMatrix::Zero(2, 2));
  const auto g = TrigPolynomial::constant(vec({2.0, -1.0}));
  EXPECT_LT((apply_G(sys, g, 1.0, 0.3) - vec({2.0, -1.0})).norm(), 1e-13);
}

TEST(ApplyG, ScalarDecay) {
  const auto g = TrigPolynomial::constant(vec({1.0}));
  EXPECT_NEAR(std::abs(apply_G(scalar_decay(), g, 1.0, 4.2)(0) - (1.0 - std::exp(-1.0))), 0.0, 1e-12);
  // same value from the integrated evolution
  const auto v = apply_G(scalar_decay(), g, 1.0, 4.2, {}, PropagationMode::integrate);
  EXPECT_NEAR(std::abs(v(0) - (1.0 - std::exp(-1.0))), 0.0, 1e-9);
}

TEST(ApplyG, GridFunctionWindow) {
  const auto f = TrigPolynomial::single(0.9, vec({1.0}));
  const auto g = GridFunction::sample(f, 0.0, 0.01, 501);
  const CVector a = apply_G(scalar_decay(), g, 1.0, 3.0);
  const CVector b = apply_G(scalar_decay(), f, 1.0, 3.0);
  EXPECT_LT((a - b).norm(), 1e-8);
  EXPECT_EQ(code_of([&] { apply_G(scalar_decay(), g, 1.0, 0.5); }), ErrorCode::WindowOutOfDomain);
}

TEST(ApplyG, CommutesWithTranslation) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> ut(-3.0, 3.0), uh(0.1, 2.0);
  const auto sys = planar_system();
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_trig(rng, 2, 3, 5.0);
    const double t = ut(rng), h = uh(rng);
    const CVector lhs = apply_G(sys, translate(g, 1.0), h, t);
    const CVector rhs = apply_G(sys, g, h, t + 1.0);
    EXPECT_LT((lhs - rhs).norm(), 1e-8);
  }
}

TEST(ApplyTfh, ZeroStepIsIdentity) {
  const auto g = TrigPolynomial::single(1.7, vec({1.0, 2.0}));
  const auto f = TrigPolynomial::constant(vec({5.0, 5.0}));
  const CVector v = apply_Tfh(planar_system(), f, g, 0.0, 0.37);
  EXPECT_TRUE(v == g(0.37));
}

TEST(ApplyTfh, IdentityFlowConstantForcing) {
  const auto sys = PeriodicSystem::constant(CMatrix::Zero(1, 1));
  const auto f = TrigPolynomial::constant(vec({3.0}));
  for (double t : {-1.0, 0.0, 2.5})
    EXPECT_NEAR(std::abs(apply_Tfh(sys, f, TrigPolynomial::zero(1), 1.0, t)(0) - 3.0), 0.0, 1e-13);
}

TEST(ApplyTfh, SemigroupLaw) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> ut(-3.0, 3.0), uh(0.05, 1.0);
  const auto sys = planar_system();
  const auto f = planar_forcing();
  for (int trial = 0; trial < 6; ++trial) {
    const auto g = random_trig(rng, 2, 2, 4.0);
    double h = uh(rng), k = uh(rng);
    if (trial == 0) h = 0.4, k = 0.6;
    const double t = ut(rng);
    const FunctionOf inner{2, [&](double s) { return apply_Tfh(sys, f, g, k, s); }};
    const CVector lhs = apply_Tfh(sys, f, g, h + k, t);
    const CVector rhs = apply_Tfh(sys, f, inner, h, t);
    EXPECT_LT((lhs - rhs).norm(), 1e-7);
  }
}

TEST(SolveLinear, ScalarModeFormula) {
  for (double w : {0.0, 1.0, std::numbers::sqrt2, -3.7}) {
    const auto f = TrigPolynomial::single(w, vec({1.0}));
    const auto u = solve_linear(scalar_decay(), f);
    const cplx expect_p = 1.0 / cplx(1.0, w);
    for (const auto& s : u.envelopes()[0].samples()) EXPECT_LT(std::abs(s(0) - expect_p), 1e-8);
    for (double t : {-4.1, 0.0, 0.33, 10.9})
      EXPECT_LT(std::abs(u(t)(0) - std::polar(1.0, w * t) * expect_p), 1e-8);
    EXPECT_LT(u.report.residual, 1e-6);
    EXPECT_TRUE(u.report.certified);
    EXPECT_EQ(u.report.iterations, 0);
  }
}

TEST(SolveLinear, Equilibrium) {
  const auto u = solve_linear(scalar_decay(), TrigPolynomial::constant(vec({1.0})));
  for (double t : {0.0, 0.5, 7.25}) EXPECT_NEAR(std::abs(u(t)(0) - 1.0), 0.0, 1e-10);
}

TEST(SolveLinear, ResonanceIsRejected) {
  const auto sys = PeriodicSystem::constant(CMatrix::Zero(1, 1));
  EXPECT_EQ(code_of([&] { solve_linear(sys, TrigPolynomial::constant(vec({1.0}))); }), ErrorCode::Resonance);
  // multiplier e^{i 0.5} resonates with omega = 0.5 + 2 pi
  const auto rot = PeriodicSystem::constant(CMatrix::Constant(1, 1, cplx(0.0, 0.5)));
  EXPECT_EQ(code_of([&] { solve_linear(rot, TrigPolynomial::single(0.5 + kTwoPi, vec({1.0}))); }),
            ErrorCode::Resonance);
}

TEST(SolveLinear, NearResonanceIsFlagged) {
  const auto sys = PeriodicSystem::constant(CMatrix::Constant(1, 1, std::log(1.0 - 5e-4)));
  const auto u = solve_linear(sys, TrigPolynomial::constant(vec({1e-3})));
  EXPECT_TRUE(u.report.near_resonance);
  EXPECT_NEAR(u.report.gap, 5e-4, 1e-12);
  const auto far = solve_linear(scalar_decay(), TrigPolynomial::constant(vec({1.0})));
  EXPECT_FALSE(far.report.near_resonance);
}

TEST(SolveLinear, PlanarMatchesLongHorizonIntegration) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  const auto u = solve_linear(sys, f);
  EXPECT_LT(u.report.residual, 1e-6);
  // forward integration from rest far in the past forgets its initial value
  const CVector x = rk4_forward(sys, f, CVector::Zero(2), -40.0, 0.0, 1e-3);
  EXPECT_LT((x - u(0.0)).norm(), 1e-8);
  EXPECT_EQ(u.report.mode_conds.size(), 3u);
}

TEST(SolveLinear, HeatSystem) {
  const auto sys = PeriodicSystem::heat(4, sin2pi(0.5));
  const auto f = TrigPolynomial(4, {{0.0, vec({1.0, 0.0, 0.5, 0.0})}, {1.0, vec({0.0, 1.0, 0.0, 0.2})}});
  const auto u = solve_linear(sys, f);
  EXPECT_LT(u.report.residual, 1e-6);
  SolverSettings integ;
  integ.mode = PropagationMode::integrate;
  const auto v = solve_linear(sys, f, integ);
  for (double t : {0.0, 0.3, 2.7}) EXPECT_LT((u(t) - v(t)).norm(), 1e-8);
}

TEST(SolveLinear, Linearity) {
  std::mt19937_64 rng(53);
  const auto sys = planar_system();
  const auto f1 = random_trig(rng, 2, 2, 4.0), f2 = random_trig(rng, 2, 3, 4.0);
  const cplx a(0.7, -0.2), b(-1.3, 0.4);
  const auto u1 = solve_linear(sys, f1), u2 = solve_linear(sys, f2), u = solve_linear(sys, a * f1 + b * f2);
  for (double t : {-2.0, 0.1, 0.5, 3.3}) EXPECT_LT((u(t) - a * u1(t) - b * u2(t)).norm(), 1e-8);
}

TEST(SolveLinear, DiscreteUniquenessUnderEnvelopeRefinement) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  const auto u64 = solve_linear(sys, f, std::size_t{64});
  const auto u128 = solve_linear(sys, f, std::size_t{128});
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> ut(-10.0, 10.0);
  for (int i = 0; i < 30; ++i) {
    const double t = ut(rng);
    EXPECT_LT((u64(t) - u128(t)).norm(), 1e-5);
  }
}

TEST(SolveLinear, ModeKernelsAreQuasiPeriodic) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> ut(-3.0, 3.0);
  for (const auto& m : f.modes()) {
    const auto single = TrigPolynomial::single(m.omega, m.coeff);
    for (int i = 0; i < 4; ++i) {
      const double t = ut(rng);
      const CVector b0 = apply_G(sys, single, 1.0, t);
      const CVector b1 = apply_G(sys, single, 1.0, t + 1.0);
      EXPECT_LT((b1 - std::polar(1.0, m.omega) * b0).norm(), 1e-8);
      const CVector q0 = std::polar(1.0, -m.omega * t) * b0;
      const CVector q1 = std::polar(1.0, -m.omega * (t + 1.0)) * b1;
      EXPECT_LT((q1 - q0).norm(), 1e-8);
    }
  }
}

TEST(Residual, DetectsEnvelopeDefect) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  auto u = solve_linear(sys, f);
  EXPECT_LT(residual(sys, u, f), 1e-6);
  auto& env = u.envelopes()[1];
  CVector s = env.samples()[17];
  s(0) += 0.1;
  env.set_sample(17, s);
  EXPECT_GT(residual(sys, u, f), 0.01);
}

TEST(Residual, ZeroIsExact) {
  const MildSolution zero(2, {});
  EXPECT_EQ(residual(planar_system(), zero, TrigPolynomial::zero(2)), 0.0);
}

TEST(Residual, DeterministicForSeed) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  const auto u = solve_linear(sys, f);
  EXPECT_EQ(residual(sys, u, f, 20, 99), residual(sys, u, f, 20, 99));
}

TEST(SpectralInclusion, DriftedHeatMode) {
  const auto sys = PeriodicSystem::heat(1, sin2pi());
  const auto f = TrigPolynomial::single(std::numbers::sqrt2, vec({1.0}));
  const auto u = solve_linear(sys, f);
  const auto rep = verify_spectral_inclusion(u, f);
  EXPECT_TRUE(rep.ok);
  ASSERT_EQ(rep.detected.size(), 1u);
  EXPECT_LT(circular_distance(rep.detected.angles()[0], std::numbers::sqrt2), rep.detected.angular_resolution());
  EXPECT_GE(rep.window, 40.0);
}

TEST(SpectralInclusion, ZeroSolution) {
  const MildSolution zero(1, {});
  const auto rep = verify_spectral_inclusion(zero, TrigPolynomial::zero(1));
  EXPECT_TRUE(rep.detected.empty());
  EXPECT_TRUE(rep.ok);
}

TEST(SpectralInclusion, InjectedModeIsReported) {
  const auto f = TrigPolynomial::single(std::numbers::sqrt2, vec({1.0}));
  auto u = solve_linear(scalar_decay(), f);
  u.envelopes().push_back(Envelope::constant(1.0, vec({0.5}), u.m_env()));
  const auto rep = verify_spectral_inclusion(u, f);
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.excess.size(), 1u);
  EXPECT_LT(circular_distance(rep.excess[0], 1.0), rep.detected.angular_resolution());
}

TEST(IterateT1, SolutionIsFixed) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  const auto u = solve_linear(sys, f);
  const auto g0 = GridFunction::sample(u, -2.0, 1.0 / 16.0, 5 * 16 + 1);
  const auto g1 = iterate_T1(sys, f, g0, 1);
  EXPECT_NEAR(g1.t0(), -1.0, 1e-12);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_LT((g1.sample(i) - u(g1.time(i))).norm(), 1e-6);
}

TEST(IterateT1, ContractsTowardEquilibrium) {
  const auto f = TrigPolynomial::constant(vec({1.0}));
  const auto g0 = GridFunction::sample(TrigPolynomial::zero(1), 0.0, 0.25, 4 * 8 + 1);
  const auto g5 = iterate_T1(scalar_decay(), f, g0, 5);
  for (std::size_t i = 0; i < g5.size(); ++i) {
    EXPECT_LE(std::abs(g5.sample(i)(0) - 1.0), std::exp(-5.0) + 1e-12);
    EXPECT_NEAR(std::abs(g5.sample(i)(0) - 1.0), std::exp(-5.0), 1e-10);
  }
  const auto same = iterate_T1(scalar_decay(), f, g0, 0);
  EXPECT_EQ(same.size(), g0.size());
  EXPECT_TRUE(same.sample(3) == g0.sample(3));
  EXPECT_EQ(code_of([&] { iterate_T1(scalar_decay(), f, g0, 7); }), ErrorCode::WindowTooShort);
}

TEST(IterateT1, GenericStartIsNotFixed) {
  const auto f = TrigPolynomial::constant(vec({1.0}));
  const auto g0 = GridFunction::sample(TrigPolynomial::single(0.3, vec({2.0})), 0.0, 0.25, 4 * 4 + 1);
  const auto g1 = iterate_T1(scalar_decay(), f, g0, 1);
  const auto j = g0.index_of(g1.time(0));
  ASSERT_TRUE(j.has_value());
  EXPECT_GT((g1.sample(0) - g0.sample(*j)).norm(), 0.1);
}

TEST(ProjectForcing, RecoversTrigForcing) {
  const auto f = TrigPolynomial(1, {{1.0, vec({1.0})}, {-2.5, vec({cplx(0.0, 0.5)})}});
  const auto g = GridFunction::sample(f, -60.0, 0.05, 2401);
  const auto proj = project_forcing(g);
  ASSERT_EQ(proj.f.size(), 2u);
  EXPECT_LT(proj.defect, 1e-6);
  const auto u = solve_linear(scalar_decay(), g);
  const auto v = solve_linear(scalar_decay(), f);
  for (double t : {0.0, 1.5}) EXPECT_LT((u(t) - v(t)).norm(), 1e-6);
  EXPECT_LT(u.report.projection_defect, 1e-6);
}

TEST(MildSolution, TrigExpansionIsExact) {
  const auto sys = planar_system();
  const auto f = planar_forcing();
  const auto u = solve_linear(sys, f);
  const auto p = u.to_trig_polynomial();
  for (double t : {-3.3, 0.0, 0.71, 12.5}) EXPECT_LT((p(t) - u(t)).norm(), 1e-12);
}

}  // namespace
