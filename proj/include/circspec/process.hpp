#pragma once

#include "circspec/error.hpp"
#include "circspec/ode.hpp"
#include "circspec/trig_polynomial.hpp"
#include "circspec/types.hpp"
#include "circspec/unit_circle_set.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace circspec {

enum class SystemKind { general, constant, heat };

inline const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::general: return "general";
    case SystemKind::constant: return "constant";
    case SystemKind::heat: return "heat";
  }
  return "general";
}

struct IntegSettings {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = 0.25;

  OdeSettings ode() const { return {rtol, atol, max_step, 1e-13}; }
};

/// One entry A_ij(t) of a general system, as a scalar trig polynomial.
struct MatrixEntry {
  int row;
  int col;
  TrigPolynomial value;
};

/// Galerkin sine truncation of w_t = drift w_xx + a(t) w on (0, pi) with
/// Dirichlet ends; b(t) is the coefficient of the optional quadratic term.
struct HeatParams {
  int n_modes = 1;
  TrigPolynomial a;
  TrigPolynomial b;
  double drift = 1.0;
};

/// Linear 1-periodic system x' = A(t) x. Systems given with period tau are
/// stored after the time change t = tau s, so internally the period is 1;
/// period() echoes the original tau.
class PeriodicSystem {
 public:
  static PeriodicSystem general(int dim, std::vector<MatrixEntry> entries, IntegSettings integ = {},
                                double period = 1.0) {
    check_period(period);
    require(dim > 0, ErrorCode::InvalidArgument, "system dim must be positive");
    PeriodicSystem sys(SystemKind::general, dim, integ, period);
    std::map<double, CMatrix> by_freq;
    for (auto& e : entries) {
      require(e.row >= 0 && e.row < dim && e.col >= 0 && e.col < dim, ErrorCode::InvalidArgument,
              "matrix entry index out of range");
      require(e.value.dim() == 1, ErrorCode::InvalidArgument, "matrix entries must be scalar");
      e.value = cplx(period) * e.value.time_scaled(period);
      for (const auto& m : e.value.modes()) {
        require(is_period_one_frequency(m.omega, 1e-9), ErrorCode::InvalidArgument,
                "entry frequency " + std::to_string(m.omega / period) + " is not a multiple of 2pi/period");
        const double w = kTwoPi * std::round(m.omega / kTwoPi);
        auto [it, fresh] = by_freq.try_emplace(w, CMatrix::Zero(dim, dim));
        it->second(e.row, e.col) += m.coeff(0);
      }
      sys.entries_.push_back(std::move(e));
    }
    for (auto& [w, c] : by_freq) sys.terms_.push_back({w, std::move(c)});
    return sys;
  }

  static PeriodicSystem constant(const CMatrix& a, IntegSettings integ = {}, double period = 1.0) {
    check_period(period);
    require(a.rows() == a.cols() && a.rows() > 0, ErrorCode::InvalidArgument, "constant matrix must be square");
    PeriodicSystem sys(SystemKind::constant, static_cast<int>(a.rows()), integ, period);
    sys.constant_ = period * a;
    sys.terms_.push_back({0.0, sys.constant_});
    return sys;
  }

  /// a and b are used through their real parts.
  static PeriodicSystem heat(int n_modes, const TrigPolynomial& a, const TrigPolynomial& b = TrigPolynomial::zero(1),
                             IntegSettings integ = {}, double period = 1.0) {
    check_period(period);
    require(n_modes > 0, ErrorCode::InvalidArgument, "n_modes must be positive");
    require(a.dim() == 1 && b.dim() == 1, ErrorCode::InvalidArgument, "heat coefficients must be scalar");
    PeriodicSystem sys(SystemKind::heat, n_modes, integ, period);
    sys.heat_.n_modes = n_modes;
    sys.heat_.drift = period;
    sys.heat_.a = cplx(period) * a.real_part().time_scaled(period);
    sys.heat_.b = cplx(period) * b.real_part().time_scaled(period);
    for (const auto* p : {&sys.heat_.a, &sys.heat_.b})
      for (const auto& m : p->modes())
        require(is_period_one_frequency(m.omega, 1e-9), ErrorCode::InvalidArgument,
                "heat coefficient frequencies must be multiples of 2pi/period");
    CMatrix d = CMatrix::Zero(n_modes, n_modes);
    for (int n = 1; n <= n_modes; ++n) d(n - 1, n - 1) = -sys.heat_.drift * n * n;
    sys.terms_.push_back({0.0, d});
    for (const auto& m : sys.heat_.a.modes()) {
      auto it = std::find_if(sys.terms_.begin(), sys.terms_.end(), [&](const Term& t) { return t.omega == m.omega; });
      const CMatrix add = m.coeff(0) * CMatrix::Identity(n_modes, n_modes);
      if (it == sys.terms_.end())
        sys.terms_.push_back({m.omega, add});
      else
        it->coeff += add;
    }
    return sys;
  }

  int dim() const { return dim_; }
  SystemKind kind() const { return kind_; }
  double period() const { return period_; }
  const IntegSettings& integ() const { return integ_; }
  const std::vector<MatrixEntry>& entries() const { return entries_; }
  const CMatrix& constant_matrix() const { return constant_; }
  const HeatParams& heat_params() const { return heat_; }

  PeriodicSystem with_integ(IntegSettings integ) const {
    PeriodicSystem out = *this;
    out.integ_ = integ;
    return out;
  }

  CMatrix A(double t) const {
    CMatrix out = CMatrix::Zero(dim_, dim_);
    for (const auto& term : terms_) out += term.coeff * std::polar(1.0, term.omega * t);
    return out;
  }

 private:
  struct Term {
    double omega;
    CMatrix coeff;
  };

  PeriodicSystem(SystemKind kind, int dim, IntegSettings integ, double period)
      : kind_(kind), dim_(dim), integ_(integ), period_(period) {}

  static void check_period(double period) {
    require(std::isfinite(period) && period > 0.0, ErrorCode::InvalidArgument, "period must be positive");
  }

  SystemKind kind_;
  int dim_;
  IntegSettings integ_;
  double period_;
  std::vector<MatrixEntry> entries_;
  CMatrix constant_;
  HeatParams heat_;
  std::vector<Term> terms_;
};

/// Time change for a forcing term of a tau-periodic problem: tau f(tau s).
inline TrigPolynomial to_unit_period(const TrigPolynomial& f, double period) {
  return cplx(period) * f.time_scaled(period);
}

struct EvolutionOperator {
  double s;
  double t;
  CMatrix matrix;
  double err_est = 0.0;
};

/// automatic uses closed forms where the kind has one; integrate always runs
/// the ODE solver.
enum class PropagationMode { automatic, integrate };

namespace detail {

inline std::complex<double> integral_of(const TrigPolynomial& a, double s, double t) {
  cplx acc = 0.0;
  for (const auto& m : a.modes()) {
    if (m.omega == 0.0)
      acc += m.coeff(0) * (t - s);
    else
      acc += m.coeff(0) * (std::polar(1.0, m.omega * t) - std::polar(1.0, m.omega * s)) / (kI * m.omega);
  }
  return acc;
}

inline CMatrix heat_closed_form(const HeatParams& hp, double s, double t) {
  const double ia = integral_of(hp.a, s, t).real();
  CMatrix out = CMatrix::Zero(hp.n_modes, hp.n_modes);
  for (int n = 1; n <= hp.n_modes; ++n) out(n - 1, n - 1) = std::exp(ia - hp.drift * n * n * (t - s));
  return out;
}

inline CMatrix matrix_power(CMatrix p, std::size_t n) {
  CMatrix out = CMatrix::Identity(p.rows(), p.cols());
  while (n > 0) {
    if (n & 1u) out = out * p;
    n >>= 1u;
    if (n > 0) p = p * p;
  }
  return out;
}

inline OdeResult integrate_forward(const PeriodicSystem& sys, double s, double t, const std::vector<double>& stops,
                                   std::vector<CMatrix>* at_stops) {
  auto rhs = [&](double tau, const CMatrix& x) -> CMatrix { return sys.A(tau) * x; };
  const CMatrix id = CMatrix::Identity(sys.dim(), sys.dim());
  if (at_stops) at_stops->assign(stops.size(), id);
  return integrate_matrix(rhs, s, id, t, sys.integ().ode(), stops, [&](std::size_t i, const CMatrix& x) {
    if (at_stops) (*at_stops)[i] = x;
  });
}

}  // namespace detail

/// U(t, s), the solution matrix of X' = A X with X(s) = I.
inline EvolutionOperator propagate(const PeriodicSystem& sys, double s, double t,
                                   PropagationMode mode = PropagationMode::automatic) {
  require(std::isfinite(s) && std::isfinite(t), ErrorCode::InvalidArgument, "non-finite time");
  if (t < s) fail(ErrorCode::TimeReversed, "propagate needs t >= s");
  const int d = sys.dim();
  EvolutionOperator out{s, t, CMatrix::Identity(d, d), 0.0};
  if (t == s) return out;

  if (mode == PropagationMode::automatic) {
    if (sys.kind() == SystemKind::constant) {
      out.matrix = (sys.constant_matrix() * (t - s)).exp();
      return out;
    }
    if (sys.kind() == SystemKind::heat) {
      out.matrix = detail::heat_closed_form(sys.heat_params(), s, t);
      return out;
    }
  }

  // Shift into [0, 1) and split off whole periods: U = U(s'+r, s') P(s')^n.
  const double shift = std::floor(s);
  const double s0 = s - shift;
  const double span = t - s;
  const auto n = static_cast<std::size_t>(std::floor(span));
  const double r = span - static_cast<double>(n);

  if (n == 0) {
    const auto res = detail::integrate_forward(sys, s0, s0 + r, {}, nullptr);
    out.matrix = res.x;
    out.err_est = res.err_est;
    return out;
  }
  std::vector<CMatrix> at;
  const auto res = detail::integrate_forward(sys, s0, s0 + 1.0, {s0 + r}, &at);
  const CMatrix& p = res.x;
  const double pn = std::max(1.0, p.norm());
  out.matrix = at[0] * detail::matrix_power(p, n);
  out.err_est = res.err_est * (1.0 + static_cast<double>(n) * std::pow(pn, static_cast<double>(n)));
  return out;
}

struct Monodromy {
  double anchor_t = 0.0;
  CMatrix matrix;
  std::vector<cplx> eigenvalues;
  UnitCircleSet unit_circle_part;
  double err_est = 0.0;
};

inline constexpr double kCircleTol = 1e-6;
inline constexpr double kResonanceTol = 1e-4;

inline std::vector<cplx> eigenvalues_of(const CMatrix& m) {
  Eigen::ComplexEigenSolver<CMatrix> es(m, false);
  require(es.info() == Eigen::Success, ErrorCode::IntegrationFailure, "eigensolver did not converge");
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

/// P(anchor) = U(anchor, anchor - 1) and its spectrum.
inline Monodromy monodromy(const PeriodicSystem& sys, double anchor_t, double circle_tol = kCircleTol,
                           PropagationMode mode = PropagationMode::automatic) {
  const auto u = propagate(sys, anchor_t - 1.0, anchor_t, mode);
  Monodromy m;
  m.anchor_t = anchor_t;
  m.matrix = u.matrix;
  m.err_est = u.err_est;
  m.eigenvalues = eigenvalues_of(u.matrix);
  std::vector<UnitCircleSet::Entry> on_circle;
  for (cplx mu : m.eigenvalues)
    if (std::fabs(std::abs(mu) - 1.0) < circle_tol) on_circle.push_back({std::arg(mu), 1.0});
  m.unit_circle_part = UnitCircleSet::from_candidates(std::move(on_circle), std::max(circle_tol, 1e-12));
  return m;
}

/// min |mu - e^{i theta}| over eigenvalues mu and angles theta.
inline double spectral_gap(const std::vector<cplx>& eigenvalues, const std::vector<double>& angles) {
  double best = std::numeric_limits<double>::infinity();
  for (cplx mu : eigenvalues)
    for (double th : angles) best = std::min(best, std::abs(mu - unit(th)));
  return best;
}

inline double spectral_gap(const Monodromy& p, const UnitCircleSet& freqs) {
  return spectral_gap(p.eigenvalues, freqs.angles());
}

inline bool is_resonant(double gap, double resonance_tol = kResonanceTol) { return gap <= resonance_tol; }

/// Largest distance between two eigenvalue multisets under greedy nearest
/// matching, after dropping eigenvalues with modulus below floor. Infinite
/// when the filtered counts differ.
inline double multiset_distance(std::vector<cplx> a, std::vector<cplx> b, double floor = 1e-10) {
  std::erase_if(a, [&](cplx z) { return std::abs(z) <= floor; });
  std::erase_if(b, [&](cplx z) { return std::abs(z) <= floor; });
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (cplx z : a) {
    std::size_t pick = b.size();
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j)
      if (!used[j] && std::abs(z - b[j]) < d) {
        d = std::abs(z - b[j]);
        pick = j;
      }
    used[pick] = true;
    worst = std::max(worst, d);
  }
  return worst;
}

struct GrowthBound {
  double N = 1.0;
  double omega = 0.0;
};

/// Fits |U(t,s)| <= N e^{omega (t-s)} to samples (t-s, |U(t,s)|): omega is the
/// least-squares slope of log|U|, N the smallest constant >= 1 that makes the
/// bound hold on every sample.
inline GrowthBound fit_growth_bound(const std::vector<std::pair<double, double>>& samples) {
  GrowthBound gb;
  if (samples.empty()) return gb;
  double sh = 0, sl = 0, shh = 0, shl = 0;
  for (auto [h, n] : samples) {
    const double l = std::log(std::max(n, 1e-300));
    sh += h;
    sl += l;
    shh += h * h;
    shl += h * l;
  }
  const double k = static_cast<double>(samples.size());
  const double den = k * shh - sh * sh;
  gb.omega = den > 0.0 ? (k * shl - sh * sl) / den : 0.0;
  for (auto [h, n] : samples) gb.N = std::max(gb.N, n * std::exp(-gb.omega * h));
  return gb;
}

/// Samples |U(t,s)| at random pairs with t - s in (0, max_span] and fits a bound.
inline GrowthBound growth_bound(const PeriodicSystem& sys, std::size_t n_samples = 32, double max_span = 3.0,
                                std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> us(-2.0, 2.0), uh(0.0, max_span);
  std::vector<std::pair<double, double>> samples;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double s = us(rng), h = uh(rng);
    samples.emplace_back(h, propagate(sys, s, s + h).matrix.operatorNorm());
  }
  return fit_growth_bound(samples);
}

/// Matrices U(t, t - sigma_j) for sorted sigma_j >= 0, from one sweep
/// backward in the second argument: Y' = Y A(t - sigma), Y(0) = I.
struct BackwardSweep {
  std::vector<CMatrix> values;
  double err_est = 0.0;
};

inline BackwardSweep backward_sweep(const PeriodicSystem& sys, double t, const std::vector<double>& sigmas,
                                    PropagationMode mode = PropagationMode::automatic) {
  BackwardSweep out;
  const int d = sys.dim();
  if (sigmas.empty()) return out;
  require(sigmas.front() >= 0.0, ErrorCode::TimeReversed, "sweep offsets must be nonnegative");
  if (mode == PropagationMode::automatic && sys.kind() != SystemKind::general) {
    out.values.reserve(sigmas.size());
    for (double sg : sigmas) out.values.push_back(propagate(sys, t - sg, t).matrix);
    return out;
  }
  out.values.assign(sigmas.size(), CMatrix::Identity(d, d));
  auto rhs = [&](double sg, const CMatrix& y) -> CMatrix { return y * sys.A(t - sg); };
  const auto res = integrate_matrix(rhs, 0.0, CMatrix::Identity(d, d), sigmas.back(), sys.integ().ode(), sigmas,
                                    [&](std::size_t i, const CMatrix& y) { out.values[i] = y; });
  out.err_est = res.err_est;
  return out;
}

}  // namespace circspec
