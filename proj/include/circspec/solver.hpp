#pragma once

#include "circspec/error.hpp"
#include "circspec/funcspace.hpp"
#include "circspec/parallel.hpp"
#include "circspec/process.hpp"
#include "circspec/quadrature.hpp"
#include "circspec/spectrum.hpp"
#include "circspec/types.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace circspec {

/// Wraps a callable as a TimeFunction, for composing operators.
struct FunctionOf {
  int d;
  std::function<CVector(double)> fn;
  CVector operator()(double t) const { return fn(t); }
  int dim() const { return d; }
};

struct QuadSettings {
  int nodes_per_unit = 32;
  double quad_tol = 1e-10;
  int max_refinements = 6;
};

/// Result of one quadrature of  int_0^h U(t, t - sigma) F(sigma) d sigma.
struct SweepQuadrature {
  CMatrix value;
  CMatrix u_h;  // U(t, t - h)
  double err_est = 0.0;
  bool converged = false;
};

namespace detail {

inline std::size_t panel_count(double h, std::size_t per_unit) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h * static_cast<double>(per_unit) - 1e-9)));
}

/// F(sigma) is a d x m matrix; its columns are integrated jointly. The
/// composite rule is doubled until two successive estimates agree.
template <typename Integrand>
SweepQuadrature sweep_quadrature(const PeriodicSystem& sys, double t, double h, Integrand&& F,
                                 const QuadSettings& qs, PropagationMode mode) {
  const GaussRule base = gauss_legendre(qs.nodes_per_unit);
  SweepQuadrature out;
  std::optional<CMatrix> previous;
  std::size_t per_unit = 1;
  for (int level = 0; level <= qs.max_refinements + 1; ++level, per_unit *= 2) {
    const auto rule = composite(base, h, panel_count(h, per_unit));
    std::vector<double> sig = rule.nodes;
    sig.push_back(h);
    const auto sw = backward_sweep(sys, t, sig, mode);
    CMatrix acc;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const CMatrix term = rule.weights[i] * (sw.values[i] * F(rule.nodes[i]));
      if (i == 0)
        acc = term;
      else
        acc += term;
    }
    out.u_h = sw.values.back();
    out.err_est = sw.err_est;
    if (previous) {
      const double diff = (acc - *previous).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, acc.cwiseAbs().maxCoeff());
      if (diff < qs.quad_tol * scale + 10.0 * sw.err_est) {
        out.value = std::move(acc);
        out.converged = true;
        return out;
      }
    }
    previous = std::move(acc);
  }
  out.value = *previous;
  return out;
}

template <typename G>
void check_window(const G& g, double a, double b) {
  if constexpr (std::is_same_v<std::decay_t<G>, GridFunction>) {
    if (!g.contains(a) || !g.contains(b))
      fail(ErrorCode::WindowOutOfDomain, "integration interval leaves the grid window");
  }
}

}  // namespace detail

/// (G g)(t) = int_{t-h}^t U(t, xi) g(xi) d xi.
template <TimeFunction G>
CVector apply_G(const PeriodicSystem& sys, const G& g, double h, double t, const QuadSettings& qs = {},
                PropagationMode mode = PropagationMode::automatic) {
  require(h > 0.0, ErrorCode::InvalidArgument, "apply_G needs h > 0");
  require(g.dim() == sys.dim(), ErrorCode::InvalidArgument, "function and system dimensions differ");
  detail::check_window(g, t - h, t);
  auto F = [&](double sg) -> CMatrix { return g(t - sg); };
  return detail::sweep_quadrature(sys, t, h, F, qs, mode).value.col(0);
}

/// (T^h_f g)(t) = U(t, t-h) g(t-h) + int_{t-h}^t U(t, xi) f(xi) d xi.
template <TimeFunction F, TimeFunction G>
CVector apply_Tfh(const PeriodicSystem& sys, const F& f, const G& g, double h, double t,
                  const QuadSettings& qs = {}, PropagationMode mode = PropagationMode::automatic) {
  require(h >= 0.0, ErrorCode::InvalidArgument, "apply_Tfh needs h >= 0");
  if (h == 0.0) return g(t);
  require(g.dim() == sys.dim() && f.dim() == sys.dim(), ErrorCode::InvalidArgument,
          "function and system dimensions differ");
  detail::check_window(g, t - h, t);
  detail::check_window(f, t - h, t);
  auto Fm = [&](double sg) -> CMatrix { return f(t - sg); };
  const auto q = detail::sweep_quadrature(sys, t, h, Fm, qs, mode);
  return q.u_h * g(t - h) + q.value.col(0);
}

/// A 1-periodic envelope sampled at j/m and extended by trigonometric
/// interpolation (the Nyquist term is split evenly between +-m/2).
class Envelope {
 public:
  Envelope() = default;

  Envelope(double omega, std::vector<CVector> samples) : omega_(omega), samples_(std::move(samples)) {
    require(!samples_.empty(), ErrorCode::InvalidArgument, "envelope needs samples");
    refresh();
  }

  static Envelope constant(double omega, const CVector& value, std::size_t m) {
    return Envelope(omega, std::vector<CVector>(m, value));
  }

  double omega() const { return omega_; }
  std::size_t size() const { return samples_.size(); }
  int dim() const { return static_cast<int>(samples_.front().size()); }
  const std::vector<CVector>& samples() const { return samples_; }

  void set_sample(std::size_t j, const CVector& v) {
    samples_.at(j) = v;
    refresh();
  }

  /// Harmonics (n, c_n) with p(t) = sum_n c_n e^{2 pi i n t}.
  const std::vector<std::pair<int, CVector>>& harmonics() const { return harmonics_; }

  CVector operator()(double t) const {
    const double phase = t - std::floor(t);
    CVector v = CVector::Zero(dim());
    for (const auto& [n, c] : harmonics_) v += c * std::polar(1.0, kTwoPi * n * phase);
    return v;
  }

 private:
  void refresh() {
    const auto m = static_cast<int>(samples_.size());
    const int d = dim();
    harmonics_.clear();
    for (int k = 0; k < m; ++k) {
      CVector c = CVector::Zero(d);
      for (int j = 0; j < m; ++j) c += samples_[j] * std::polar(1.0, -kTwoPi * static_cast<double>(k) * j / m);
      c /= static_cast<double>(m);
      int n = k <= m / 2 ? k : k - m;
      if (m % 2 == 0 && k == m / 2) {
        harmonics_.emplace_back(-n, 0.5 * c);
        harmonics_.emplace_back(n, 0.5 * c);
      } else {
        harmonics_.emplace_back(n, c);
      }
    }
    std::sort(harmonics_.begin(), harmonics_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  double omega_ = 0.0;
  std::vector<CVector> samples_;
  std::vector<std::pair<int, CVector>> harmonics_;
};

struct SolverSettings {
  std::size_t m_env = 64;
  double resid_tol = 1e-6;
  double cond_cap = 1e8;
  double resonance_tol = kResonanceTol;
  QuadSettings quad;
  std::size_t n_pairs = 20;
  bool lattice_pairs = true;  // also probe t on the envelope grid
  double max_span = 3.0;
  std::uint64_t seed = 20240607;
  bool certify = true;
  bool throw_on_failure = true;
  PropagationMode mode = PropagationMode::automatic;
};

struct SolveReport {
  double residual = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  std::vector<double> mode_conds;
  int iterations = 0;
  double u_norm = 0.0;
  double f_norm = 0.0;
  bool near_resonance = false;
  bool certified = false;
  bool quad_converged = true;
  std::uint64_t seed = 0;
  std::size_t n_pairs = 0;
  std::vector<cplx> multipliers;
  double projection_defect = 0.0;
};

/// u(t) = sum_k e^{i w_k t} p_k(t mod 1).
class MildSolution {
 public:
  MildSolution() = default;
  MildSolution(int dim, std::vector<Envelope> envelopes) : dim_(dim), envelopes_(std::move(envelopes)) {
    for (const auto& e : envelopes_) require(e.dim() == dim_, ErrorCode::InvalidArgument, "envelope dim mismatch");
  }

  int dim() const { return dim_; }
  std::vector<double> freqs() const {
    std::vector<double> out;
    for (const auto& e : envelopes_) out.push_back(e.omega());
    return out;
  }
  const std::vector<Envelope>& envelopes() const { return envelopes_; }
  std::vector<Envelope>& envelopes() { return envelopes_; }
  std::size_t m_env() const { return envelopes_.empty() ? 0 : envelopes_.front().size(); }

  CVector operator()(double t) const {
    CVector v = CVector::Zero(dim_);
    for (const auto& e : envelopes_) v += std::polar(1.0, e.omega() * t) * e(t);
    return v;
  }

  /// Exact expansion sum_{k,n} c_{k,n} e^{i(w_k + 2 pi n) t}; harmonics with
  /// norm at most drop_tol times the largest are left out.
  TrigPolynomial to_trig_polynomial(double drop_tol = 0.0, double* dropped = nullptr) const {
    double biggest = 0.0;
    for (const auto& e : envelopes_)
      for (const auto& [n, c] : e.harmonics()) biggest = std::max(biggest, c.norm());
    std::vector<TrigPolynomial::Mode> modes;
    double lost = 0.0;
    for (const auto& e : envelopes_)
      for (const auto& [n, c] : e.harmonics()) {
        if (c.norm() <= drop_tol * biggest) {
          lost += c.norm();
          continue;
        }
        modes.push_back({e.omega() + kTwoPi * n, c});
      }
    if (dropped) *dropped = lost;
    return TrigPolynomial(dim_, std::move(modes));
  }

  SolveReport report;

 private:
  int dim_ = 1;
  std::vector<Envelope> envelopes_;
};

/// Finite-window sup norm estimate on [0, periods] with step 1/(2 m).
template <TimeFunction F>
double window_norm(const F& u, double periods = 20.0, std::size_t m = 64) {
  double best = 0.0;
  const std::size_t n = static_cast<std::size_t>(periods * 2.0 * static_cast<double>(m));
  for (std::size_t i = 0; i <= n; ++i) best = std::max(best, u(static_cast<double>(i) / (2.0 * m)).norm());
  return best;
}

/// Deterministic probe pairs (s, t) with t - s in (0, max_span].
inline std::vector<std::pair<double, double>> probe_pairs(std::size_t n_random, std::size_t lattice, double max_span,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(-10.0, 10.0), uh(0.0, 1.0);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < n_random; ++i) {
    const double t = ut(rng);
    const double h = max_span * (1.0 - uh(rng));
    out.emplace_back(t - h, t);
  }
  for (std::size_t j = 0; j < lattice; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(lattice);
    const double h = max_span * (1.0 - uh(rng));
    out.emplace_back(t - h, t);
  }
  return out;
}

/// sup over probe pairs of |u(t) - U(t,s) u(s) - int_s^t U(t,xi) f(xi) d xi|.
template <TimeFunction U, TimeFunction F>
double residual(const PeriodicSystem& sys, const U& u, const F& f, std::size_t n_pairs, std::uint64_t seed,
                std::size_t lattice = 0, const QuadSettings& qs = {}, double max_span = 3.0,
                PropagationMode mode = PropagationMode::automatic) {
  const auto pairs = probe_pairs(n_pairs, lattice, max_span, seed);
  std::vector<double> gaps(pairs.size(), 0.0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [s, t] = pairs[i];
    gaps[i] = (u(t) - apply_Tfh(sys, f, u, t - s, t, qs, mode)).norm();
  });
  double best = 0.0;
  for (double g : gaps) best = std::max(best, g);
  return best;
}

inline double residual(const PeriodicSystem& sys, const MildSolution& u, const TrigPolynomial& f,
                       std::size_t n_pairs = 20, std::uint64_t seed = SolverSettings{}.seed,
                       std::size_t lattice = 64) {
  return residual<MildSolution, TrigPolynomial>(sys, u, f, n_pairs, seed, lattice);
}

namespace detail {

inline double condition_number(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  const double lo = sv(sv.size() - 1);
  return lo == 0.0 ? std::numeric_limits<double>::infinity() : sv(0) / lo;
}

inline double smallest_singular_value(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline double largest_singular_value(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace detail

/// Per-mode linear solver. Caches, for each envelope grid point t_j, the
/// converged quadrature nodes and the matrices U(t_j, t_j - sigma), from which
/// P(t_j) and the mode kernels K_w(t_j) = int_0^1 U(t_j, t_j - s) e^{-i w s} ds
/// follow for any frequency.
class LinearSolver {
 public:
  LinearSolver(const PeriodicSystem& sys, SolverSettings settings = {}, double omega_max = 0.0)
      : sys_(sys), settings_(settings) {
    require(settings_.m_env >= 2, ErrorCode::InvalidArgument, "m_env must be at least 2");
    const std::size_t m = settings_.m_env;
    points_.resize(m);
    parallel_for(m, [&](std::size_t j) { points_[j] = build_point(static_cast<double>(j) / m, omega_max); });
    multipliers_ = eigenvalues_of(points_[0].P);
  }

  const PeriodicSystem& system() const { return sys_; }
  const SolverSettings& settings() const { return settings_; }
  std::size_t grid_size() const { return points_.size(); }
  double grid_time(std::size_t j) const { return points_[j].t; }
  const CMatrix& P(std::size_t j) const { return points_[j].P; }
  const std::vector<cplx>& multipliers() const { return multipliers_; }
  bool quad_converged() const {
    return std::all_of(points_.begin(), points_.end(), [](const Point& p) { return p.converged; });
  }
  double err_est() const {
    double e = 0.0;
    for (const auto& p : points_) e = std::max(e, p.err_est);
    return e;
  }

  CMatrix K(double omega, std::size_t j) const {
    const auto& p = points_[j];
    CMatrix acc = CMatrix::Zero(sys_.dim(), sys_.dim());
    for (std::size_t i = 0; i < p.nodes.size(); ++i) acc += (p.weights[i] * std::polar(1.0, -omega * p.nodes[i])) * p.Y[i];
    return acc;
  }

  CMatrix mode_matrix(double omega, std::size_t j) const {
    const int d = sys_.dim();
    return CMatrix::Identity(d, d) - std::polar(1.0, -omega) * points_[j].P;
  }

  double gap(const std::vector<double>& omegas) const { return spectral_gap(multipliers_, omegas); }

  /// Throws Resonance when any frequency is within resonance_tol of a multiplier.
  void check_gap(const std::vector<double>& omegas) const {
    const double g = gap(omegas);
    if (is_resonant(g, settings_.resonance_tol))
      fail(ErrorCode::Resonance, "spectral gap " + std::to_string(g) + " is below the resonance tolerance");
  }

  /// max_j |(I - e^{-iw} P(t_j))^{-1}| |K_w(t_j)|.
  double mode_gain(double omega) const {
    double best = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const CMatrix mm = mode_matrix(omega, j);
      const double lo = detail::smallest_singular_value(mm);
      if (lo == 0.0 || detail::condition_number(mm) > settings_.cond_cap)
        fail(ErrorCode::Resonance, "mode matrix is singular at omega=" + std::to_string(omega));
      best = std::max(best, detail::largest_singular_value(K(omega, j)) / lo);
    }
    return best;
  }

  /// Solves mode by mode; certification follows settings.certify.
  MildSolution solve(const TrigPolynomial& f) const {
    require(f.dim() == sys_.dim(), ErrorCode::InvalidArgument, "forcing and system dimensions differ");
    const auto omegas = f.frequencies();
    SolveReport rep;
    rep.gap = omegas.empty() ? std::numeric_limits<double>::infinity() : gap(omegas);
    rep.multipliers = multipliers_;
    rep.seed = settings_.seed;
    rep.n_pairs = settings_.n_pairs;
    rep.quad_converged = quad_converged();
    check_gap(omegas);
    rep.near_resonance = rep.gap < 10.0 * settings_.resonance_tol;

    const std::size_t m = points_.size();
    std::vector<Envelope> envs;
    for (const auto& mode : f.modes()) {
      std::vector<CVector> samples(m);
      double worst = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const CMatrix mm = mode_matrix(mode.omega, j);
        const double cond = detail::condition_number(mm);
        worst = std::max(worst, cond);
        if (!(cond <= settings_.cond_cap))
          fail(ErrorCode::Resonance, "mode system condition number " + std::to_string(cond) + " exceeds cond_cap");
        samples[j] = mm.fullPivLu().solve(K(mode.omega, j) * mode.coeff);
      }
      rep.mode_conds.push_back(worst);
      envs.emplace_back(mode.omega, std::move(samples));
    }
    MildSolution u(sys_.dim(), std::move(envs));
    rep.f_norm = window_norm(f, 20.0, m);
    rep.u_norm = window_norm(u, 20.0, m);
    if (settings_.certify) {
      rep.residual = residual(sys_, u, f, settings_.n_pairs, settings_.seed, settings_.lattice_pairs ? m : 0,
                              settings_.quad, settings_.max_span, settings_.mode);
      rep.certified = std::isfinite(rep.residual) && rep.residual < settings_.resid_tol;
      if (!rep.certified && settings_.throw_on_failure)
        fail(ErrorCode::CertificationFailure,
             "mild-solution residual " + std::to_string(rep.residual) + " is not below resid_tol");
    }
    u.report = std::move(rep);
    return u;
  }

 private:
  struct Point {
    double t = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<CMatrix> Y;
    CMatrix P;
    double err_est = 0.0;
    bool converged = false;
  };

  Point build_point(double t, double omega_max) const {
    const auto& qs = settings_.quad;
    const GaussRule base = gauss_legendre(qs.nodes_per_unit);
    const int d = sys_.dim();
    Point pt;
    pt.t = t;
    std::optional<std::vector<CMatrix>> previous;
    std::size_t panels = 1;
    const double probes[] = {0.0, omega_max, -omega_max};
    for (int level = 0; level <= qs.max_refinements + 1; ++level, panels *= 2) {
      const auto rule = composite(base, 1.0, panels);
      std::vector<double> sig = rule.nodes;
      sig.push_back(1.0);
      auto sw = backward_sweep(sys_, t, sig, settings_.mode);
      std::vector<CMatrix> k;
      for (double w : probes) {
        CMatrix acc = CMatrix::Zero(d, d);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
          acc += (rule.weights[i] * std::polar(1.0, -w * rule.nodes[i])) * sw.values[i];
        k.push_back(std::move(acc));
      }
      pt.P = sw.values.back();
      sw.values.pop_back();
      pt.nodes = rule.nodes;
      pt.weights = rule.weights;
      pt.Y = std::move(sw.values);
      pt.err_est = sw.err_est;
      if (previous) {
        double diff = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < k.size(); ++i) {
          diff = std::max(diff, (k[i] - (*previous)[i]).cwiseAbs().maxCoeff());
          scale = std::max(scale, k[i].cwiseAbs().maxCoeff());
        }
        if (diff < qs.quad_tol * scale + 10.0 * pt.err_est) {
          pt.converged = true;
          return pt;
        }
      }
      previous = std::move(k);
    }
    return pt;
  }

  PeriodicSystem sys_;
  SolverSettings settings_;
  std::vector<Point> points_;
  std::vector<cplx> multipliers_;
};

inline double max_abs_frequency(const TrigPolynomial& f) {
  double w = 0.0;
  for (const auto& m : f.modes()) w = std::max(w, std::fabs(m.omega));
  return w;
}

/// Bounded mild solution of u' = A(t) u + f(t) for trig-polynomial forcing.
inline MildSolution solve_linear(const PeriodicSystem& sys, const TrigPolynomial& f, const SolverSettings& s = {}) {
  const LinearSolver ls(sys, s, max_abs_frequency(f));
  return ls.solve(f);
}

inline MildSolution solve_linear(const PeriodicSystem& sys, const TrigPolynomial& f, std::size_t m_env) {
  SolverSettings s;
  s.m_env = m_env;
  return solve_linear(sys, f, s);
}

struct InclusionSettings {
  ResolventSettings resolvent = [] {
    ResolventSettings r;
    r.max_terms = 2000;
    return r;
  }();
  double dt = 0.125;
  double min_periods = 40.0;
};

struct InclusionReport {
  UnitCircleSet detected;
  UnitCircleSet allowed;
  std::vector<double> excess;
  double window = 0.0;
  bool ok = true;
};

/// Renders u on a grid and checks that its detected circular spectrum lies
/// within angular resolution of {w_k mod 2 pi}.
template <TimeFunction U>
InclusionReport verify_spectral_inclusion(const U& u, const TrigPolynomial& f, const InclusionSettings& is = {}) {
  const auto& rs = is.resolvent;
  InclusionReport rep;
  std::vector<UnitCircleSet::Entry> allowed;
  for (double w : f.frequencies()) allowed.push_back({w, 1.0});
  rep.allowed = UnitCircleSet::from_candidates(std::move(allowed), rs.angular_resolution());
  rep.window = std::max(is.min_periods, 2.0 * static_cast<double>(rs.max_terms) + 2.0);
  const auto n = static_cast<std::size_t>(std::llround(rep.window / is.dt)) + 1;
  const auto grid = GridFunction::sample(u, 0.0, is.dt, n);
  rep.detected = circular_spectrum(grid, rs).spectrum;
  rep.excess = rep.detected.excess_over(rep.allowed);
  rep.ok = rep.excess.empty();
  return rep;
}

/// Applies T^1_f n times to g0. Each application loses one unit of window on
/// the left; the grid step must divide 1.
inline GridFunction iterate_T1(const PeriodicSystem& sys, const TrigPolynomial& f, const GridFunction& g0,
                               std::size_t n, const QuadSettings& qs = {},
                               PropagationMode mode = PropagationMode::automatic) {
  if (n == 0) return g0;
  require(g0.window_length() >= static_cast<double>(n) + 2.0 - 1e-9, ErrorCode::WindowTooShort,
          "iterate_T1 needs a window of length at least n + 2");
  const double spu_d = 1.0 / g0.dt();
  const auto spu = static_cast<std::size_t>(std::llround(spu_d));
  require(std::fabs(spu_d - static_cast<double>(spu)) < 1e-9 * spu_d, ErrorCode::NonCommensurateShift,
          "grid step must divide the period");

  // U(t, t - sigma) depends on t mod 1 only, so one sweep per phase suffices:
  // (T g)(t) = P(t) g(t-1) + sum_k e^{i w_k t} int_0^1 U(t, t-s) a_k e^{-i w_k s} ds.
  struct PhaseData {
    CMatrix P;
    CMatrix C;  // columns: per-mode integrals
  };
  const auto& modes = f.modes();
  std::vector<PhaseData> phases(spu);
  parallel_for(spu, [&](std::size_t p) {
    const double t = g0.t0() + static_cast<double>(p) * g0.dt();
    auto F = [&](double sg) -> CMatrix {
      CMatrix cols(sys.dim(), static_cast<Eigen::Index>(std::max<std::size_t>(1, modes.size())));
      cols.setZero();
      for (std::size_t k = 0; k < modes.size(); ++k)
        cols.col(static_cast<Eigen::Index>(k)) = modes[k].coeff * std::polar(1.0, -modes[k].omega * sg);
      return cols;
    };
    const auto q = detail::sweep_quadrature(sys, t, 1.0, F, qs, mode);
    phases[p] = {q.u_h, q.value};
  });

  GridFunction g = g0;
  for (std::size_t it = 0; it < n; ++it) {
    std::vector<CVector> out;
    out.reserve(g.size() - spu);
    for (std::size_t i = spu; i < g.size(); ++i) {
      const double t = g.time(i);
      const std::size_t p = static_cast<std::size_t>(std::llround((t - g0.t0()) / g0.dt())) % spu;
      CVector v = phases[p].P * g.sample(i - spu);
      for (std::size_t k = 0; k < modes.size(); ++k)
        v += std::polar(1.0, modes[k].omega * t) * phases[p].C.col(static_cast<Eigen::Index>(k));
      out.push_back(std::move(v));
    }
    g = GridFunction(g.time(spu), g.dt(), std::move(out));
  }
  return g;
}

struct ProjectedForcing {
  TrigPolynomial f;
  double defect = 0.0;  // sup over samples of |g - f|
  CarlemanReport detection;
};

namespace detail {

// |sum_i w_i g(t_i) e^{-i xi t_i}| with a Hann taper over the window.
inline double tapered_periodogram(const GridFunction& g, double xi) {
  const double n = static_cast<double>(g.size() - 1);
  CVector acc = CVector::Zero(g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / n);
    acc += (w * std::polar(1.0, -xi * g.time(i))) * g.sample(i);
  }
  return acc.norm();
}

inline TrigPolynomial least_squares_modes(const GridFunction& g, const std::vector<double>& w) {
  const auto n = static_cast<Eigen::Index>(g.size());
  const int d = g.dim();
  if (w.empty()) return TrigPolynomial::zero(d);
  CMatrix basis(n, static_cast<Eigen::Index>(w.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < w.size(); ++k)
      basis(i, static_cast<Eigen::Index>(k)) = std::polar(1.0, w[k] * g.time(static_cast<std::size_t>(i)));
  CMatrix rhs(n, d);
  for (Eigen::Index i = 0; i < n; ++i) rhs.row(i) = g.sample(static_cast<std::size_t>(i)).transpose();
  const CMatrix coef = basis.colPivHouseholderQr().solve(rhs);
  std::vector<TrigPolynomial::Mode> modes;
  for (std::size_t k = 0; k < w.size(); ++k) modes.push_back({w[k], coef.row(static_cast<Eigen::Index>(k)).transpose()});
  return TrigPolynomial(d, std::move(modes));
}

}  // namespace detail

/// Least-squares projection of sampled forcing onto the frequencies found by
/// the Carleman scan. Each detected frequency is first sharpened by
/// maximizing a tapered periodogram near it.
inline ProjectedForcing project_forcing(const GridFunction& g, const CarlemanSettings& cs = {}) {
  ProjectedForcing out;
  out.detection = carleman_spectrum(g, cs);
  std::vector<double> w = out.detection.frequencies;
  const double dmin = out.detection.radial_deltas.empty()
                          ? cs.freq_step
                          : *std::min_element(out.detection.radial_deltas.begin(), out.detection.radial_deltas.end());
  const double reach = std::max(cs.freq_step, dmin);
  for (double& x : w) x = detail::golden_max([&](double y) { return detail::tapered_periodogram(g, y); }, x - reach, x + reach, 1e-12);
  out.f = detail::least_squares_modes(g, w);
  for (std::size_t i = 0; i < g.size(); ++i) out.defect = std::max(out.defect, (g.sample(i) - out.f(g.time(i))).norm());
  return out;
}

/// Grid forcing: project onto detected modes, solve, and record the defect.
inline MildSolution solve_linear(const PeriodicSystem& sys, const GridFunction& f, const SolverSettings& s = {},
                                 const CarlemanSettings& cs = {}) {
  const auto proj = project_forcing(f, cs);
  auto u = solve_linear(sys, proj.f, s);
  u.report.projection_defect = proj.defect;
  return u;
}

}  // namespace circspec
