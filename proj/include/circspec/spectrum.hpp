#pragma once

#include "circspec/error.hpp"
#include "circspec/funcspace.hpp"
#include "circspec/grid_function.hpp"
#include "circspec/parallel.hpp"
#include "circspec/trig_polynomial.hpp"
#include "circspec/types.hpp"
#include "circspec/unit_circle_set.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace circspec {

/// Numerical policy for the resolvent transform  lambda -> R(lambda, S) g.
struct ResolventSettings {
  double series_tol = 1e-10;
  int max_terms = 5000;
  std::vector<double> radial_deltas{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int angle_grid = 720;
  double blowup_threshold = 0.5;
  // sup over t is taken on this lattice for trig polynomials
  Window probe_window{0.0, 10.0};
  double probe_dt = 0.05;
  // number of start points per unit interval for grid functions
  int grid_probes = 8;

  double angular_resolution() const { return kTwoPi / static_cast<double>(angle_grid); }

  void validate() const {
    require(series_tol > 0.0, ErrorCode::InvalidArgument, "series_tol must be positive");
    require(max_terms > 0, ErrorCode::InvalidArgument, "max_terms must be positive");
    require(angle_grid >= 8, ErrorCode::InvalidArgument, "angle_grid must be >= 8");
    require(blowup_threshold > 0.0, ErrorCode::InvalidArgument, "blowup_threshold must be positive");
    require(radial_deltas.size() >= 2, ErrorCode::InvalidArgument, "need at least two radial deltas");
    for (std::size_t i = 0; i < radial_deltas.size(); ++i) {
      require(radial_deltas[i] > 0.0 && radial_deltas[i] < 0.5, ErrorCode::InvalidArgument,
              "radial deltas must lie in (0, 0.5)");
      if (i > 0)
        require(radial_deltas[i] < radial_deltas[i - 1], ErrorCode::InvalidArgument,
                "radial deltas must be strictly decreasing");
    }
    require(probe_dt > 0.0 && probe_window.b >= probe_window.a, ErrorCode::InvalidArgument,
            "bad probe lattice");
    require(grid_probes >= 1, ErrorCode::InvalidArgument, "grid_probes must be >= 1");
  }
};

enum class SpectrumMethod { closed_form, neumann };

inline const char* to_string(SpectrumMethod m) {
  return m == SpectrumMethod::closed_form ? "closed_form" : "neumann";
}

struct AngleExponent {
  double theta;
  double exponent;
};

struct SpectrumReport {
  UnitCircleSet spectrum;
  std::vector<AngleExponent> per_angle;
  SpectrumMethod method = SpectrumMethod::closed_form;
};

struct ProfilePoint {
  double delta;
  double norm;
};

enum class Approach { outside, inside };

namespace detail {

inline void check_off_circle(cplx lambda) {
  if (std::fabs(std::abs(lambda) - 1.0) <= 1e-6)
    fail(ErrorCode::LambdaOnCircle, "| |lambda| - 1 | <= 1e-6");
}

inline cplx radial_point(double theta, double delta, Approach side) {
  return std::polar(side == Approach::outside ? 1.0 + delta : 1.0 - delta, theta);
}

/// Least-squares slope s in  log(norm) = -s log(delta) + c.
inline double fit_exponent(const std::vector<double>& deltas, const std::vector<double>& norms) {
  const std::size_t n = deltas.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -std::log(deltas[i]);
    const double y = std::log(std::max(norms[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  double s = (static_cast<double>(n) * sxy - sx * sy) / denom;
  // an identically zero profile has no blow-up
  if (*std::max_element(norms.begin(), norms.end()) <= 1e-300) s = 0.0;
  return s;
}

/// Golden-section maximization of f on [a, b].
template <typename F>
double golden_max(F&& f, double a, double b, double tol = 1e-11) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Contiguous runs of flagged indices on a cyclic (or linear) index range.
inline std::vector<std::vector<std::size_t>> flagged_runs(const std::vector<bool>& flags, bool cyclic) {
  std::vector<std::vector<std::size_t>> runs;
  const std::size_t n = flags.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!flags[i]) continue;
    if (!runs.empty() && runs.back().back() + 1 == i)
      runs.back().push_back(i);
    else
      runs.push_back({i});
  }
  if (cyclic && runs.size() > 1 && runs.front().front() == 0 && runs.back().back() == n - 1) {
    runs.back().insert(runs.back().end(), runs.front().begin(), runs.front().end());
    runs.erase(runs.begin());
  }
  return runs;
}

inline std::vector<double> probe_times(const ResolventSettings& s) {
  std::vector<double> ts;
  const auto k0 = static_cast<long long>(std::ceil(s.probe_window.a / s.probe_dt));
  const auto k1 = static_cast<long long>(std::floor(s.probe_window.b / s.probe_dt));
  for (long long k = k0; k <= k1; ++k) ts.push_back(static_cast<double>(k) * s.probe_dt);
  if (ts.empty()) ts.push_back(s.probe_window.a);
  return ts;
}

/// Grid points per unit of time; unit translations must map the grid to itself.
inline std::size_t steps_per_unit(const GridFunction& g) {
  const double x = 1.0 / g.dt();
  const double k = std::round(x);
  if (k < 1.0 || std::fabs(x - k) > 1e-7 * k)
    fail(ErrorCode::NonCommensurateShift, "unit translation is not a whole number of grid steps");
  return static_cast<std::size_t>(k);
}

/// Number of Neumann terms n = 0..N needed for the tail bound to drop below tol.
inline std::size_t neumann_terms(double gnorm, double radius, const ResolventSettings& s) {
  if (gnorm <= 0.0) return 0;
  const double gap = std::fabs(radius - 1.0);
  const double ratio = radius > 1.0 ? radius : 1.0 / radius;
  const double target = std::log(gnorm / (gap * s.series_tol));
  if (target <= 0.0) return 0;
  const double n_plus_1 = std::ceil(target / std::log(ratio));
  const double n = std::max(0.0, n_plus_1 - 1.0);
  return static_cast<std::size_t>(std::min(n, static_cast<double>(s.max_terms)));
}

/// Neumann sum for R(lambda,S)g at grid index i0 with N terms.
inline CVector neumann_sum(const GridFunction& g, std::size_t spu, std::size_t i0, cplx lambda, std::size_t terms) {
  CVector acc = CVector::Zero(g.dim());
  if (std::abs(lambda) > 1.0) {
    const cplx inv = 1.0 / lambda;
    cplx w = inv;
    for (std::size_t n = 0; n <= terms; ++n) {
      acc += w * g.sample(i0 + n * spu);
      w *= inv;
    }
  } else {
    cplx w = 1.0;
    for (std::size_t n = 0; n <= terms; ++n) {
      acc -= w * g.sample(i0 - (n + 1) * spu);
      w *= lambda;
    }
  }
  return acc;
}

/// Start indices within the first unit of the window that leave room for
/// `reach` whole translates on the requested side.
inline std::vector<std::size_t> grid_probe_indices(const GridFunction& g, std::size_t spu, int count, Approach side,
                                                   std::size_t reach) {
  const std::size_t n = g.size();
  const std::size_t needed = reach * spu;
  if (needed + 1 > n) fail(ErrorCode::WindowTooShort, "grid window too short for the requested translates");
  std::vector<std::size_t> idx;
  const std::size_t span = std::min(spu, n - needed);
  const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(count), span);
  for (std::size_t p = 0; p < c; ++p) {
    const std::size_t off = p * span / c;
    idx.push_back(side == Approach::outside ? off : needed + off);
  }
  return idx;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Resolvent transform

/// Closed form of R(lambda,S)g for a trig polynomial, as a trig polynomial:
/// each mode a e^{iwt} is an eigenvector of S with eigenvalue e^{iw}.
inline TrigPolynomial resolvent_closed_form(const TrigPolynomial& g, cplx lambda) {
  detail::check_off_circle(lambda);
  std::vector<TrigPolynomial::Mode> modes;
  modes.reserve(g.size());
  for (const auto& m : g.modes()) modes.push_back({m.omega, m.coeff / (lambda - std::polar(1.0, m.omega))});
  return TrigPolynomial(g.dim(), std::move(modes));
}

inline CVector resolvent_apply(const TrigPolynomial& g, cplx lambda, double t, const ResolventSettings& = {}) {
  detail::check_off_circle(lambda);
  CVector v = CVector::Zero(g.dim());
  for (const auto& m : g.modes()) v += m.coeff * (std::polar(1.0, m.omega * t) / (lambda - std::polar(1.0, m.omega)));
  return v;
}

/// Truncated Neumann series. Outside the circle it uses forward translates
/// g(t+n), inside it uses backward translates g(t-n-1).
inline CVector resolvent_apply(const GridFunction& g, cplx lambda, double t, const ResolventSettings& s = {}) {
  detail::check_off_circle(lambda);
  const std::size_t spu = detail::steps_per_unit(g);
  const auto idx = g.index_of(t);
  if (!idx) {
    if (!g.contains(t)) fail(ErrorCode::WindowOutOfDomain, "t is outside the grid window");
    fail(ErrorCode::NonCommensurateShift, "t is not a grid point");
  }
  const double r = std::abs(lambda);
  const std::size_t terms = detail::neumann_terms(sup_norm(g), r, s);
  if (r > 1.0) {
    if (*idx + terms * spu >= g.size())
      fail(ErrorCode::WindowTooShort, "Neumann series needs samples past the window end");
  } else {
    if (*idx < (terms + 1) * spu) fail(ErrorCode::WindowTooShort, "Neumann series needs samples before the window start");
  }
  return detail::neumann_sum(g, spu, *idx, lambda, terms);
}

/// Finite-window sup over t of ||R((1+-delta) e^{i theta}, S) g (t)|| for each delta.
inline std::vector<ProfilePoint> resolvent_norm_profile(const TrigPolynomial& g, double theta,
                                                        const ResolventSettings& s = {},
                                                        Approach side = Approach::outside) {
  s.validate();
  const auto ts = detail::probe_times(s);
  std::vector<ProfilePoint> out;
  for (double delta : s.radial_deltas) {
    const TrigPolynomial rg = resolvent_closed_form(g, detail::radial_point(theta, delta, side));
    double best = 0.0;
    for (double t : ts) best = std::max(best, rg(t).norm());
    out.push_back({delta, best});
  }
  return out;
}

inline std::vector<ProfilePoint> resolvent_norm_profile(const GridFunction& g, double theta,
                                                        const ResolventSettings& s = {},
                                                        Approach side = Approach::outside) {
  s.validate();
  const std::size_t spu = detail::steps_per_unit(g);
  const double gnorm = sup_norm(g);
  std::vector<ProfilePoint> out;
  for (double delta : s.radial_deltas) {
    const cplx lambda = detail::radial_point(theta, delta, side);
    const std::size_t terms = detail::neumann_terms(gnorm, std::abs(lambda), s);
    const std::size_t reach = side == Approach::outside ? terms : terms + 1;
    double best = 0.0;
    for (std::size_t i0 : detail::grid_probe_indices(g, spu, s.grid_probes, side, reach))
      best = std::max(best, detail::neumann_sum(g, spu, i0, lambda, terms).norm());
    out.push_back({delta, best});
  }
  return out;
}

template <typename G>
double fitted_exponent(const G& g, double theta, const ResolventSettings& s, Approach side = Approach::outside) {
  const auto profile = resolvent_norm_profile(g, theta, s, side);
  std::vector<double> d, n;
  for (const auto& p : profile) {
    d.push_back(p.delta);
    n.push_back(p.norm);
  }
  return detail::fit_exponent(d, n);
}

// ---------------------------------------------------------------------------
// Circular spectrum

/// For a trig polynomial the transform is rational with simple poles at
/// e^{i w_k}, so the spectrum is read off the modes. The fitted exponent at
/// each pole is still reported.
inline SpectrumReport circular_spectrum(const TrigPolynomial& g, const ResolventSettings& s = {}) {
  s.validate();
  std::vector<UnitCircleSet::Entry> cands;
  for (const auto& m : g.modes())
    if (m.coeff.norm() > 0.0) cands.push_back({wrap_angle(m.omega), 0.0});
  SpectrumReport rep{UnitCircleSet::from_candidates(cands, s.angular_resolution()), {}, SpectrumMethod::closed_form};
  std::vector<UnitCircleSet::Entry> scored;
  for (const auto& e : rep.spectrum.entries()) {
    const double ex = fitted_exponent(g, e.angle, s);
    scored.push_back({e.angle, ex});
    rep.per_angle.push_back({e.angle, ex});
  }
  rep.spectrum = UnitCircleSet::from_candidates(scored, s.angular_resolution());
  return rep;
}

/// Pole-order scan on the equispaced angle grid using the outside Neumann
/// series. For each start point and delta, the translates are folded modulo
/// the angle grid so that all angles come from one length-J DFT.
inline SpectrumReport circular_spectrum(const GridFunction& g, const ResolventSettings& s = {}) {
  s.validate();
  if (g.window_length() < 2.0 * static_cast<double>(s.max_terms))
    fail(ErrorCode::WindowTooShort, "grid window shorter than 2 * max_terms");
  const std::size_t spu = detail::steps_per_unit(g);
  const double gnorm = sup_norm(g);
  const std::size_t J = static_cast<std::size_t>(s.angle_grid);
  const std::size_t nd = s.radial_deltas.size();

  std::vector<cplx> twiddle(J);
  for (std::size_t m = 0; m < J; ++m) twiddle[m] = std::polar(1.0, -kTwoPi * static_cast<double>(m) / static_cast<double>(J));

  std::vector<std::size_t> terms(nd);
  std::size_t reach = 0;
  for (std::size_t k = 0; k < nd; ++k) {
    terms[k] = detail::neumann_terms(gnorm, 1.0 + s.radial_deltas[k], s);
    reach = std::max(reach, terms[k]);
  }
  const auto starts = detail::grid_probe_indices(g, spu, s.grid_probes, Approach::outside, reach);

  // norms[k][j]: sup over start points of |R((1+delta_k) e^{i theta_j}) g|
  std::vector<std::vector<double>> norms(nd, std::vector<double>(J, 0.0));
  std::vector<std::vector<std::vector<double>>> partial(nd, std::vector<std::vector<double>>(starts.size()));
  parallel_for(nd * starts.size(), [&](std::size_t job) {
    const std::size_t k = job / starts.size();
    const std::size_t p = job % starts.size();
    const double inv_r = 1.0 / (1.0 + s.radial_deltas[k]);
    std::vector<CVector> fold(J, CVector::Zero(g.dim()));
    double w = inv_r;
    for (std::size_t n = 0; n <= terms[k]; ++n) {
      fold[(n + 1) % J] += w * g.sample(starts[p] + n * spu);
      w *= inv_r;
    }
    std::vector<double> out(J);
    CVector acc(g.dim());
    for (std::size_t j = 0; j < J; ++j) {
      acc.setZero();
      for (std::size_t r = 0; r < J; ++r) acc += twiddle[(j * r) % J] * fold[r];
      out[j] = acc.norm();
    }
    partial[k][p] = std::move(out);
  });
  for (std::size_t k = 0; k < nd; ++k)
    for (const auto& row : partial[k])
      for (std::size_t j = 0; j < J; ++j) norms[k][j] = std::max(norms[k][j], row[j]);

  SpectrumReport rep{UnitCircleSet(s.angular_resolution()), {}, SpectrumMethod::neumann};
  std::vector<bool> flagged(J);
  std::vector<double> exps(J);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> col(nd);
    for (std::size_t k = 0; k < nd; ++k) col[k] = norms[k][j];
    exps[j] = detail::fit_exponent(s.radial_deltas, col);
    flagged[j] = exps[j] >= s.blowup_threshold;
    rep.per_angle.push_back({kTwoPi * static_cast<double>(j) / static_cast<double>(J), exps[j]});
  }

  // one detection per contiguous run, refined to the peak of the smallest-delta norm
  const double res = s.angular_resolution();
  const double dmin = s.radial_deltas.back();
  auto peak_norm = [&](double theta) {
    const cplx lambda = std::polar(1.0 + dmin, theta);
    double best = 0.0;
    for (std::size_t i0 : starts) best = std::max(best, detail::neumann_sum(g, spu, i0, lambda, terms.back()).norm());
    return best;
  };
  std::vector<UnitCircleSet::Entry> found;
  for (const auto& run : detail::flagged_runs(flagged, true)) {
    std::size_t best = run.front();
    for (std::size_t j : run)
      if (norms[nd - 1][j] > norms[nd - 1][best]) best = j;
    const double theta0 = kTwoPi * static_cast<double>(best) / static_cast<double>(J);
    const double theta = wrap_angle(detail::golden_max(peak_norm, theta0 - res, theta0 + res, 1e-9));
    const double ex = std::max(exps[best], fitted_exponent(g, theta, s));
    found.push_back({theta, ex});
  }
  rep.spectrum = UnitCircleSet::from_candidates(found, res);
  return rep;
}

// ---------------------------------------------------------------------------
// Carleman transform and spectrum

struct CarlemanValue {
  CVector value;
  double tail_bound = 0.0;
  double horizon_used = 0.0;
  bool truncated = false;
};

/// Laplace-type closed form  sum_k a_k / (lambda - i w_k), valid off iR.
inline CVector carleman_closed_form(const TrigPolynomial& u, cplx lambda) {
  if (lambda.real() == 0.0) fail(ErrorCode::LambdaOnImaginaryAxis, "Re lambda = 0");
  CVector v = CVector::Zero(u.dim());
  for (const auto& m : u.modes()) v += m.coeff / (lambda - kI * m.omega);
  return v;
}

namespace detail {

/// Composite Simpson on n (even) intervals of [0, H].
template <typename F>
CVector simpson(F&& f, double horizon, std::size_t n, int dim) {
  if (n % 2) ++n;
  const double h = horizon / static_cast<double>(n);
  CVector acc = f(0.0) + f(horizon);
  CVector odd = CVector::Zero(dim), even = CVector::Zero(dim);
  for (std::size_t i = 1; i < n; ++i) (i % 2 ? odd : even) += f(static_cast<double>(i) * h);
  acc += 4.0 * odd + 2.0 * even;
  return acc * (h / 3.0);
}

/// Composite Simpson weights for samples y_0..y_m with step h (3/8 rule on the
/// last three intervals when m is odd).
inline std::vector<double> simpson_weights(std::size_t m, double h) {
  std::vector<double> w(m + 1, 0.0);
  if (m == 0) return w;
  if (m == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  const std::size_t even_end = (m % 2 == 0) ? m : m - 3;
  for (std::size_t i = 0; i + 2 <= even_end; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  if (m % 2 == 1) {
    const std::size_t i = m - 3;
    w[i] += 3.0 * h / 8.0;
    w[i + 1] += 9.0 * h / 8.0;
    w[i + 2] += 9.0 * h / 8.0;
    w[i + 3] += 3.0 * h / 8.0;
  }
  return w;
}

}  // namespace detail

/// Truncated Carleman transform by composite Simpson quadrature on [0, horizon].
inline CarlemanValue carleman_transform(const TrigPolynomial& u, cplx lambda, double horizon = 50.0) {
  if (lambda.real() == 0.0) fail(ErrorCode::LambdaOnImaginaryAxis, "Re lambda = 0");
  require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  double wmax = 0.0;
  for (const auto& m : u.modes()) wmax = std::max(wmax, std::fabs(m.omega));
  // h * (|lambda| + w_max) <= 0.01 keeps the Simpson error near 1e-10 |u|
  const double rate = std::abs(lambda) + wmax;
  const auto n = static_cast<std::size_t>(std::ceil(horizon * rate / 0.01)) + 2;
  CarlemanValue out;
  const double re = lambda.real();
  if (re > 0.0) {
    out.value = detail::simpson([&](double t) { return CVector(std::exp(-lambda * t) * u(t)); }, horizon, n, u.dim());
  } else {
    out.value = -detail::simpson([&](double t) { return CVector(std::exp(lambda * t) * u(-t)); }, horizon, n, u.dim());
  }
  out.horizon_used = horizon;
  out.tail_bound = u.coeff_norm_sum() * std::exp(-std::fabs(re) * horizon) / std::fabs(re);
  return out;
}

/// Grid version: integrates to the window edge when the window is shorter
/// than the horizon, and flags the truncation. t = 0 must be a grid point.
inline CarlemanValue carleman_transform(const GridFunction& u, cplx lambda, double horizon = 50.0,
                                        double u_norm = -1.0) {
  if (lambda.real() == 0.0) fail(ErrorCode::LambdaOnImaginaryAxis, "Re lambda = 0");
  require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  const auto i0 = u.index_of(0.0);
  if (!i0) fail(ErrorCode::WindowOutOfDomain, "t = 0 must be a grid point of the window");
  const double re = lambda.real();
  const auto want = static_cast<std::size_t>(std::floor(horizon / u.dt() + 1e-9));
  const std::size_t avail = re > 0.0 ? std::min(want, u.size() - 1 - *i0) : std::min(want, *i0);
  // e^{-+lambda k dt} by recurrence, with Simpson weights applied on the fly
  const cplx z = re > 0.0 ? std::exp(-lambda * u.dt()) : std::exp(lambda * u.dt());
  const auto weights = detail::simpson_weights(avail, u.dt());
  CVector acc = CVector::Zero(u.dim());
  cplx e = 1.0;
  for (std::size_t k = 0; k <= avail; ++k) {
    acc += (weights[k] * e) * u.sample(re > 0.0 ? *i0 + k : *i0 - k);
    e *= z;
  }
  CarlemanValue out;
  out.value = re < 0.0 ? CVector(-acc) : acc;
  out.horizon_used = static_cast<double>(avail) * u.dt();
  out.truncated = avail < want;
  out.tail_bound = (u_norm >= 0.0 ? u_norm : sup_norm(u)) * std::exp(-std::fabs(re) * out.horizon_used) / std::fabs(re);
  return out;
}

struct CarlemanSettings {
  double freq_min = -10.0;
  double freq_max = 10.0;
  double freq_step = kTwoPi / 720.0;
  double horizon = 50.0;
  std::vector<double> radial_deltas{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  double blowup_threshold = 0.5;
  // Grid inputs: when delta_min * horizon < 5 the truncated transform
  // saturates before the pole shows, so the ladder is scaled up until it fits.
  bool adapt_to_window = true;
};

struct CarlemanReport {
  std::vector<double> frequencies;
  std::vector<double> exponents;
  SpectrumMethod method = SpectrumMethod::closed_form;
  bool truncated = false;
  std::vector<double> radial_deltas;  // ladder actually used
  double horizon_used = 0.0;
};

namespace detail {

template <typename NormAt>
CarlemanReport carleman_scan(NormAt&& norm_at, const CarlemanSettings& cs) {
  require(cs.freq_max > cs.freq_min && cs.freq_step > 0.0, ErrorCode::InvalidArgument, "bad frequency range");
  const auto n = static_cast<std::size_t>(std::floor((cs.freq_max - cs.freq_min) / cs.freq_step)) + 1;
  const std::size_t nd = cs.radial_deltas.size();
  std::vector<std::vector<double>> norms(n, std::vector<double>(nd));
  parallel_for(n, [&](std::size_t i) {
    const double xi = cs.freq_min + static_cast<double>(i) * cs.freq_step;
    for (std::size_t k = 0; k < nd; ++k) norms[i][k] = norm_at(cs.radial_deltas[k], xi);
  });
  std::vector<bool> flagged(n);
  std::vector<double> exps(n);
  for (std::size_t i = 0; i < n; ++i) {
    exps[i] = fit_exponent(cs.radial_deltas, norms[i]);
    flagged[i] = exps[i] >= cs.blowup_threshold;
  }
  CarlemanReport rep;
  const double dmin = cs.radial_deltas.back();
  for (const auto& run : flagged_runs(flagged, false)) {
    std::size_t best = run.front();
    for (std::size_t i : run)
      if (norms[i][nd - 1] > norms[best][nd - 1]) best = i;
    const double xi0 = cs.freq_min + static_cast<double>(best) * cs.freq_step;
    const double xi = golden_max([&](double x) { return norm_at(dmin, x); }, xi0 - cs.freq_step, xi0 + cs.freq_step);
    rep.frequencies.push_back(xi);
    rep.exponents.push_back(exps[best]);
  }
  return rep;
}

}  // namespace detail

/// Carleman spectrum: xi is flagged when |u^(delta+i xi)| + |u^(-delta+i xi)|
/// blows up like delta^{-s} with s >= threshold.
inline CarlemanReport carleman_spectrum(const TrigPolynomial& u, const CarlemanSettings& cs = {}) {
  auto norm_at = [&](double delta, double xi) {
    return carleman_closed_form(u, cplx(delta, xi)).norm() + carleman_closed_form(u, cplx(-delta, xi)).norm();
  };
  auto rep = detail::carleman_scan(norm_at, cs);
  rep.method = SpectrumMethod::closed_form;
  rep.radial_deltas = cs.radial_deltas;
  return rep;
}

inline CarlemanReport carleman_spectrum(const GridFunction& u, const CarlemanSettings& cs_in = {}) {
  CarlemanSettings cs = cs_in;
  const auto i0 = u.index_of(0.0);
  if (!i0) fail(ErrorCode::WindowOutOfDomain, "t = 0 must be a grid point of the window");
  const double reach =
      std::min(static_cast<double>(*i0), static_cast<double>(u.size() - 1 - *i0)) * u.dt();
  const double horizon = std::min(cs.horizon, reach);
  require(horizon > 0.0, ErrorCode::WindowTooShort, "window does not extend to both sides of t = 0");
  if (cs.adapt_to_window && !cs.radial_deltas.empty()) {
    const double dmin = *std::min_element(cs.radial_deltas.begin(), cs.radial_deltas.end());
    if (dmin * horizon < 5.0)
      for (double& d : cs.radial_deltas) d *= 5.0 / (dmin * horizon);
  }
  std::atomic<bool> truncated{false};
  const double un = sup_norm(u);
  auto norm_at = [&](double delta, double xi) {
    const auto plus = carleman_transform(u, cplx(delta, xi), horizon, un);
    const auto minus = carleman_transform(u, cplx(-delta, xi), horizon, un);
    if (plus.truncated || minus.truncated) truncated = true;
    return plus.value.norm() + minus.value.norm();
  };
  auto rep = detail::carleman_scan(norm_at, cs);
  rep.method = SpectrumMethod::neumann;
  rep.truncated = truncated.load() || horizon < cs.horizon;
  rep.radial_deltas = cs.radial_deltas;
  rep.horizon_used = horizon;
  return rep;
}

struct SpectraComparison {
  SpectrumReport circular;
  CarlemanReport carleman;
  UnitCircleSet mapped;  // {e^{i xi} : xi in sp(g)}
  double hausdorff = 0.0;
  bool consistent = false;
};

/// Checks sigma(g) = closure(e^{i sp(g)}) for a trig polynomial.
inline SpectraComparison compare_spectra(const TrigPolynomial& g, const ResolventSettings& s = {}) {
  SpectraComparison out;
  out.circular = circular_spectrum(g, s);
  double wmax = 0.0;
  for (const auto& m : g.modes()) wmax = std::max(wmax, std::fabs(m.omega));
  CarlemanSettings cs;
  cs.freq_max = std::max(wmax + 1.0, std::numbers::pi);
  cs.freq_min = -cs.freq_max;
  cs.freq_step = s.angular_resolution();
  cs.radial_deltas = s.radial_deltas;
  cs.blowup_threshold = s.blowup_threshold;
  out.carleman = carleman_spectrum(g, cs);
  std::vector<UnitCircleSet::Entry> mapped;
  for (std::size_t i = 0; i < out.carleman.frequencies.size(); ++i)
    mapped.push_back({wrap_angle(out.carleman.frequencies[i]), out.carleman.exponents[i]});
  out.mapped = UnitCircleSet::from_candidates(mapped, s.angular_resolution());
  out.hausdorff = hausdorff_angular_distance(out.circular.spectrum, out.mapped);
  out.consistent = out.hausdorff < s.angular_resolution();
  return out;
}

}  // namespace circspec
