#pragma once

#include "circspec/error.hpp"
#include "circspec/grid_function.hpp"
#include "circspec/trig_polynomial.hpp"
#include "circspec/types.hpp"
#include "circspec/unit_circle_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace circspec {

struct Window {
  double a;
  double b;
  double length() const { return b - a; }
};

inline CVector eval(const TrigPolynomial& f, double t) { return f(t); }

inline TrigPolynomial translate(const TrigPolynomial& g, double tau) { return g.translated(tau); }

/// S(tau) on a grid function. The result lives on the part of the original
/// window where g(t + tau) is known; tau must be a whole number of steps.
inline GridFunction translate(const GridFunction& g, double tau) {
  const double k = std::round(tau / g.dt());
  const double slack = std::max(1e-12 * g.dt(), 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(tau));
  if (std::fabs(tau - k * g.dt()) > slack)
    fail(ErrorCode::NonCommensurateShift,
         "shift " + std::to_string(tau) + " is not a multiple of dt=" + std::to_string(g.dt()));
  const auto n = static_cast<std::ptrdiff_t>(g.size());
  const auto shift = static_cast<std::ptrdiff_t>(k);
  if (std::abs(shift) > n - 2) fail(ErrorCode::WindowTooShort, "shift leaves fewer than 2 samples");

  std::vector<CVector> out;
  double t0 = g.t0();
  if (shift >= 0) {
    out.assign(g.samples().begin() + shift, g.samples().end());
  } else {
    out.assign(g.samples().begin(), g.samples().end() + shift);
    t0 = g.time(static_cast<std::size_t>(-shift));
  }
  return GridFunction(t0, g.dt(), std::move(out));
}

/// Sup of the Euclidean norm over the probe lattice {k dt_probe} in the window,
/// plus both endpoints. Larger windows probe a superset of points.
inline double sup_norm(const TrigPolynomial& g, Window w, double dt_probe) {
  require(w.b >= w.a, ErrorCode::InvalidArgument, "empty window");
  require(dt_probe > 0.0, ErrorCode::InvalidArgument, "dt_probe must be positive");
  double best = std::max(g(w.a).norm(), g(w.b).norm());
  const auto k0 = static_cast<long long>(std::ceil(w.a / dt_probe));
  const auto k1 = static_cast<long long>(std::floor(w.b / dt_probe));
  for (long long k = k0; k <= k1; ++k) best = std::max(best, g(static_cast<double>(k) * dt_probe).norm());
  return best;
}

/// Sup over the samples that fall inside the window.
inline double sup_norm(const GridFunction& g, Window w, double /*dt_probe*/ = 0.0) {
  require(w.b >= w.a, ErrorCode::InvalidArgument, "empty window");
  if (!g.contains(w.a) || !g.contains(w.b))
    fail(ErrorCode::WindowOutOfDomain, "sup_norm window is not inside the grid window");
  double best = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g.time(i);
    if (t >= w.a - 1e-9 * g.dt() && t <= w.b + 1e-9 * g.dt()) best = std::max(best, g.sample(i).norm());
  }
  return best;
}

inline double sup_norm(const GridFunction& g) {
  double best = 0.0;
  for (const auto& s : g.samples()) best = std::max(best, s.norm());
  return best;
}

/// Levitan's almost automorphic, not uniformly continuous function
/// sin(1 / (2 + cos t + cos sqrt(2) t)).
inline double levitan_value(double t) {
  return std::sin(1.0 / (2.0 + std::cos(t) + std::cos(std::numbers::sqrt2 * t)));
}

inline GridFunction make_levitan(Window w, double dt) {
  require(dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
  require(w.b > w.a, ErrorCode::InvalidArgument, "empty window");
  const auto n = static_cast<std::size_t>(std::floor(w.length() / dt + 1e-9)) + 1;
  std::vector<CVector> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CVector v(1);
    v(0) = levitan_value(w.a + static_cast<double>(i) * dt);
    samples.push_back(v);
  }
  return GridFunction(w.a, dt, std::move(samples));
}

}  // namespace circspec
