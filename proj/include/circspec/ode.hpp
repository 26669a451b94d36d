#pragma once

#include "circspec/error.hpp"
#include "circspec/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace circspec {

struct OdeSettings {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = 0.25;
  double min_step = 1e-13;
};

struct OdeResult {
  CMatrix x;
  double err_est = 0.0;  // sum of accepted local error estimates
  std::size_t steps = 0;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

/// Integrates X' = rhs(t, X) from t0 to t1 > t0 with adaptive DOPRI5.
/// Steps are clipped so every time in `stops` (sorted, inside (t0, t1]) is
/// hit exactly, and on_stop(i, X) is called there.
template <typename Rhs, typename OnStop>
OdeResult integrate_matrix(Rhs&& rhs, double t0, CMatrix x, double t1, const OdeSettings& s,
                           const std::vector<double>& stops, OnStop&& on_stop) {
  using T = detail::Dopri5;
  OdeResult out;
  require(t1 >= t0, ErrorCode::TimeReversed, "integration interval is reversed");
  std::size_t next_stop = 0;
  while (next_stop < stops.size() && stops[next_stop] <= t0) {
    on_stop(next_stop, x);
    ++next_stop;
  }
  if (t1 == t0) {
    out.x = std::move(x);
    return out;
  }

  double t = t0;
  double h = std::min({s.max_step, t1 - t0, 0.01});
  CMatrix k1 = rhs(t, x);
  const double span = std::max(1.0, std::fabs(t1));
  while (t < t1) {
    double target = t1;
    if (next_stop < stops.size()) target = std::min(target, stops[next_stop]);
    bool clipped = false;
    double step = h;
    if (t + step >= target - 1e-14 * span) {
      step = target - t;
      clipped = true;
    }

    const CMatrix k2 = rhs(t + T::c2 * step, x + step * (T::a21 * k1));
    const CMatrix k3 = rhs(t + T::c3 * step, x + step * (T::a31 * k1 + T::a32 * k2));
    const CMatrix k4 = rhs(t + T::c4 * step, x + step * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3));
    const CMatrix k5 = rhs(t + T::c5 * step, x + step * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4));
    const CMatrix k6 =
        rhs(t + step, x + step * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5));
    const CMatrix xn = x + step * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
    const CMatrix k7 = rhs(t + step, xn);
    const CMatrix err = step * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);

    double ratio = 0.0;
    for (Eigen::Index j = 0; j < err.cols(); ++j)
      for (Eigen::Index i = 0; i < err.rows(); ++i) {
        const double sc = s.atol + s.rtol * std::max(std::abs(x(i, j)), std::abs(xn(i, j)));
        ratio = std::max(ratio, std::abs(err(i, j)) / sc);
      }
    if (!std::isfinite(ratio)) ratio = 1e10;

    if (ratio <= 1.0) {
      t = clipped ? target : t + step;
      x = xn;
      k1 = k7;
      out.err_est += err.cwiseAbs().maxCoeff();
      ++out.steps;
      while (next_stop < stops.size() && stops[next_stop] <= t) {
        on_stop(next_stop, x);
        ++next_stop;
      }
      const double grow = ratio == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(ratio, -0.2));
      // a clipped step says nothing about the natural step size
      h = std::min(s.max_step, clipped ? std::max(h, step * grow) : step * grow);
    } else {
      h = step * std::max(0.2, 0.9 * std::pow(ratio, -0.2));
      if (h < s.min_step)
        fail(ErrorCode::IntegrationFailure, "step size underflow at t=" + std::to_string(t));
    }
  }
  out.x = std::move(x);
  return out;
}

template <typename Rhs>
OdeResult integrate_matrix(Rhs&& rhs, double t0, CMatrix x, double t1, const OdeSettings& s) {
  return integrate_matrix(std::forward<Rhs>(rhs), t0, std::move(x), t1, s, {}, [](std::size_t, const CMatrix&) {});
}

}  // namespace circspec
