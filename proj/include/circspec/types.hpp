#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <concepts>
#include <numbers>

namespace circspec {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

// Frequencies closer than this are the same mode.
inline constexpr double kFreqTol = 1e-9;

/// Anything that can be evaluated pointwise as a C^d-valued function of time.
template <typename F>
concept TimeFunction = requires(const F& f, double t) {
  { f(t) } -> std::convertible_to<CVector>;
  { f.dim() } -> std::convertible_to<int>;
};

/// Reduce an angle to [0, 2pi).
inline double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// Shortest distance between two angles on the circle.
inline double circular_distance(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

inline cplx unit(double theta) { return std::polar(1.0, theta); }

/// True when omega is an integer multiple of 2pi (period-1 frequencies).
inline bool is_period_one_frequency(double omega, double tol = 1e-9) {
  double k = std::round(omega / kTwoPi);
  return std::fabs(omega - k * kTwoPi) <= tol * std::max(1.0, std::fabs(omega));
}

}  // namespace circspec
