#pragma once

#include "circspec/error.hpp"
#include "circspec/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace circspec {

/// Uniformly sampled C^d-valued function on the window [t0, t0 + (n-1) dt].
///
/// There is no periodic extension: any evaluation outside the window throws
/// WindowOutOfDomain.
class GridFunction {
 public:
  GridFunction(double t0, double dt, std::vector<CVector> samples)
      : t0_(t0), dt_(dt), samples_(std::move(samples)) {
    require(dt_ > 0.0 && std::isfinite(dt_), ErrorCode::InvalidArgument, "GridFunction dt must be > 0");
    require(samples_.size() >= 2, ErrorCode::InvalidArgument, "GridFunction needs at least 2 samples");
    dim_ = static_cast<int>(samples_.front().size());
    require(dim_ > 0, ErrorCode::InvalidArgument, "GridFunction samples must be non-empty vectors");
    for (const auto& s : samples_)
      require(s.size() == dim_, ErrorCode::InvalidArgument, "GridFunction samples differ in dimension");
  }

  template <TimeFunction F>
  static GridFunction sample(const F& f, double t0, double dt, std::size_t n) {
    std::vector<CVector> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) samples.push_back(f(t0 + static_cast<double>(i) * dt));
    return GridFunction(t0, dt, std::move(samples));
  }

  int dim() const { return dim_; }
  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t size() const { return samples_.size(); }
  double t_end() const { return time(samples_.size() - 1); }
  double window_length() const { return static_cast<double>(samples_.size() - 1) * dt_; }
  double time(std::size_t i) const { return t0_ + static_cast<double>(i) * dt_; }
  const CVector& sample(std::size_t i) const { return samples_[i]; }
  const std::vector<CVector>& samples() const { return samples_; }

  bool contains(double t) const {
    const double slack = 1e-9 * dt_;
    return t >= t0_ - slack && t <= t_end() + slack;
  }

  /// Index of the grid point at t, if t lies on the lattice inside the window.
  std::optional<std::size_t> index_of(double t) const {
    const double x = (t - t0_) / dt_;
    const double k = std::round(x);
    if (std::fabs(x - k) > 1e-7 || k < 0.0 || k > static_cast<double>(samples_.size() - 1)) return std::nullopt;
    return static_cast<std::size_t>(k);
  }

  /// Exact sample lookup; t must be a grid point.
  const CVector& at(double t) const {
    const double x = (t - t0_) / dt_;
    const double k = std::round(x);
    if (std::fabs(x - k) > 1e-7)
      fail(ErrorCode::NonCommensurateShift, "time " + std::to_string(t) + " is not a grid point");
    if (k < 0.0 || k > static_cast<double>(samples_.size() - 1))
      fail(ErrorCode::WindowOutOfDomain, "time " + std::to_string(t) + " is outside the grid window");
    return samples_[static_cast<std::size_t>(k)];
  }

  /// Four-point Lagrange interpolation; exact at grid points.
  CVector operator()(double t) const {
    if (!contains(t))
      fail(ErrorCode::WindowOutOfDomain, "time " + std::to_string(t) + " is outside the grid window");
    if (auto idx = index_of(t)) return samples_[*idx];
    const std::size_t n = samples_.size();
    const double x = (t - t0_) / dt_;
    std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(x)) - 1;
    const std::ptrdiff_t width = std::min<std::ptrdiff_t>(4, static_cast<std::ptrdiff_t>(n));
    i0 = std::clamp<std::ptrdiff_t>(i0, 0, static_cast<std::ptrdiff_t>(n) - width);
    CVector v = CVector::Zero(dim_);
    for (std::ptrdiff_t j = 0; j < width; ++j) {
      double w = 1.0;
      for (std::ptrdiff_t m = 0; m < width; ++m)
        if (m != j) w *= (x - static_cast<double>(i0 + m)) / static_cast<double>(j - m);
      v += w * samples_[static_cast<std::size_t>(i0 + j)];
    }
    return v;
  }

 private:
  double t0_;
  double dt_;
  std::vector<CVector> samples_;
  int dim_ = 0;
};

}  // namespace circspec
