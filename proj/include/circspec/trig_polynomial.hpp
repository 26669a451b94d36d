#pragma once

#include "circspec/error.hpp"
#include "circspec/types.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace circspec {

/// Finite sum  g(t) = sum_k a_k e^{i w_k t}  with a_k in C^d.
///
/// Modes are kept sorted by frequency. Frequencies closer than freq_tol are
/// merged by summing their coefficients, and modes whose coefficient is
/// exactly zero are dropped, so an empty mode list is the zero function.
class TrigPolynomial {
 public:
  struct Mode {
    double omega;
    CVector coeff;
  };

  TrigPolynomial() : TrigPolynomial(1) {}

  explicit TrigPolynomial(int dim, std::vector<Mode> modes = {}, double freq_tol = kFreqTol)
      : dim_(dim), modes_(std::move(modes)) {
    require(dim_ > 0, ErrorCode::InvalidArgument, "TrigPolynomial dim must be positive");
    for (const auto& m : modes_) {
      require(m.coeff.size() == dim_, ErrorCode::InvalidArgument,
              "TrigPolynomial mode coefficient has wrong dimension");
      require(std::isfinite(m.omega), ErrorCode::InvalidArgument, "non-finite frequency");
    }
    normalize(freq_tol);
  }

  static TrigPolynomial zero(int dim) { return TrigPolynomial(dim); }

  static TrigPolynomial constant(const CVector& value) {
    return TrigPolynomial(static_cast<int>(value.size()), {{0.0, value}});
  }

  static TrigPolynomial single(double omega, const CVector& coeff) {
    return TrigPolynomial(static_cast<int>(coeff.size()), {{omega, coeff}});
  }

  static TrigPolynomial scalar(std::vector<std::pair<double, cplx>> terms) {
    std::vector<Mode> modes;
    modes.reserve(terms.size());
    for (auto [w, c] : terms) {
      CVector v(1);
      v(0) = c;
      modes.push_back({w, v});
    }
    return TrigPolynomial(1, std::move(modes));
  }

  int dim() const { return dim_; }
  const std::vector<Mode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }
  bool is_zero() const { return modes_.empty(); }

  std::vector<double> frequencies() const {
    std::vector<double> out;
    out.reserve(modes_.size());
    for (const auto& m : modes_) out.push_back(m.omega);
    return out;
  }

  CVector operator()(double t) const {
    CVector v = CVector::Zero(dim_);
    for (const auto& m : modes_) v += m.coeff * std::polar(1.0, m.omega * t);
    return v;
  }

  /// Upper bound on the sup norm over the real line.
  double coeff_norm_sum() const {
    double s = 0.0;
    for (const auto& m : modes_) s += m.coeff.norm();
    return s;
  }

  /// S(tau): t -> g(t + tau).
  TrigPolynomial translated(double tau) const {
    TrigPolynomial out = *this;
    for (auto& m : out.modes_) m.coeff *= std::polar(1.0, m.omega * tau);
    return out;
  }

  /// t -> g(scale * t).
  TrigPolynomial time_scaled(double scale) const {
    std::vector<Mode> modes = modes_;
    for (auto& m : modes) m.omega *= scale;
    return TrigPolynomial(dim_, std::move(modes));
  }

  /// Conjugate-symmetric trig polynomial whose values are Re g(t).
  TrigPolynomial real_part() const {
    std::vector<Mode> modes;
    modes.reserve(2 * modes_.size());
    for (const auto& m : modes_) {
      modes.push_back({m.omega, 0.5 * m.coeff});
      modes.push_back({-m.omega, 0.5 * m.coeff.conjugate()});
    }
    return TrigPolynomial(dim_, std::move(modes));
  }

  /// Component i as a scalar trig polynomial.
  TrigPolynomial component(int i) const {
    std::vector<Mode> modes;
    for (const auto& m : modes_) {
      CVector v(1);
      v(0) = m.coeff(i);
      modes.push_back({m.omega, v});
    }
    return TrigPolynomial(1, std::move(modes));
  }

  TrigPolynomial& operator+=(const TrigPolynomial& o) {
    require(o.dim_ == dim_, ErrorCode::InvalidArgument, "TrigPolynomial dimension mismatch");
    modes_.insert(modes_.end(), o.modes_.begin(), o.modes_.end());
    normalize(kFreqTol);
    return *this;
  }

  friend TrigPolynomial operator+(TrigPolynomial a, const TrigPolynomial& b) { return a += b; }

  friend TrigPolynomial operator*(cplx s, TrigPolynomial g) {
    for (auto& m : g.modes_) m.coeff *= s;
    g.normalize(kFreqTol);
    return g;
  }

  friend TrigPolynomial operator-(const TrigPolynomial& a, const TrigPolynomial& b) {
    return a + cplx(-1.0) * b;
  }

  /// Pointwise multiplication by a constant matrix, t -> A g(t).
  friend TrigPolynomial operator*(const CMatrix& a, const TrigPolynomial& g) {
    require(a.cols() == g.dim_, ErrorCode::InvalidArgument, "matrix/function dimension mismatch");
    std::vector<Mode> modes;
    modes.reserve(g.modes_.size());
    for (const auto& m : g.modes_) modes.push_back({m.omega, a * m.coeff});
    return TrigPolynomial(static_cast<int>(a.rows()), std::move(modes));
  }

 private:
  void normalize(double freq_tol) {
    std::stable_sort(modes_.begin(), modes_.end(),
                     [](const Mode& a, const Mode& b) { return a.omega < b.omega; });
    std::vector<Mode> merged;
    merged.reserve(modes_.size());
    double last = 0.0;
    for (auto& m : modes_) {
      const double w = m.omega;
      if (!merged.empty() && std::fabs(w - last) <= freq_tol) {
        merged.back().coeff += m.coeff;
      } else {
        merged.push_back(std::move(m));
      }
      last = w;  // chain merge against the previous raw frequency
    }
    std::erase_if(merged, [](const Mode& m) { return m.coeff.squaredNorm() == 0.0; });
    modes_ = std::move(merged);
  }

  int dim_;
  std::vector<Mode> modes_;
};

}  // namespace circspec
