#pragma once

#include "circspec/error.hpp"
#include "circspec/process.hpp"
#include "circspec/solver.hpp"
#include "circspec/trig_polynomial.hpp"
#include "circspec/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace circspec {

/// Truncated frequency module: all sum_k n_k b_k + 2 pi m with sum |n_k| <= order
/// and |m| <= m_cap, for base frequencies b_k.
class FrequencyModule {
 public:
  FrequencyModule() = default;

  /// Base frequencies are the given ones that are not multiples of 2 pi,
  /// deduplicated up to sign.
  static FrequencyModule generate(const std::vector<double>& freqs, int order = 3, int m_cap = 3,
                                  std::size_t max_modes = 4096, double tol = 1e-8) {
    require(order >= 1 && m_cap >= 0, ErrorCode::InvalidArgument, "module order must be >= 1 and m_cap >= 0");
    FrequencyModule mod;
    mod.order_ = order;
    mod.m_cap_ = m_cap;
    mod.tol_ = tol;
    for (double w : freqs) {
      if (is_period_one_frequency(w, 1e-12)) continue;
      const bool seen = std::any_of(mod.base_.begin(), mod.base_.end(),
                                    [&](double b) { return std::fabs(b - w) <= tol || std::fabs(b + w) <= tol; });
      if (!seen) mod.base_.push_back(w);
    }
    std::vector<double> combos{0.0};
    std::vector<int> weight{0};
    // breadth-first over coefficient vectors, one base frequency at a time
    for (double b : mod.base_) {
      std::vector<double> next;
      std::vector<int> next_w;
      for (std::size_t i = 0; i < combos.size(); ++i)
        for (int n = -order; n <= order; ++n) {
          const int wsum = weight[i] + std::abs(n);
          if (wsum > order) continue;
          next.push_back(combos[i] + n * b);
          next_w.push_back(wsum);
        }
      combos = std::move(next);
      weight = std::move(next_w);
      if (combos.size() * static_cast<std::size_t>(2 * m_cap + 1) > 64 * max_modes)
        fail(ErrorCode::ModuleOverflow, "frequency module exceeds max_modes");
    }
    for (double c : combos)
      for (int m = -m_cap; m <= m_cap; ++m) mod.members_.push_back(c + kTwoPi * m);
    std::sort(mod.members_.begin(), mod.members_.end());
    std::vector<double> uniq;
    for (double w : mod.members_)
      if (uniq.empty() || w - uniq.back() > tol) uniq.push_back(w);
    mod.members_ = std::move(uniq);
    if (mod.members_.size() > max_modes)
      fail(ErrorCode::ModuleOverflow, "frequency module has " + std::to_string(mod.members_.size()) +
                                          " members, more than max_modes=" + std::to_string(max_modes));
    return mod;
  }

  const std::vector<double>& base() const { return base_; }
  const std::vector<double>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  int order() const { return order_; }
  int m_cap() const { return m_cap_; }

  /// The member within tol of w, if any.
  std::optional<double> snap(double w) const {
    auto it = std::lower_bound(members_.begin(), members_.end(), w - tol_);
    if (it != members_.end() && std::fabs(*it - w) <= tol_) return *it;
    return std::nullopt;
  }

  bool contains(double w) const { return snap(w).has_value(); }

  double max_abs() const {
    return members_.empty() ? 0.0 : std::max(std::fabs(members_.front()), std::fabs(members_.back()));
  }

  /// Keeps the modes of g that lie in the module (with snapped frequencies);
  /// adds the coefficient norms of the others to *dropped.
  TrigPolynomial project(const TrigPolynomial& g, double* dropped = nullptr) const {
    std::vector<TrigPolynomial::Mode> keep;
    double lost = 0.0;
    for (const auto& m : g.modes()) {
      if (auto w = snap(m.omega))
        keep.push_back({*w, m.coeff});
      else
        lost += m.coeff.norm();
    }
    if (dropped) *dropped += lost;
    return TrigPolynomial(g.dim(), std::move(keep));
  }

 private:
  std::vector<double> base_;
  std::vector<double> members_;
  int order_ = 3;
  int m_cap_ = 3;
  double tol_ = 1e-8;
};

/// Product of two scalar trig polynomials.
inline TrigPolynomial multiply_scalar(const TrigPolynomial& a, const TrigPolynomial& b) {
  require(a.dim() == 1 && b.dim() == 1, ErrorCode::InvalidArgument, "multiply_scalar needs scalar factors");
  std::vector<TrigPolynomial::Mode> modes;
  modes.reserve(a.size() * b.size());
  for (const auto& x : a.modes())
    for (const auto& y : b.modes()) {
      CVector c(1);
      c(0) = x.coeff(0) * y.coeff(0);
      modes.push_back({x.omega + y.omega, c});
    }
  return TrigPolynomial(1, std::move(modes));
}

enum class NonlinearityKind { polynomial, heat_quadratic };

inline const char* to_string(NonlinearityKind k) {
  return k == NonlinearityKind::polynomial ? "polynomial" : "heat_quadratic";
}

/// c(t) x^power applied coordinate-wise; c is scalar (shared by all
/// coordinates) or has one component per coordinate.
struct PolyTerm {
  int power;
  TrigPolynomial coeff;
};

/// Nonlinearity H(t, x) with H(t, 0) = 0 and period 1 in t.
class NemytskyMap {
 public:
  static NemytskyMap polynomial(int dim, std::vector<PolyTerm> terms, double period = 1.0) {
    require(dim > 0, ErrorCode::InvalidArgument, "nonlinearity dim must be positive");
    require(period > 0.0, ErrorCode::InvalidArgument, "period must be positive");
    NemytskyMap h;
    h.kind_ = NonlinearityKind::polynomial;
    h.dim_ = dim;
    for (auto& t : terms) {
      require(t.power >= 1, ErrorCode::InvalidArgument, "powers must be >= 1 so that H(t, 0) = 0");
      require(t.coeff.dim() == 1 || t.coeff.dim() == dim, ErrorCode::InvalidArgument,
              "term coefficient must be scalar or match the state dimension");
      t.coeff = cplx(period) * t.coeff.time_scaled(period);
      for (const auto& m : t.coeff.modes())
        require(is_period_one_frequency(m.omega, 1e-9), ErrorCode::InvalidArgument,
                "term coefficient frequencies must be multiples of 2pi/period");
      h.terms_.push_back(std::move(t));
    }
    return h;
  }

  /// b(t) w^2 on the sine-Galerkin basis of a heat system, by collocation on
  /// 4 n_modes midpoints of (0, pi).
  static NemytskyMap heat_quadratic(const PeriodicSystem& sys) {
    require(sys.kind() == SystemKind::heat, ErrorCode::InvalidArgument, "heat_quadratic needs a heat system");
    NemytskyMap h;
    h.kind_ = NonlinearityKind::heat_quadratic;
    h.dim_ = sys.dim();
    h.b_ = sys.heat_params().b;
    const int n = sys.dim();
    const int q = 4 * n;
    h.sines_ = Eigen::MatrixXd(n, q);
    for (int k = 1; k <= n; ++k)
      for (int j = 0; j < q; ++j) h.sines_(k - 1, j) = std::sin(k * std::numbers::pi * (j + 0.5) / q);
    return h;
  }

  NonlinearityKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }
  const TrigPolynomial& b() const { return b_; }

  void set_lip_override(std::vector<double> coeffs) {
    for (double c : coeffs)
      require(c >= 0.0 && std::isfinite(c), ErrorCode::InvalidArgument, "lip coefficients must be nonnegative");
    lip_override_ = std::move(coeffs);
  }

  /// Coefficients c_k of the Lipschitz modulus l(r) = sum_k c_k r^k on the
  /// ball of radius r.
  std::vector<double> lip_coeffs() const {
    if (!lip_override_.empty()) return lip_override_;
    if (kind_ == NonlinearityKind::heat_quadratic) {
      // |b(w,v)| <= sqrt(n) |w| |v| for the collocation product, so
      // |H(w) - H(v)| <= 2 |b|_inf sqrt(n) r |w - v|
      return {0.0, 2.0 * b_.coeff_norm_sum() * std::sqrt(static_cast<double>(dim_))};
    }
    std::vector<double> c;
    for (const auto& t : terms_) {
      double cp = 0.0;
      for (int i = 0; i < t.coeff.dim(); ++i) cp = std::max(cp, t.coeff.component(i).coeff_norm_sum());
      if (c.size() < static_cast<std::size_t>(t.power)) c.resize(t.power, 0.0);
      c[t.power - 1] += t.power * cp;
    }
    if (c.empty()) c.push_back(0.0);
    return c;
  }

  double lip(double r) const {
    double acc = 0.0, pw = 1.0;
    for (double c : lip_coeffs()) {
      acc += c * pw;
      pw *= r;
    }
    return acc;
  }

  /// Pointwise H(t, x).
  CVector eval(double t, const CVector& x) const {
    require(x.size() == dim_, ErrorCode::InvalidArgument, "state dimension mismatch");
    CVector out = CVector::Zero(dim_);
    if (kind_ == NonlinearityKind::polynomial) {
      for (const auto& term : terms_) {
        const CVector c = term.coeff(t);
        for (int i = 0; i < dim_; ++i) out(i) += c(c.size() == 1 ? 0 : i) * std::pow(x(i), term.power);
      }
      return out;
    }
    const long q = sines_.cols();
    const CVector vals = sines_.transpose().cast<cplx>() * x;
    const CVector sq = vals.cwiseProduct(vals);
    out = (2.0 / static_cast<double>(q)) * (sines_.cast<cplx>() * sq);
    return b_(t)(0) * out;
  }

  const Eigen::MatrixXd& collocation_sines() const { return sines_; }

 private:
  NonlinearityKind kind_ = NonlinearityKind::polynomial;
  int dim_ = 1;
  std::vector<PolyTerm> terms_;
  TrigPolynomial b_;
  Eigen::MatrixXd sines_;
  std::vector<double> lip_override_;
};

struct NemytskyResult {
  TrigPolynomial value;
  double dropped_mass = 0.0;  // bound on the sup norm of discarded terms
};

/// H(t, g(t)) as a trig polynomial, projected onto the module.
inline NemytskyResult nemytsky_apply(const NemytskyMap& H, const TrigPolynomial& g, const FrequencyModule& mod) {
  require(g.dim() == H.dim(), ErrorCode::InvalidArgument, "state dimension mismatch");
  const int d = H.dim();
  NemytskyResult res;
  if (H.kind() == NonlinearityKind::polynomial) {
    std::vector<TrigPolynomial> comps;
    for (int i = 0; i < d; ++i) comps.push_back(g.component(i));
    std::vector<TrigPolynomial> out(d, TrigPolynomial::zero(1));
    for (const auto& term : H.terms()) {
      for (int i = 0; i < d; ++i) {
        const TrigPolynomial ci = term.coeff.component(term.coeff.dim() == 1 ? 0 : i);
        const double s_norm = comps[i].coeff_norm_sum();
        const double c_norm = ci.coeff_norm_sum();
        TrigPolynomial pw = mod.project(comps[i], &res.dropped_mass);
        for (int p = 2; p <= term.power; ++p) {
          double lost = 0.0;
          pw = mod.project(multiply_scalar(pw, comps[i]), &lost);
          // later factors can amplify what was cut here
          res.dropped_mass += lost * c_norm * std::pow(s_norm, term.power - p);
        }
        double lost = 0.0;
        out[i] += mod.project(multiply_scalar(ci, pw), &lost);
        res.dropped_mass += lost;
      }
    }
    std::vector<TrigPolynomial::Mode> modes;
    for (int i = 0; i < d; ++i)
      for (const auto& m : out[i].modes()) {
        CVector v = CVector::Zero(d);
        v(i) = m.coeff(0);
        modes.push_back({m.omega, v});
      }
    res.value = TrigPolynomial(d, std::move(modes));
    return res;
  }

  // collocation: square w(x_j, t) at each point, then project back on sines
  const auto& S = H.collocation_sines();
  const auto q = static_cast<int>(S.cols());
  std::vector<TrigPolynomial::Mode> acc;
  double lost_sq = 0.0;
  for (int j = 0; j < q; ++j) {
    std::vector<TrigPolynomial::Mode> vm;
    for (const auto& m : g.modes()) {
      CVector c(1);
      c(0) = S.col(j).cast<cplx>().dot(m.coeff);
      vm.push_back({m.omega, c});
    }
    const TrigPolynomial v(1, std::move(vm));
    double lost = 0.0;
    const TrigPolynomial sq = mod.project(multiply_scalar(v, v), &lost);
    lost_sq += lost * lost;
    for (const auto& m : sq.modes()) {
      CVector c = (2.0 / q) * m.coeff(0) * S.col(j).cast<cplx>();
      acc.push_back({m.omega, c});
    }
  }
  const TrigPolynomial w2(d, std::move(acc));
  const double b_norm = H.b().coeff_norm_sum();
  std::vector<TrigPolynomial::Mode> prod;
  for (const auto& bm : H.b().modes())
    for (const auto& m : w2.modes()) prod.push_back({bm.omega + m.omega, bm.coeff(0) * m.coeff});
  double lost = 0.0;
  res.value = mod.project(TrigPolynomial(d, std::move(prod)), &lost);
  res.dropped_mass = lost + b_norm * std::sqrt(2.0 / q) * std::sqrt(lost_sq);
  return res;
}

/// Module generated by g's own frequencies, truncated at order_cap.
inline NemytskyResult nemytsky_apply(const NemytskyMap& H, const TrigPolynomial& g, int order_cap = 3,
                                     int m_cap = 3, std::size_t max_modes = 4096) {
  return nemytsky_apply(H, g, FrequencyModule::generate(g.frequencies(), order_cap, m_cap, max_modes));
}

/// Sup-norm estimate used for the cut-off and for M: the lattice of step
/// 1/128 on [0, 20].
inline double function_norm(const TrigPolynomial& g) { return sup_norm(g, {0.0, 20.0}, 1.0 / 128.0); }

/// H_M(g): H(g) inside the ball of radius bound, otherwise H of the radially
/// rescaled g.
inline NemytskyResult cutoff_apply(const NemytskyMap& H, const TrigPolynomial& g, double bound,
                                   const FrequencyModule& mod) {
  require(bound > 0.0, ErrorCode::InvalidArgument, "cut-off bound must be positive");
  const double n = function_norm(g);
  if (n <= bound) return nemytsky_apply(H, g, mod);
  return nemytsky_apply(H, cplx(bound / n) * g, mod);
}

inline NemytskyResult cutoff_apply(const NemytskyMap& H, const TrigPolynomial& g, double bound) {
  return cutoff_apply(H, g, bound, FrequencyModule::generate(g.frequencies()));
}

struct RhoEstimate {
  double rho = 0.0;
  std::vector<double> probe_freqs;
  std::size_t grid_points = 0;
  double argmax_freq = 0.0;
};

/// rho = max over probe frequencies w and grid points t_j of
/// |(I - e^{-iw} P(t_j))^{-1}| |K_w(t_j)|, a lower estimate of the solution
/// operator norm.
inline RhoEstimate estimate_rho(const LinearSolver& ls, const std::vector<double>& freqs) {
  require(!freqs.empty(), ErrorCode::InvalidArgument, "estimate_rho needs probe frequencies");
  ls.check_gap(freqs);
  RhoEstimate out;
  out.probe_freqs = freqs;
  out.grid_points = ls.grid_size();
  for (double w : freqs) {
    const double g = ls.mode_gain(w);
    if (g > out.rho) {
      out.rho = g;
      out.argmax_freq = w;
    }
  }
  return out;
}

inline RhoEstimate estimate_rho(const PeriodicSystem& sys, const std::vector<double>& freqs,
                                const SolverSettings& s = {}) {
  double wmax = 0.0;
  for (double w : freqs) wmax = std::max(wmax, std::fabs(w));
  const LinearSolver ls(sys, s, wmax);
  return estimate_rho(ls, freqs);
}

/// eps_0 = 1 / (4 rho l(2 rho M)); +infinity when l(2 rho M) = 0.
template <typename Modulus>
double epsilon_threshold(double rho, Modulus&& l, double M) {
  require(rho > 0.0 && M > 0.0, ErrorCode::InvalidArgument, "rho and M must be positive");
  const double lv = l(2.0 * rho * M);
  if (lv == 0.0) return std::numeric_limits<double>::infinity();
  require(lv > 0.0, ErrorCode::InvalidArgument, "Lipschitz modulus must be nonnegative");
  return 1.0 / (4.0 * rho * lv);
}

struct PerturbOptions {
  SolverSettings solver;
  int order = 3;
  int m_cap = 3;
  std::size_t max_modes = 4096;
  double picard_tol = 1e-8;
  int max_iterations = 200;
  bool force = false;
  double resid_tol = 1e-6;
  double drop_tol = 1e-14;  // relative pruning of envelope harmonics
  std::optional<TrigPolynomial> initial_offset;
};

struct PerturbReport {
  double rho = 0.0;
  double M = 0.0;
  double epsilon = 0.0;
  double epsilon_0 = 0.0;
  double lip_at_bound = 0.0;  // l(2 rho M)
  int iterations = 0;
  double contraction_factor = 0.0;
  double final_norm = 0.0;
  double bound = 0.0;  // 2 rho M
  bool bound_ok = false;
  bool cutoff_active = false;
  double inverse_bound = 0.0;  // M / (1/rho - 2 eps l(2 rho M))
  double residual = 0.0;
  double dropped_mass = 0.0;
  std::size_t module_size = 0;
  std::vector<double> step_norms;
  RhoEstimate rho_probe;
  bool certified = false;
};

struct PerturbResult {
  MildSolution w;
  PerturbReport report;
};

namespace detail {

inline double grid_step_norm(const TrigPolynomial& a, const TrigPolynomial& b, std::size_t m, double periods) {
  double best = 0.0;
  const auto n = static_cast<std::size_t>(periods * static_cast<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(m);
    best = std::max(best, (a(t) - b(t)).norm());
  }
  return best;
}

}  // namespace detail

/// Bounded mild solution of u' = A(t) u + f(t) + eps H(t, u) by Picard
/// iteration of w -> L^{-1}(f + eps H_M(w)).
inline PerturbResult solve_perturbed(const PeriodicSystem& sys, const TrigPolynomial& f, const NemytskyMap& H,
                                     double epsilon, const PerturbOptions& opts = {}) {
  require(H.dim() == sys.dim() && f.dim() == sys.dim(), ErrorCode::InvalidArgument, "dimension mismatch");
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorCode::InvalidArgument, "epsilon must be nonnegative");
  PerturbResult out;
  auto& rep = out.report;
  rep.epsilon = epsilon;

  const auto mod = FrequencyModule::generate(f.frequencies(), opts.order, opts.m_cap, opts.max_modes);
  rep.module_size = mod.size();
  SolverSettings ss = opts.solver;
  ss.certify = false;
  const LinearSolver ls(sys, ss, std::max(mod.max_abs(), max_abs_frequency(f)));

  rep.rho_probe = estimate_rho(ls, mod.members());
  rep.rho = rep.rho_probe.rho;
  rep.M = function_norm(f);
  require(rep.M > 0.0, ErrorCode::InvalidArgument, "forcing must be nonzero");
  rep.bound = 2.0 * rep.rho * rep.M;
  rep.lip_at_bound = H.lip(rep.bound);
  rep.epsilon_0 = epsilon_threshold(rep.rho, [&](double r) { return H.lip(r); }, rep.M);
  const double denom = 1.0 / rep.rho - 2.0 * epsilon * rep.lip_at_bound;
  rep.inverse_bound = denom > 0.0 ? rep.M / denom : std::numeric_limits<double>::infinity();
  if (epsilon >= rep.epsilon_0 && !opts.force)
    fail(ErrorCode::EpsilonTooLarge,
         "epsilon " + std::to_string(epsilon) + " is not below the threshold " + std::to_string(rep.epsilon_0));

  const std::size_t m = ls.grid_size();
  const double periods = 20.0;
  MildSolution w = ls.solve(f);
  TrigPolynomial wt = w.to_trig_polynomial(opts.drop_tol);
  if (opts.initial_offset) wt += *opts.initial_offset;

  int climbing = 0;
  double prev_step = -1.0;
  bool converged = epsilon == 0.0 && !opts.initial_offset;
  rep.iterations = converged ? 1 : 0;
  while (!converged) {
    if (rep.iterations >= opts.max_iterations)
      fail(ErrorCode::IterationDiverged, "Picard iteration did not converge within max_iterations");
    const auto h = cutoff_apply(H, wt, rep.bound, mod);
    w = ls.solve(f + cplx(epsilon) * h.value);
    const TrigPolynomial next = w.to_trig_polynomial(opts.drop_tol);
    const double step = detail::grid_step_norm(next, wt, m, periods);
    ++rep.iterations;
    rep.step_norms.push_back(step);
    if (prev_step > 0.0) {
      const double ratio = step / prev_step;
      rep.contraction_factor = std::max(rep.contraction_factor, ratio);
      climbing = ratio >= 1.0 ? climbing + 1 : 0;
      if (climbing >= 3) fail(ErrorCode::IterationDiverged, "Picard step norms grew three times in a row");
    }
    prev_step = step;
    wt = next;
    converged = step < opts.picard_tol;
  }

  rep.final_norm = window_norm(w, periods, m);
  rep.bound_ok = rep.final_norm <= rep.bound * (1.0 + 1e-6);
  rep.cutoff_active = function_norm(wt) > rep.bound;
  const auto hw = nemytsky_apply(H, wt, mod);
  rep.dropped_mass = hw.dropped_mass;
  if (rep.cutoff_active)
    fail(ErrorCode::CutoffActiveAtFixedPoint, "the fixed point lies outside the cut-off ball");

  // certify against the pointwise nonlinearity, not the truncated expansion
  const FunctionOf forcing{sys.dim(), [&](double t) -> CVector { return f(t) + epsilon * H.eval(t, w(t)); }};
  rep.residual = residual(sys, w, forcing, ss.n_pairs, ss.seed, ss.lattice_pairs ? m : 0, ss.quad, ss.max_span, ss.mode);
  rep.certified = rep.residual < opts.resid_tol;
  w.report.residual = rep.residual;
  w.report.iterations = rep.iterations;
  w.report.certified = rep.certified;
  w.report.f_norm = rep.M;
  w.report.u_norm = rep.final_norm;
  if (!rep.certified && opts.solver.throw_on_failure)
    fail(ErrorCode::CertificationFailure,
         "perturbed residual " + std::to_string(rep.residual) + " is not below resid_tol");
  out.w = std::move(w);
  return out;
}

}  // namespace circspec
