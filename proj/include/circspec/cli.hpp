#pragma once

#include "circspec/funcspace.hpp"
#include "circspec/io.hpp"
#include "circspec/perturb.hpp"
#include "circspec/process.hpp"
#include "circspec/solver.hpp"
#include "circspec/spectrum.hpp"

#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace circspec::cli {

#ifndef CIRCSPEC_VERSION
#define CIRCSPEC_VERSION "1.0.0"
#endif

inline constexpr const char* kToolVersion = "circspec " CIRCSPEC_VERSION;

enum class Command { spectrum, monodromy, solve, perturb, verify, corpus };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::spectrum: return "spectrum";
    case Command::monodromy: return "monodromy";
    case Command::solve: return "solve";
    case Command::perturb: return "perturb";
    case Command::verify: return "verify";
    case Command::corpus: return "corpus";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::spectrum;
  std::string input;  // spectrum: trig JSON or grid CSV
  std::string system;
  std::string forcing;
  std::string nonlinearity;
  std::string out;     // JSON report or corpus file; stdout when empty
  std::string series;  // optional CSV
  std::string corpus_name;

  double epsilon = 0.0;
  double period = 1.0;
  std::uint64_t seed = SolverSettings{}.seed;
  std::optional<Window> window;
  std::optional<double> dt;
  bool force = false;
  bool carleman = false;  // spectrum: also report the Carleman spectrum
  // spectrum of a grid: fit max_terms / the delta ladder to the window unless
  // the user set them
  bool fit_terms = true;
  bool fit_deltas = true;
  double anchor = 0.0;
  int modes = 4;  // corpus heat_demo

  ResolventSettings resolvent;
  CarlemanSettings carleman_settings;
  IntegSettings integ;
  SolverSettings solver;
  PerturbOptions perturb;
  InclusionSettings inclusion;
};

/// 0 ok, 2 certification or numerical failure, 3 resonance, 4 input error.
inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Resonance: return 3;
    case ErrorCode::CertificationFailure:
    case ErrorCode::IterationDiverged:
    case ErrorCode::CutoffActiveAtFixedPoint:
    case ErrorCode::IntegrationFailure: return 2;
    default: return 4;
  }
}

struct RunResult {
  int exit_code = 0;
  std::string error;  // "E_TOKEN: message" when exit_code != 0
};

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.out.empty())
    out << text;
  else
    io::write_atomic(cfg.out, text);
}

inline io::Json settings_json(const RunConfig& c) {
  io::Json s{{"period", c.period}, {"seed", c.seed}};
  switch (c.command) {
    case Command::spectrum:
      s["resolvent"] = io::to_json(c.resolvent);
      if (c.carleman) s["carleman"] = io::to_json(c.carleman_settings);
      break;
    case Command::monodromy:
      s["anchor"] = c.anchor;
      s["integ"] = io::to_json(c.integ);
      break;
    case Command::solve:
      s["integ"] = io::to_json(c.integ);
      s["solver"] = io::to_json(c.solver);
      s["carleman"] = io::to_json(c.carleman_settings);
      break;
    case Command::perturb:
      s["integ"] = io::to_json(c.integ);
      s["solver"] = io::to_json(c.solver);
      s["perturb"] = io::to_json(c.perturb);
      s["epsilon"] = c.epsilon;
      break;
    case Command::verify:
      s["integ"] = io::to_json(c.integ);
      s["solver"] = io::to_json(c.solver);
      s["inclusion"] = {{"resolvent", io::to_json(c.inclusion.resolvent)},
                        {"dt", c.inclusion.dt},
                        {"min_periods", c.inclusion.min_periods}};
      break;
    case Command::corpus:
      s["name"] = c.corpus_name;
      break;
  }
  if (c.window) s["window"] = {c.window->a, c.window->b};
  if (c.dt) s["dt"] = *c.dt;
  return s;
}

inline io::Json header(const RunConfig& c) {
  return {{"tool", kToolVersion}, {"command", to_string(c.command)}, {"seed", c.seed}, {"settings", settings_json(c)}};
}

inline void require_path(const std::string& p, const char* flag) {
  require(!p.empty(), ErrorCode::InvalidArgument, std::string("missing required ") + flag);
}

/// tau f(tau s) on a grid: the step shrinks by tau and values scale by tau.
inline GridFunction grid_to_unit_period(const GridFunction& g, double tau) {
  if (tau == 1.0) return g;
  std::vector<CVector> samples;
  for (const auto& s : g.samples()) samples.push_back(tau * s);
  return GridFunction(g.t0() / tau, g.dt() / tau, std::move(samples));
}

inline GridFunction restrict_to(const GridFunction& g, Window w) {
  std::vector<CVector> samples;
  double t0 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g.time(i);
    if (t < w.a - 1e-9 * g.dt() || t > w.b + 1e-9 * g.dt()) continue;
    if (samples.empty()) t0 = t;
    samples.push_back(g.sample(i));
  }
  require(samples.size() >= 2, ErrorCode::WindowOutOfDomain, "--window selects fewer than two samples");
  return GridFunction(t0, g.dt(), std::move(samples));
}

inline PeriodicSystem load_system(const RunConfig& c) {
  require_path(c.system, "--system");
  return io::system_from_json(io::load_json(c.system), c.period, c.integ);
}

struct Forcing {
  TrigPolynomial f;
  std::optional<ProjectedForcing> projection;
};

inline Forcing load_forcing(const RunConfig& c, int dim) {
  require_path(c.forcing, "--forcing");
  auto in = io::load_function(c.forcing);
  Forcing out;
  if (in.trig) {
    out.f = to_unit_period(*in.trig, c.period);
  } else {
    out.projection = project_forcing(grid_to_unit_period(*in.grid, c.period), c.carleman_settings);
    out.f = out.projection->f;
  }
  require(out.f.dim() == dim, ErrorCode::InvalidArgument, "forcing dimension does not match the system");
  return out;
}

inline void write_series(const RunConfig& c, const MildSolution& u) {
  if (c.series.empty()) return;
  const Window w = c.window.value_or(Window{0.0, 10.0 * c.period});
  const double dt = c.dt.value_or(0.01 * c.period);
  io::write_atomic(c.series, io::series_csv(u, u.dim(), w, dt, 1.0 / c.period));
}

/// Translates up to max_terms periods must fit twice into the window, and the
/// truncated series only resolves a pole when delta_min * max_terms >= 5.
inline void fit_to_window(ResolventSettings& rs, double length, bool terms, bool deltas) {
  if (terms) rs.max_terms = std::min(rs.max_terms, static_cast<int>(std::floor((length - 2.0) / 2.0)));
  require(rs.max_terms >= 1, ErrorCode::WindowTooShort, "grid window too short for the Neumann scan");
  const double need = 5.0 / rs.max_terms;
  if (!deltas || rs.radial_deltas.back() >= need) return;
  const double hi = 0.4;
  require(need < hi, ErrorCode::WindowTooShort, "grid window too short to resolve poles (need about 30 periods)");
  const std::size_t n = rs.radial_deltas.size();
  for (std::size_t k = 0; k < n; ++k)
    rs.radial_deltas[k] = hi * std::pow(need / hi, static_cast<double>(k) / static_cast<double>(n - 1));
}

inline int run_spectrum(const RunConfig& c, std::ostream& os) {
  require_path(c.input, "--input");
  auto in = io::load_function(c.input);
  auto rs = c.resolvent;
  if (c.window && in.trig) rs.probe_window = *c.window;
  if (c.dt && in.trig) rs.probe_dt = *c.dt;
  io::Json j = header(c);
  SpectrumReport rep;
  if (in.trig) {
    rep = circular_spectrum(*in.trig, rs);
    j["input_kind"] = "trig_polynomial";
    j["exploratory"] = false;
  } else {
    GridFunction g = *in.grid;
    if (c.window) g = restrict_to(g, *c.window);
    fit_to_window(rs, g.window_length(), c.fit_terms, c.fit_deltas);
    rep = circular_spectrum(g, rs);
    j["input_kind"] = "grid";
    // sampled data carries no uniform-continuity guarantee
    j["exploratory"] = true;
  }
  j["settings"]["resolvent"] = io::to_json(rs);
  j.update(io::to_json(rep));
  if (c.carleman) {
    j["carleman"] = in.trig ? io::to_json(carleman_spectrum(*in.trig, c.carleman_settings))
                            : io::to_json(carleman_spectrum(*in.grid, c.carleman_settings));
  }
  emit(c, io::dump(j), os);
  if (!c.series.empty()) {
    std::string csv = "theta,exponent\n";
    for (const auto& p : rep.per_angle) csv += io::format_double(p.theta) + "," + io::format_double(p.exponent) + "\n";
    io::write_atomic(c.series, csv);
  }
  return 0;
}

inline int run_monodromy(const RunConfig& c, std::ostream& os) {
  const auto sys = load_system(c);
  const auto p = monodromy(sys, c.anchor / c.period, kCircleTol, c.solver.mode);
  io::Json j = header(c);
  j["system_kind"] = to_string(sys.kind());
  j.update(io::to_json(p));
  if (!c.forcing.empty()) {
    const auto f = load_forcing(c, sys.dim());
    j["spectral_gap"] = io::num(spectral_gap(p.eigenvalues, f.f.frequencies()));
  }
  emit(c, io::dump(j), os);
  return 0;
}

inline int run_solve(const RunConfig& c, std::ostream& os) {
  const auto sys = load_system(c);
  const auto f = load_forcing(c, sys.dim());
  auto s = c.solver;
  s.seed = c.seed;
  s.throw_on_failure = false;
  auto u = solve_linear(sys, f.f, s);
  if (f.projection) u.report.projection_defect = f.projection->defect;
  io::Json j = header(c);
  j.update(io::to_json(u));
  if (f.projection) j["forcing_projection"] = {{"forcing", io::to_json(f.f)}, {"defect", f.projection->defect}};
  emit(c, io::dump(j), os);
  write_series(c, u);
  if (!u.report.certified)
    fail(ErrorCode::CertificationFailure,
         "residual " + io::format_double(u.report.residual) + " is not below resid_tol");
  return 0;
}

inline int run_verify(const RunConfig& c, std::ostream& os) {
  const auto sys = load_system(c);
  const auto f = load_forcing(c, sys.dim());
  auto s = c.solver;
  s.seed = c.seed;
  s.throw_on_failure = false;
  const auto u = solve_linear(sys, f.f, s);
  const auto inc = verify_spectral_inclusion(u, f.f, c.inclusion);
  io::Json j = header(c);
  j["report"] = io::to_json(u.report);
  j["inclusion"] = io::to_json(inc);
  j["ok"] = inc.ok && u.report.certified;
  emit(c, io::dump(j), os);
  require(u.report.certified, ErrorCode::CertificationFailure, "residual is not below resid_tol");
  require(inc.ok, ErrorCode::CertificationFailure, "detected spectrum of u leaves the forcing spectrum");
  return 0;
}

inline int run_perturb(const RunConfig& c, std::ostream& os) {
  const auto sys = load_system(c);
  const auto f = load_forcing(c, sys.dim());
  require_path(c.nonlinearity, "--nonlinearity");
  const auto H = io::nonlinearity_from_json(io::load_json(c.nonlinearity), sys, c.period);
  auto opts = c.perturb;
  opts.solver = c.solver;
  opts.solver.seed = c.seed;
  opts.solver.throw_on_failure = false;
  opts.force = c.force;
  const auto res = solve_perturbed(sys, f.f, H, c.epsilon * c.period, opts);
  io::Json j = header(c);
  j["nonlinearity"] = io::to_json(H);
  j["perturb_report"] = io::to_json(res.report);
  j.update(io::to_json(res.w));
  emit(c, io::dump(j), os);
  write_series(c, res.w);
  require(res.report.certified, ErrorCode::CertificationFailure, "perturbed residual is not below resid_tol");
  return 0;
}

inline int run_corpus(const RunConfig& c, std::ostream& os) {
  if (c.corpus_name == "levitan") {
    const Window w = c.window.value_or(Window{0.0, 200.0});
    const auto g = make_levitan(w, c.dt.value_or(0.01));
    emit(c, "# levitan: sin(1/(2 + cos t + cos(sqrt(2) t)))\n" + io::to_csv(g), os);
    return 0;
  }
  if (c.corpus_name == "ap_demo") {
    const auto g = TrigPolynomial::scalar({{1.0, 1.0}, {std::numbers::sqrt2, 0.5}, {kTwoPi, 0.25}});
    emit(c, io::dump(io::to_json(g)), os);
    return 0;
  }
  if (c.corpus_name == "heat_demo") {
    // a(t) = -1 + 0.3 cos(2 pi t), b(t) = 1 + 0.5 cos(2 pi t)
    const auto a = TrigPolynomial::scalar({{0.0, -1.0}, {kTwoPi, 0.15}, {-kTwoPi, 0.15}});
    const auto b = TrigPolynomial::scalar({{0.0, 1.0}, {kTwoPi, 0.25}, {-kTwoPi, 0.25}});
    const auto sys = PeriodicSystem::heat(c.modes, a, b, c.integ);
    emit(c, io::dump(io::to_json(sys)), os);
    return 0;
  }
  fail(ErrorCode::UnknownCorpusName, "unknown corpus name '" + c.corpus_name + "'");
}

}  // namespace detail

/// Runs one command. Errors become an exit status and a one-line message.
inline RunResult run(const RunConfig& cfg, std::ostream& os = std::cout) {
  RunResult r;
  try {
    switch (cfg.command) {
      case Command::spectrum: r.exit_code = detail::run_spectrum(cfg, os); break;
      case Command::monodromy: r.exit_code = detail::run_monodromy(cfg, os); break;
      case Command::solve: r.exit_code = detail::run_solve(cfg, os); break;
      case Command::perturb: r.exit_code = detail::run_perturb(cfg, os); break;
      case Command::verify: r.exit_code = detail::run_verify(cfg, os); break;
      case Command::corpus: r.exit_code = detail::run_corpus(cfg, os); break;
    }
  } catch (const Error& e) {
    r.exit_code = exit_code_for(e.code());
    r.error = e.what();
  } catch (const std::exception& e) {
    r.exit_code = 4;
    r.error = std::string(code_token(ErrorCode::InvalidArgument)) + ": " + e.what();
  }
  for (char& ch : r.error)
    if (ch == '\n') ch = ' ';
  return r;
}

}  // namespace circspec::cli
