#pragma once

#include "circspec/error.hpp"
#include "circspec/grid_function.hpp"
#include "circspec/perturb.hpp"
#include "circspec/process.hpp"
#include "circspec/solver.hpp"
#include "circspec/spectrum.hpp"
#include "circspec/trig_polynomial.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace circspec::io {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Non-finite values have no JSON literal; they are written as the strings
/// "inf", "-inf" and "nan".
inline Json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

namespace detail {

inline bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

inline void dump_to(std::string& out, const Json& j, int level) {
  const std::string pad(2 * level, ' '), pad_in(2 * level + 2, ' ');
  switch (j.type()) {
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        out += num(x).dump();
        return;
      }
      const auto txt = format_double(x);
      out += txt;
      if (txt.find_first_of(".e") == std::string::npos) out += ".0";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) {
        return is_scalar(e) || (e.is_array() && std::all_of(e.begin(), e.end(), is_scalar));
      });
      if (flat) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_to(out, j[i], level + 1);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad_in;
        dump_to(out, j[i], level + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "]";
      return;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad_in + Json(it.key()).dump() + ": ";
        dump_to(out, it.value(), level + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Deterministic text form: fixed key order, 17 significant digits.
inline std::string dump(const Json& j) {
  std::string out;
  detail::dump_to(out, j, 0);
  out += '\n';
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::InvalidArgument, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a temporary sibling and renames it over the target.
inline void write_atomic(const std::filesystem::path& p, const std::string& content) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorCode::InvalidArgument, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorCode::InvalidArgument, "cannot rename onto " + p.string() + ": " + ec.message());
  }
}

inline Json parse_json(const std::string& text, const std::string& what = "input") {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, what + ": " + e.what());
  }
}

inline Json load_json(const std::filesystem::path& p) { return parse_json(read_file(p), p.string()); }

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& ctx) {
  require(j.is_object(), ErrorCode::ParseError, ctx + " must be an object");
  auto it = j.find(key);
  require(it != j.end(), ErrorCode::ParseError, ctx + " is missing \"" + key + "\"");
  return *it;
}

inline double to_double(const Json& j, const std::string& ctx) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(ErrorCode::ParseError, ctx + " must be a number");
}

inline int to_int(const Json& j, const std::string& ctx) {
  require(j.is_number_integer(), ErrorCode::ParseError, ctx + " must be an integer");
  return j.get<int>();
}

inline std::vector<double> to_doubles(const Json& j, const std::string& ctx) {
  require(j.is_array(), ErrorCode::ParseError, ctx + " must be an array");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(to_double(e, ctx));
  return out;
}

template <typename T>
void maybe(const Json& j, const char* key, T& dst) {
  if (!j.is_object() || !j.contains(key)) return;
  if constexpr (std::is_same_v<T, double>)
    dst = to_double(j[key], key);
  else if constexpr (std::is_same_v<T, int>)
    dst = to_int(j[key], key);
  else
    dst = j[key].template get<T>();
}

}  // namespace detail

// ---------------------------------------------------------------- trig polynomials

inline TrigPolynomial trig_from_json(const Json& j, const std::string& ctx = "trig polynomial") {
  const int dim = detail::to_int(detail::field(j, "dim", ctx), ctx + ".dim");
  require(dim > 0, ErrorCode::ParseError, ctx + ".dim must be positive");
  const auto& modes = detail::field(j, "modes", ctx);
  require(modes.is_array(), ErrorCode::ParseError, ctx + ".modes must be an array");
  std::vector<TrigPolynomial::Mode> out;
  for (const auto& m : modes) {
    const double w = detail::to_double(detail::field(m, "omega", ctx + " mode"), ctx + " omega");
    require(std::isfinite(w), ErrorCode::ParseError, ctx + " omega must be finite");
    const auto re = detail::to_doubles(detail::field(m, "re", ctx + " mode"), ctx + " re");
    std::vector<double> im(re.size(), 0.0);
    if (m.contains("im")) im = detail::to_doubles(m["im"], ctx + " im");
    require(static_cast<int>(re.size()) == dim && static_cast<int>(im.size()) == dim, ErrorCode::ParseError,
            ctx + " mode coefficients must have dim entries");
    CVector c(dim);
    for (int i = 0; i < dim; ++i) c(i) = cplx(re[i], im[i]);
    out.push_back({w, c});
  }
  return TrigPolynomial(dim, std::move(out));
}

inline Json to_json(const TrigPolynomial& g) {
  Json modes = Json::array();
  for (const auto& m : g.modes()) {
    Json re = Json::array(), im = Json::array();
    for (int i = 0; i < g.dim(); ++i) {
      re.push_back(m.coeff(i).real());
      im.push_back(m.coeff(i).imag());
    }
    modes.push_back({{"omega", m.omega}, {"re", re}, {"im", im}});
  }
  return {{"dim", g.dim()}, {"modes", modes}};
}

// ---------------------------------------------------------------- grid CSV

/// Reads "t,re_0,im_0,..." rows. Commas and whitespace both separate fields,
/// '#' starts a comment, and a non-numeric first line is taken as the header.
inline GridFunction grid_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> ts;
  std::vector<CVector> samples;
  int dim = -1;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    for (char& c : line)
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string s; ls >> s;) tok.push_back(s);
    if (tok.empty()) continue;
    std::vector<double> vals;
    bool numeric = true;
    for (const auto& s : tok) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      require(first, ErrorCode::ParseError, "non-numeric CSV row at line " + std::to_string(lineno));
      first = false;
      continue;
    }
    first = false;
    require(vals.size() >= 3 && vals.size() % 2 == 1, ErrorCode::ParseError,
            "CSV row " + std::to_string(lineno) + " needs t followed by re/im pairs");
    const int d = static_cast<int>(vals.size() - 1) / 2;
    if (dim < 0) dim = d;
    require(d == dim, ErrorCode::ParseError, "CSV rows differ in width at line " + std::to_string(lineno));
    CVector v(d);
    for (int i = 0; i < d; ++i) v(i) = cplx(vals[1 + 2 * i], vals[2 + 2 * i]);
    ts.push_back(vals[0]);
    samples.push_back(v);
  }
  require(ts.size() >= 2, ErrorCode::ParseError, "CSV needs at least two samples");
  const double dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
  require(dt > 0.0, ErrorCode::ParseError, "CSV times must be strictly increasing");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i > 0) require(ts[i] > ts[i - 1], ErrorCode::ParseError, "CSV times must be strictly increasing");
    require(std::fabs(ts[i] - (ts.front() + static_cast<double>(i) * dt)) <= 1e-6 * dt, ErrorCode::ParseError,
            "CSV times must have a constant step");
  }
  return GridFunction(ts.front(), dt, std::move(samples));
}

inline std::string csv_header(int dim) {
  std::string h = "t";
  for (int i = 0; i < dim; ++i) h += ",re_" + std::to_string(i) + ",im_" + std::to_string(i);
  return h + "\n";
}

inline void append_csv_row(std::string& out, double t, const CVector& v) {
  out += format_double(t);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ',';
    out += format_double(v(i).real());
    out += ',';
    out += format_double(v(i).imag());
  }
  out += '\n';
}

inline std::string to_csv(const GridFunction& g) {
  std::string out = csv_header(g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) append_csv_row(out, g.time(i), g.sample(i));
  return out;
}

/// Samples u on [a, b] with step dt; time_scale maps the written time t to
/// the argument u is evaluated at.
template <TimeFunction U>
std::string series_csv(const U& u, int dim, Window w, double dt, double time_scale = 1.0) {
  require(dt > 0.0 && w.b >= w.a, ErrorCode::InvalidArgument, "bad series window");
  const auto n = static_cast<std::size_t>(std::floor((w.b - w.a) / dt + 1e-9)) + 1;
  std::string out = csv_header(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = w.a + static_cast<double>(i) * dt;
    append_csv_row(out, t, u(t * time_scale));
  }
  return out;
}

/// Function input: JSON trig polynomial or CSV grid, chosen by content.
struct FunctionInput {
  std::optional<TrigPolynomial> trig;
  std::optional<GridFunction> grid;
};

inline FunctionInput load_function(const std::filesystem::path& p) {
  const auto text = read_file(p);
  const auto pos = text.find_first_not_of(" \t\r\n");
  FunctionInput in;
  if (pos != std::string::npos && text[pos] == '{')
    in.trig = trig_from_json(parse_json(text, p.string()), p.string());
  else
    in.grid = grid_from_csv(text);
  return in;
}

// ---------------------------------------------------------------- systems

inline IntegSettings integ_from_json(const Json& j, IntegSettings s = {}) {
  detail::maybe(j, "rtol", s.rtol);
  detail::maybe(j, "atol", s.atol);
  detail::maybe(j, "max_step", s.max_step);
  require(s.rtol > 0.0 && s.atol > 0.0 && s.max_step > 0.0, ErrorCode::ParseError, "integ tolerances must be > 0");
  return s;
}

inline Json to_json(const IntegSettings& s) {
  return {{"rtol", s.rtol}, {"atol", s.atol}, {"max_step", s.max_step}};
}

inline PeriodicSystem system_from_json(const Json& j, double period = 1.0, IntegSettings base = {}) {
  const std::string ctx = "system";
  const auto kind = detail::field(j, "kind", ctx).get<std::string>();
  const IntegSettings integ = j.contains("integ") ? integ_from_json(j["integ"], base) : base;
  if (kind == "constant") {
    const auto& rows = detail::field(j, "constant", ctx);
    require(rows.is_array() && !rows.empty(), ErrorCode::ParseError, "system.constant must be a matrix");
    const auto n = static_cast<Eigen::Index>(rows.size());
    CMatrix a(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto row = detail::to_doubles(rows[r], "system.constant row");
      require(static_cast<Eigen::Index>(row.size()) == n, ErrorCode::ParseError, "system.constant must be square");
      for (Eigen::Index c = 0; c < n; ++c) a(r, c) = row[c];
    }
    if (j.contains("constant_im")) {
      const auto& im = j["constant_im"];
      require(im.is_array() && static_cast<Eigen::Index>(im.size()) == n, ErrorCode::ParseError,
              "system.constant_im must match system.constant");
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = detail::to_doubles(im[r], "system.constant_im row");
        require(static_cast<Eigen::Index>(row.size()) == n, ErrorCode::ParseError, "system.constant_im must be square");
        for (Eigen::Index c = 0; c < n; ++c) a(r, c) += cplx(0.0, row[c]);
      }
    }
    if (j.contains("dim"))
      require(detail::to_int(j["dim"], "system.dim") == n, ErrorCode::ParseError, "system.dim disagrees with matrix");
    return PeriodicSystem::constant(a, integ, period);
  }
  if (kind == "heat") {
    const auto& h = detail::field(j, "heat", ctx);
    const int n = detail::to_int(detail::field(h, "n_modes", "system.heat"), "system.heat.n_modes");
    const auto a = trig_from_json(detail::field(h, "a", "system.heat"), "system.heat.a");
    const auto b = h.contains("b") ? trig_from_json(h["b"], "system.heat.b") : TrigPolynomial::zero(1);
    return PeriodicSystem::heat(n, a, b, integ, period);
  }
  if (kind == "general") {
    const int dim = detail::to_int(detail::field(j, "dim", ctx), "system.dim");
    std::vector<MatrixEntry> entries;
    for (const auto& e : detail::field(j, "entries", ctx)) {
      const int r = detail::to_int(detail::field(e, "row", "entry"), "entry.row");
      const int c = detail::to_int(detail::field(e, "col", "entry"), "entry.col");
      std::vector<TrigPolynomial::Mode> modes;
      for (const auto& m : detail::field(e, "modes", "entry")) {
        CVector v(1);
        double im = 0.0;
        detail::maybe(m, "im", im);
        v(0) = cplx(detail::to_double(detail::field(m, "re", "entry mode"), "re"), im);
        modes.push_back({detail::to_double(detail::field(m, "omega", "entry mode"), "omega"), v});
      }
      entries.push_back({r, c, TrigPolynomial(1, std::move(modes))});
    }
    return PeriodicSystem::general(dim, std::move(entries), integ, period);
  }
  fail(ErrorCode::ParseError, "system.kind must be general, constant or heat");
}

inline Json to_json(const PeriodicSystem& sys) {
  Json j{{"dim", sys.dim()}, {"kind", to_string(sys.kind())}};
  switch (sys.kind()) {
    case SystemKind::constant: {
      Json re = Json::array(), im = Json::array();
      const auto& a = sys.constant_matrix();
      bool complex = false;
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        Json rr = Json::array(), ri = Json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          rr.push_back(a(r, c).real());
          ri.push_back(a(r, c).imag());
          complex = complex || a(r, c).imag() != 0.0;
        }
        re.push_back(rr);
        im.push_back(ri);
      }
      j["constant"] = re;
      if (complex) j["constant_im"] = im;
      break;
    }
    case SystemKind::heat: {
      const auto& h = sys.heat_params();
      j["heat"] = {{"n_modes", h.n_modes}, {"a", to_json(h.a)}, {"b", to_json(h.b)}};
      break;
    }
    case SystemKind::general: {
      Json entries = Json::array();
      for (const auto& e : sys.entries()) {
        Json modes = Json::array();
        for (const auto& m : e.value.modes())
          modes.push_back({{"omega", m.omega}, {"re", m.coeff(0).real()}, {"im", m.coeff(0).imag()}});
        entries.push_back({{"row", e.row}, {"col", e.col}, {"modes", modes}});
      }
      j["entries"] = entries;
      break;
    }
  }
  j["integ"] = to_json(sys.integ());
  return j;
}

// ---------------------------------------------------------------- nonlinearities

inline NemytskyMap nonlinearity_from_json(const Json& j, const PeriodicSystem& sys, double period = 1.0) {
  const auto kind = detail::field(j, "kind", "nonlinearity").get<std::string>();
  NemytskyMap h;
  if (kind == "heat_quadratic") {
    h = NemytskyMap::heat_quadratic(sys);
  } else if (kind == "polynomial") {
    std::vector<PolyTerm> terms;
    for (const auto& t : detail::field(j, "terms", "nonlinearity"))
      terms.push_back({detail::to_int(detail::field(t, "power", "term"), "term.power"),
                       trig_from_json(detail::field(t, "coeff", "term"), "term.coeff")});
    h = NemytskyMap::polynomial(sys.dim(), std::move(terms), period);
  } else {
    fail(ErrorCode::ParseError, "nonlinearity.kind must be polynomial or heat_quadratic");
  }
  if (j.contains("lip")) {
    const auto& lip = j["lip"];
    if (lip.contains("poly_coeffs")) h.set_lip_override(detail::to_doubles(lip["poly_coeffs"], "lip.poly_coeffs"));
  }
  return h;
}

inline Json to_json(const NemytskyMap& h) {
  Json j{{"kind", to_string(h.kind())}};
  if (h.kind() == NonlinearityKind::polynomial) {
    Json terms = Json::array();
    for (const auto& t : h.terms()) terms.push_back({{"power", t.power}, {"coeff", to_json(t.coeff)}});
    j["terms"] = terms;
  }
  Json lc = Json::array();
  for (double c : h.lip_coeffs()) lc.push_back(c);
  j["lip"] = {{"poly_coeffs", lc}};
  return j;
}

// ---------------------------------------------------------------- settings

inline Json to_json(const ResolventSettings& s) {
  return {{"series_tol", s.series_tol},
          {"max_terms", s.max_terms},
          {"radial_deltas", s.radial_deltas},
          {"angle_grid", s.angle_grid},
          {"angular_resolution", s.angular_resolution()},
          {"blowup_threshold", s.blowup_threshold},
          {"probe_window", {s.probe_window.a, s.probe_window.b}},
          {"probe_dt", s.probe_dt},
          {"grid_probes", s.grid_probes}};
}

inline Json to_json(const CarlemanSettings& s) {
  return {{"freq_min", s.freq_min},         {"freq_max", s.freq_max},
          {"freq_step", s.freq_step},       {"horizon", s.horizon},
          {"radial_deltas", s.radial_deltas}, {"blowup_threshold", s.blowup_threshold},
          {"adapt_to_window", s.adapt_to_window}};
}

inline Json to_json(const QuadSettings& q) {
  return {{"nodes_per_unit", q.nodes_per_unit}, {"quad_tol", q.quad_tol}, {"max_refinements", q.max_refinements}};
}

inline Json to_json(const SolverSettings& s) {
  return {{"m_env", s.m_env},
          {"resid_tol", s.resid_tol},
          {"cond_cap", s.cond_cap},
          {"resonance_tol", s.resonance_tol},
          {"quad", to_json(s.quad)},
          {"n_pairs", s.n_pairs},
          {"lattice_pairs", s.lattice_pairs},
          {"max_span", s.max_span},
          {"seed", s.seed},
          {"certify", s.certify},
          {"mode", s.mode == PropagationMode::automatic ? "automatic" : "integrate"}};
}

inline Json to_json(const PerturbOptions& o) {
  return {{"order", o.order},
          {"m_cap", o.m_cap},
          {"max_modes", o.max_modes},
          {"picard_tol", o.picard_tol},
          {"max_iterations", o.max_iterations},
          {"force", o.force},
          {"resid_tol", o.resid_tol},
          {"drop_tol", o.drop_tol}};
}

// ---------------------------------------------------------------- reports

inline Json complex_pair(cplx z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const SpectrumReport& r) {
  Json spec = Json::array(), per = Json::array();
  for (double a : r.spectrum.angles()) spec.push_back(a);
  for (const auto& p : r.per_angle) per.push_back({{"theta", p.theta}, {"exponent", num(p.exponent)}});
  return {{"method", to_string(r.method)},
          {"angular_resolution", r.spectrum.angular_resolution()},
          {"spectrum", spec},
          {"per_angle", per}};
}

inline Json to_json(const CarlemanReport& r) {
  Json ex = Json::array();
  for (double e : r.exponents) ex.push_back(num(e));
  return {{"method", to_string(r.method)},
          {"frequencies", r.frequencies},
          {"exponents", ex},
          {"truncated", r.truncated},
          {"radial_deltas", r.radial_deltas},
          {"horizon_used", r.horizon_used}};
}

inline Json to_json(const Monodromy& m) {
  Json re = Json::array(), im = Json::array(), eig = Json::array(), angles = Json::array();
  for (Eigen::Index r = 0; r < m.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < m.matrix.cols(); ++c) {
      re.push_back(m.matrix(r, c).real());
      im.push_back(m.matrix(r, c).imag());
    }
  for (cplx z : m.eigenvalues) eig.push_back(complex_pair(z));
  for (double a : m.unit_circle_part.angles()) angles.push_back(a);
  return {{"anchor_t", m.anchor_t},
          {"dim", m.matrix.rows()},
          {"matrix", {{"re", re}, {"im", im}}},
          {"eigenvalues", eig},
          {"unit_circle_angles", angles},
          {"err_est", m.err_est}};
}

inline Json to_json(const SolveReport& r) {
  Json mult = Json::array();
  for (cplx z : r.multipliers) mult.push_back(complex_pair(z));
  return {{"residual", r.residual},
          {"gap", num(r.gap)},
          {"mode_conds", r.mode_conds},
          {"seed", r.seed},
          {"n_pairs", r.n_pairs},
          {"iterations", r.iterations},
          {"u_norm", r.u_norm},
          {"f_norm", r.f_norm},
          {"near_resonance", r.near_resonance},
          {"certified", r.certified},
          {"quad_converged", r.quad_converged},
          {"multipliers", mult},
          {"projection_defect", r.projection_defect}};
}

inline Json to_json(const MildSolution& u) {
  Json envs = Json::array();
  for (const auto& e : u.envelopes()) {
    Json samples = Json::array();
    for (const auto& s : e.samples()) {
      Json row = Json::array();
      for (Eigen::Index i = 0; i < s.size(); ++i) row.push_back(complex_pair(s(i)));
      samples.push_back(u.dim() == 1 ? row[0] : row);
    }
    envs.push_back({{"omega", e.omega()}, {"samples", samples}});
  }
  return {{"dim", u.dim()}, {"freqs", u.freqs()}, {"envelopes", envs}, {"report", to_json(u.report)}};
}

inline Json to_json(const InclusionReport& r) {
  return {{"detected", r.detected.angles()},
          {"allowed", r.allowed.angles()},
          {"excess", r.excess},
          {"window", r.window},
          {"ok", r.ok}};
}

inline Json to_json(const PerturbReport& r) {
  return {{"rho", r.rho},
          {"M", r.M},
          {"epsilon", r.epsilon},
          {"epsilon_0", num(r.epsilon_0)},
          {"lip_at_bound", r.lip_at_bound},
          {"iterations", r.iterations},
          {"contraction_factor", r.contraction_factor},
          {"final_norm", r.final_norm},
          {"bound", r.bound},
          {"bound_ok", r.bound_ok},
          {"cutoff_active", r.cutoff_active},
          {"inverse_bound", num(r.inverse_bound)},
          {"residual", r.residual},
          {"certified", r.certified},
          {"dropped_mass", r.dropped_mass},
          {"module_size", r.module_size},
          {"step_norms", r.step_norms},
          {"rho_probe", {{"argmax_freq", r.rho_probe.argmax_freq},
                         {"grid_points", r.rho_probe.grid_points},
                         {"probe_freqs", r.rho_probe.probe_freqs}}}};
}

}  // namespace circspec::io
