// Command-line front end: circspec <command> [options]. Exit status 0 ok,
// 2 certification/numerical failure, 3 resonance, 4 input error.

#include "circspec/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace circspec;

namespace {

struct Common {
  std::vector<double> window;
  std::vector<double> deltas;
  std::optional<double> dt;
  std::optional<int> angle_grid;
  bool integrate = false;
  CLI::Option* user_deltas = nullptr;
  CLI::Option* user_terms = nullptr;
};

void add_common(CLI::App* sub, cli::RunConfig& cfg, Common& c) {
  sub->add_option("--out", cfg.out, "output file (stdout when omitted)");
  sub->add_option("--series", cfg.series, "CSV series output");
  sub->add_option("--seed", cfg.seed, "seed for residual probes")->capture_default_str();
  sub->add_option("--period", cfg.period, "period tau of the input system")->capture_default_str();
  sub->add_option("--window", c.window, "time window A B")->expected(2);
  sub->add_option("--dt", c.dt, "time step");
}

void add_resolvent(CLI::App* sub, cli::RunConfig& cfg, Common& c) {
  auto& r = cfg.resolvent;
  sub->add_option("--angle-grid", c.angle_grid, "number of angles on the unit circle");
  auto* deltas = sub->add_option("--deltas", c.deltas, "radial deltas, decreasing")->delimiter(',');
  sub->add_option("--series-tol", r.series_tol)->capture_default_str();
  auto* terms = sub->add_option("--max-terms", r.max_terms, "Neumann terms (grid inputs: fitted to the window)")
                    ->capture_default_str();
  c.user_deltas = deltas;
  c.user_terms = terms;
  sub->add_option("--blowup-threshold", r.blowup_threshold)->capture_default_str();
  sub->add_option("--grid-probes", r.grid_probes)->capture_default_str();
}

void add_system(CLI::App* sub, cli::RunConfig& cfg, Common& c) {
  sub->add_option("--system", cfg.system, "system JSON")->required();
  sub->add_option("--rtol", cfg.integ.rtol)->capture_default_str();
  sub->add_option("--atol", cfg.integ.atol)->capture_default_str();
  sub->add_option("--max-step", cfg.integ.max_step)->capture_default_str();
  sub->add_flag("--integrate", c.integrate, "always integrate, even when a closed form exists");
}

void add_solver(CLI::App* sub, cli::RunConfig& cfg) {
  auto& s = cfg.solver;
  sub->add_option("--forcing", cfg.forcing, "forcing: trig polynomial JSON or grid CSV")->required();
  sub->add_option("--m-env", s.m_env)->capture_default_str();
  sub->add_option("--resid-tol", s.resid_tol)->capture_default_str();
  sub->add_option("--cond-cap", s.cond_cap)->capture_default_str();
  sub->add_option("--resonance-tol", s.resonance_tol)->capture_default_str();
  sub->add_option("--n-pairs", s.n_pairs)->capture_default_str();
  sub->add_option("--max-span", s.max_span)->capture_default_str();
  sub->add_option("--nodes-per-unit", s.quad.nodes_per_unit)->capture_default_str();
  sub->add_option("--quad-tol", s.quad.quad_tol)->capture_default_str();
  sub->add_option("--max-refinements", s.quad.max_refinements)->capture_default_str();
  auto& cs = cfg.carleman_settings;
  sub->add_option("--freq-min", cs.freq_min, "Carleman scan range for grid forcing")->capture_default_str();
  sub->add_option("--freq-max", cs.freq_max)->capture_default_str();
  sub->add_option("--freq-step", cs.freq_step)->capture_default_str();
  sub->add_option("--horizon", cs.horizon)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Circular spectrum and bounded solutions of periodic evolution equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  cli::RunConfig cfg;
  Common c;

  auto* spectrum = app.add_subcommand("spectrum", "circular spectrum of a function");
  spectrum->add_option("--input", cfg.input, "trig polynomial JSON or grid CSV")->required();
  spectrum->add_flag("--carleman", cfg.carleman, "also scan the Carleman spectrum");
  add_common(spectrum, cfg, c);
  add_resolvent(spectrum, cfg, c);

  auto* mono = app.add_subcommand("monodromy", "monodromy operator and its eigenvalues");
  mono->add_option("--anchor", cfg.anchor, "time t of P(t) = U(t, t - 1)")->capture_default_str();
  mono->add_option("--forcing", cfg.forcing, "optional forcing for the spectral gap");
  add_common(mono, cfg, c);
  add_system(mono, cfg, c);

  auto* solve = app.add_subcommand("solve", "bounded mild solution of the linear problem");
  add_common(solve, cfg, c);
  add_system(solve, cfg, c);
  add_solver(solve, cfg);

  auto* verify = app.add_subcommand("verify", "solve, then check residual and spectral inclusion");
  add_common(verify, cfg, c);
  add_system(verify, cfg, c);
  add_solver(verify, cfg);
  verify->add_option("--inclusion-dt", cfg.inclusion.dt)->capture_default_str();
  verify->add_option("--inclusion-terms", cfg.inclusion.resolvent.max_terms)->capture_default_str();

  auto* perturb = app.add_subcommand("perturb", "Picard iteration for a small nonlinear perturbation");
  add_common(perturb, cfg, c);
  add_system(perturb, cfg, c);
  add_solver(perturb, cfg);
  perturb->add_option("--nonlinearity", cfg.nonlinearity, "nonlinearity JSON")->required();
  perturb->add_option("--epsilon", cfg.epsilon, "perturbation size")->required();
  perturb->add_flag("--force", cfg.force, "run even when epsilon is above the threshold");
  auto& po = cfg.perturb;
  perturb->add_option("--order", po.order, "module combination order")->capture_default_str();
  perturb->add_option("--m-cap", po.m_cap)->capture_default_str();
  perturb->add_option("--max-modes", po.max_modes)->capture_default_str();
  perturb->add_option("--picard-tol", po.picard_tol)->capture_default_str();
  perturb->add_option("--max-iter", po.max_iterations)->capture_default_str();
  perturb->add_option("--perturb-resid-tol", po.resid_tol)->capture_default_str();

  auto* corpus = app.add_subcommand("corpus", "write a built-in test object");
  corpus->add_option("name", cfg.corpus_name, "levitan | ap_demo | heat_demo")->required();
  corpus->add_option("--modes", cfg.modes, "heat_demo Galerkin modes")->capture_default_str();
  add_common(corpus, cfg, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << code_token(ErrorCode::InvalidArgument) << ": " << e.what() << "\n";
    return 4;
  }

  const std::map<CLI::App*, cli::Command> commands{{spectrum, cli::Command::spectrum}, {mono, cli::Command::monodromy},
                                                   {solve, cli::Command::solve},       {verify, cli::Command::verify},
                                                   {perturb, cli::Command::perturb},   {corpus, cli::Command::corpus}};
  for (const auto& [sub, cmd] : commands)
    if (sub->parsed()) cfg.command = cmd;

  if (c.window.size() == 2) cfg.window = Window{c.window[0], c.window[1]};
  cfg.dt = c.dt;
  if (c.angle_grid) cfg.resolvent.angle_grid = *c.angle_grid;
  if (!c.deltas.empty()) cfg.resolvent.radial_deltas = c.deltas;
  if (c.integrate) cfg.solver.mode = PropagationMode::integrate;
  cfg.solver.seed = cfg.seed;
  if (c.user_terms) cfg.fit_terms = c.user_terms->count() == 0;
  if (c.user_deltas) cfg.fit_deltas = c.user_deltas->count() == 0;

  try {
    require(cfg.period > 0.0, ErrorCode::InvalidArgument, "--period must be positive");
    if (cfg.command == cli::Command::spectrum) cfg.resolvent.validate();
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return cli::exit_code_for(e.code());
  }

  const auto r = cli::run(cfg);
  if (r.exit_code != 0) std::cerr << r.error << "\n";
  return r.exit_code;
}
