#include "gnls/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "gnls/io.hpp"

namespace gnls {

namespace {

using Clock = std::chrono::steady_clock;
using KV = std::vector<std::pair<std::string, std::string>>;

struct Common {
  std::string graph_file;
  double p = 8.0;
  double mu = 0.0;
  double rho = 1.0;
  double h = 0.0;  // 0: default_h_target of the graph
  double tol = 0.0;  // 0: command default
  std::uint64_t seed = 12345;
  std::string out = "out";
};

void add_model_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--p", c.p, "nonlinearity exponent (> 6)")->capture_default_str();
  cmd->add_option("--rho", c.rho, "nonlinearity weight in [0, 1]")->capture_default_str();
}

void add_run_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--h", c.h, "target mesh spacing (default: shortest edge / 64)");
  cmd->add_option("--tol", c.tol, "solver tolerance (default depends on the command)");
  cmd->add_option("--seed", c.seed, "seed for every randomized start")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

void add_graph_flag(CLI::App* cmd, Common& c) {
  cmd->add_option("--graph", c.graph_file, "graph description file")
      ->required()
      ->check(CLI::ExistingFile);
}

struct Loaded {
  MetricGraph graph;
  Discretization d;
  double h_used;
};

Loaded load_problem(const Common& c) {
  MetricGraph g = read_graph_file(c.graph_file);
  double h = c.h > 0 ? c.h : default_h_target(g);
  Discretization d = discretize(g, h);
  return {std::move(g), std::move(d), h};
}

KV base_inputs(const Common& c, double h_used, double tol_used) {
  return {{"graph", c.graph_file}, {"p", format_double(c.p)},
          {"mu", format_double(c.mu)}, {"rho", format_double(c.rho)},
          {"h", format_double(h_used)}, {"tol", format_double(tol_used)},
          {"seed", std::to_string(c.seed)}};
}

void finish(const Common& c, const std::string& command, KV inputs, Clock::time_point t0) {
  double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(c.out, command, std::move(inputs), wall);
}

std::string ef_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ef_%04d.csv", i);
  return buf;
}

// Shared by `mountain-pass` and the bootstrap inside `continue`.
MountainPassResult mp_pipeline(const Discretization& d, const EnergyParams& prm,
                               std::uint64_t seed, double descent_tol, int path_nodes) {
  MountainPassConfig mc;
  mc.seed = seed;
  if (descent_tol > 0) mc.tol = descent_tol;
  if (path_nodes > 0) mc.path_nodes = path_nodes;
  return mountain_pass(d, prm, mc);
}

void print_report(const VerifyReport& rep) {
  std::cout << format_verify_report(rep)
            << (rep.all_pass ? "verify: ALL PASS" : "verify: FAIL") << "\n";
}

int cmd_eig(const Common& c, int k) {
  auto t0 = Clock::now();
  Loaded L = load_problem(c);
  PencilOptions po;
  po.tol = c.tol > 0 ? c.tol : 1e-10;
  po.seed = c.seed;
  SpectralResult r = eigenpairs(L.d.ops.K, L.d.ops.M, k, po);

  write_graph_file(L.graph, c.out + "/graph.g");
  write_eig_csv(r, c.out + "/eig.csv");
  for (int i = 0; i < r.eigenvalues.size(); ++i)
    write_function_csv({L.d.mesh, r.eigenvectors.col(i)}, c.out + "/" + ef_name(i));
  write_text_file(c.out + "/plot.gp",
                  "set datafile separator ','\n"
                  "set key autotitle columnhead\n"
                  "plot 'eig.csv' using 1:2 with linespoints pt 7 title 'eigenvalue'\n"
                  "pause -1\n");

  const double L2 = L.graph.total_length();
  const double fried = M_PI * M_PI / (L2 * L2);
  const double zero_tol = 1e-6 * fried;
  int first = -1;
  for (int i = 0; i < r.eigenvalues.size(); ++i)
    if (r.eigenvalues[i] > zero_tol) {
      first = i;
      break;
    }
  for (int i = 0; i < r.eigenvalues.size(); ++i)
    std::cout << "eig[" << i << "] = " << format_double(r.eigenvalues[i])
              << " residual " << format_double(r.residuals[i]) << "\n";
  if (first >= 0)
    std::cout << "lambda2 = " << format_double(r.eigenvalues[first]) << " multiplicity "
              << multiplicity_of(r.eigenvalues, first) << "\n"
              << "friedlander_bound = " << format_double(fried)
              << (r.eigenvalues[first] >= fried * (1.0 - 1e-9) ? " OK" : " VIOLATED") << "\n";

  KV in = base_inputs(c, L.h_used, po.tol);
  in.emplace_back("k", std::to_string(k));
  finish(c, "eig", std::move(in), t0);
  return 0;
}

int cmd_threshold(const Common& c) {
  auto t0 = Clock::now();
  MetricGraph g = read_graph_file(c.graph_file);
  double h = c.h > 0 ? c.h : default_h_target(g);
  double tol = c.tol > 0 ? c.tol : 1e-10;
  ThresholdResult tr = mass_threshold(g, c.p, h, tol, c.seed);

  std::cout << "lambda2 = " << format_double(tr.spectrum.lambda2) << " multiplicity "
            << tr.spectrum.multiplicity << "\n"
            << "mu1 = " << format_double(tr.mu1) << "\n"
            << "lower_bound = " << format_double(tr.lower_bound) << "\n";

  write_graph_file(g, c.out + "/graph.g");
  write_text_file(c.out + "/threshold.csv",
                  "name,value\n"
                  "mu1," + format_double(tr.mu1) + "\n" +
                  "lower_bound," + format_double(tr.lower_bound) + "\n" +
                  "lambda2," + format_double(tr.spectrum.lambda2) + "\n" +
                  "multiplicity," + std::to_string(tr.spectrum.multiplicity) + "\n" +
                  "friedlander_bound," + format_double(tr.spectrum.friedlander_bound) + "\n");
  finish(c, "threshold", base_inputs(c, h, tol), t0);
  return 0;
}

int cmd_solve_constant(const Common& c) {
  auto t0 = Clock::now();
  Loaded L = load_problem(c);
  EnergyParams prm{c.p, c.rho, c.mu};
  MorseConfig mo;
  BoundState s = constant_state(L.d, prm, mo);
  VerifyReport rep = verify_solution(s, L.d.ops);

  std::cout << "kappa = " << format_double(std::sqrt(c.mu / L.graph.total_length())) << "\n"
            << "lambda = " << format_double(s.lambda) << "\n"
            << "energy = " << format_double(s.energy_value) << "\n";
  print_report(rep);

  save_state(s, c.out + "/state");
  write_text_file(c.out + "/state/verify.txt", format_verify_report(rep));
  finish(c, "solve-constant", base_inputs(c, L.h_used, 0.0), t0);
  return rep.all_pass ? 0 : 1;
}

int cmd_minimize(const Common& c, double perturb) {
  auto t0 = Clock::now();
  Loaded L = load_problem(c);
  EnergyParams prm{c.p, c.rho, c.mu};
  prm.validate();

  // Start from the constant nudged along the second eigenfunction; at
  // supercritical mass the flow leaves the constant, below it it returns.
  PencilOptions po;
  po.seed = c.seed;
  SpectralResult sr = eigenpairs(L.d.ops.K, L.d.ops.M, 2, po);
  const double kappa = std::sqrt(c.mu / L.graph.total_length());
  Vec v0 = Vec::Constant(L.d.mesh->num_dofs(), kappa);
  Vec phi2 = sr.eigenvectors.col(1);
  v0 += perturb * kappa / phi2.cwiseAbs().maxCoeff() * phi2;

  FlowOptions fo;
  if (c.tol > 0) fo.tol = c.tol;
  fo.compute_morse = false;  // indices are computed on the polished state below
  FlowResult fr = normalized_gradient_flow({L.d.mesh, v0}, L.d, prm, fo);
  // The flow only reaches first-order accuracy in the preconditioned gradient;
  // a Newton polish from its endpoint makes the identity battery meaningful.
  NewtonInfo ni;
  BoundState s = newton_refine(fr.state.u, fr.state.lambda, L.d, prm, {}, &ni, false, true);
  VerifyReport rep = verify_solution(s, L.d.ops);

  std::cout << "iterations = " << fr.iterations << " + " << ni.iterations << " newton\n"
            << "lambda = " << format_double(s.lambda) << "\n"
            << "energy = " << format_double(s.energy_value) << "\n";
  print_report(rep);

  save_state(s, c.out + "/state");
  write_text_file(c.out + "/state/verify.txt", format_verify_report(rep));
  KV in = base_inputs(c, L.h_used, fo.tol);
  in.emplace_back("perturb", format_double(perturb));
  finish(c, "minimize", std::move(in), t0);
  return rep.all_pass ? 0 : 1;
}

int cmd_mountain_pass(const Common& c, int path_nodes) {
  auto t0 = Clock::now();
  Loaded L = load_problem(c);
  EnergyParams prm{c.p, c.rho, c.mu};
  MountainPassResult mr = mp_pipeline(L.d, prm, c.seed, c.tol, path_nodes);
  VerifyReport rep = verify_solution(mr.candidate, L.d.ops);

  std::cout << "level = " << format_double(mr.level) << "\n"
            << "energy_at_constant = " << format_double(mr.energy_at_constant) << "\n"
            << "energy_at_bump = " << format_double(mr.energy_at_bump) << "\n"
            << "sweeps = " << mr.sweeps << "\n"
            << "lambda = " << format_double(mr.candidate.lambda) << "\n"
            << "morse = " << mr.candidate.morse_unconstrained << " constrained "
            << mr.candidate.morse_constrained << "\n";
  print_report(rep);

  save_state(mr.candidate, c.out + "/state");
  write_text_file(c.out + "/state/verify.txt", format_verify_report(rep));
  std::string path_csv = "node,energy\n";
  for (size_t i = 0; i < mr.path_energy.size(); ++i)
    path_csv += std::to_string(i) + "," + format_double(mr.path_energy[i]) + "\n";
  write_text_file(c.out + "/path.csv", path_csv);
  std::string hist_csv = "sweep,level\n";
  for (size_t i = 0; i < mr.level_history.size(); ++i)
    hist_csv += std::to_string(i) + "," + format_double(mr.level_history[i]) + "\n";
  write_text_file(c.out + "/level_history.csv", hist_csv);
  write_text_file(c.out + "/plot.gp",
                  "set datafile separator ','\n"
                  "set key autotitle columnhead\n"
                  "set multiplot layout 1,2\n"
                  "plot 'path.csv' using 1:2 with linespoints pt 7 title 'path energy'\n"
                  "plot 'level_history.csv' using 1:2 with lines title 'level'\n"
                  "unset multiplot\npause -1\n");

  KV in = base_inputs(c, L.h_used, c.tol > 0 ? c.tol : MountainPassConfig{}.tol);
  in.emplace_back("path_nodes", std::to_string(path_nodes));
  finish(c, "mountain-pass", std::move(in), t0);
  return rep.all_pass ? 0 : 1;
}

int cmd_continue(const Common& c, const std::string& param, double to, int steps,
                 const std::string& values_arg, const std::string& from, int path_nodes) {
  auto t0 = Clock::now();
  require(param == "rho" || param == "mu", errc::invalid_parameter,
          "--param must be rho or mu");
  Schedule sched;
  sched.param = param == "mu" ? Schedule::Param::mu : Schedule::Param::rho;

  Discretization d;
  BoundState initial;
  double h_used = 0.0;
  if (!from.empty()) {
    d = load_mesh_info(from);
    initial = load_state(d, from);
    h_used = d.mesh->max_spacing();
  } else {
    Loaded L = load_problem(c);
    d = std::move(L.d);
    h_used = L.h_used;
    EnergyParams prm{c.p, c.rho, c.mu};
    initial = mp_pipeline(d, prm, c.seed, 0.0, path_nodes).candidate;
  }

  const double start = sched.param == Schedule::Param::mu ? initial.params.mu
                                                          : initial.params.rho;
  if (!values_arg.empty()) {
    size_t pos = 0;
    while (pos <= values_arg.size()) {
      size_t comma = values_arg.find(',', pos);
      std::string tok = values_arg.substr(pos, comma - pos);
      const char* b = tok.c_str();
      char* end = nullptr;
      double v = std::strtod(b, &end);
      require(end == b + tok.size() && !tok.empty(), errc::parse_error,
              "--values: bad number '" + tok + "'");
      sched.values.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  } else {
    require(std::isfinite(to), errc::invalid_parameter, "--to or --values is required");
    require(steps >= 1, errc::invalid_parameter, "--steps must be >= 1");
    for (int i = 0; i <= steps; ++i) {
      double t = static_cast<double>(i) / steps;
      // Mass moves geometrically (its natural scale), rho arithmetically.
      sched.values.push_back(sched.param == Schedule::Param::mu
                                 ? start * std::pow(to / start, t)
                                 : start + (to - start) * t);
    }
  }

  ContinuationConfig cc;
  if (c.tol > 0) cc.newton.tol = c.tol;
  ContinuationTrace trace = continuation(initial, d, sched, cc);

  double lam_min = trace.entries.front().state.lambda, lam_max = lam_min;
  for (const TraceEntry& te : trace.entries) {
    lam_min = std::min(lam_min, te.state.lambda);
    lam_max = std::max(lam_max, te.state.lambda);
  }
  std::cout << "entries = " << trace.entries.size() << "\n"
            << "newton_solves = " << trace.newton_solves << "\n"
            << "lambda_range = [" << format_double(lam_min) << ", " << format_double(lam_max)
            << "]\n";

  save_trace(trace, c.out + "/trace");
  write_text_file(c.out + "/plot.gp",
                  "set datafile separator ','\n"
                  "set key autotitle columnhead\n"
                  "set logscale y\n"
                  "plot 'trace/trace.csv' using 2:3 with linespoints pt 7 title 'lambda'\n"
                  "pause -1\n");

  KV in = base_inputs(c, h_used, cc.newton.tol);
  in.emplace_back("param", param);
  in.emplace_back("to", format_double(to));
  in.emplace_back("steps", std::to_string(steps));
  in.emplace_back("values", values_arg);
  in.emplace_back("from", from);
  finish(c, "continue", std::move(in), t0);
  return 0;
}

int cmd_blowup(const Common& c, const std::string& trace_dir, double R, double cutoff, double C1,
               double C2) {
  auto t0 = Clock::now();
  Discretization d = load_mesh_info(trace_dir);
  ContinuationTrace trace = load_trace(d, trace_dir);
  require(!trace.entries.empty(), errc::invalid_parameter, "trace has no entries");
  std::vector<BlowupReport> reps = analyze_trace(trace, R, cutoff, C1, C2);
  write_blowup_csv(reps, c.out + "/blowup.csv");

  const BlowupReport& last = reps.back();
  const BoundState& s = trace.entries.back().state;
  std::vector<Peak> last_peaks;
  for (const PeakRecord& pr : last.peaks) last_peaks.push_back(pr.peak);
  write_envelope_csv(s, last_peaks, C1, C2, c.out + "/envelope.csv");
  if (!last.peaks.empty())
    write_profile_csv(last.peaks.front().profile, s.params.p, s.params.rho,
                      c.out + "/profile.csv");
  else
    write_text_file(c.out + "/profile.csv", "y,v,limit\n");
  write_text_file(c.out + "/plot.gp",
                  "set datafile separator ','\n"
                  "set key autotitle columnhead\n"
                  "set multiplot layout 1,2\n"
                  "set title 'rescaled profile vs limit'\n"
                  "plot 'profile.csv' using 1:2 with points pt 7 ps 0.4 title 'v', \\\n"
                  "     'profile.csv' using 1:3 with lines title 'limit'\n"
                  "set title 'decay envelope'\n"
                  "set logscale y\n"
                  "plot 'envelope.csv' using 3:4 with points pt 7 ps 0.3 title '|u|', \\\n"
                  "     'envelope.csv' using 3:5 with points pt 6 ps 0.3 title 'envelope'\n"
                  "unset multiplot\npause -1\n");

  std::cout << "final lambda = " << format_double(last.lambda) << "\n"
            << "peaks = " << last.peaks.size() << (last.degenerate ? " (degenerate top)" : "")
            << "\n";
  if (!last.peaks.empty()) {
    const PeakRecord& pr = last.peaks.front();
    std::cout << "ratio = " << format_double(pr.ratio) << "\n"
              << "regime = "
              << (pr.profile.regime == PeakRegime::interior ? "interior" : "vertex") << "\n"
              << "sup_error = " << format_double(pr.profile.sup_error) << "\n";
  }
  std::cout << "envelope C1 = " << format_double(last.envelope.C1)
            << " C2 = " << format_double(last.envelope.C2) << " "
            << (last.envelope.pass ? "PASS" : "FAIL")
            << " margin = " << format_double(last.envelope.worst_margin)
            << " fitted_C2 = " << format_double(last.envelope.fitted_C2) << "\n";

  KV in = {{"trace", trace_dir},       {"R", format_double(R)},
           {"cutoff", format_double(cutoff)}, {"C1", format_double(C1)},
           {"C2", format_double(C2)},  {"out", c.out}};
  finish(c, "blowup", std::move(in), t0);
  return 0;
}

int cmd_verify(const Common& c, const std::string& state_dir) {
  auto t0 = Clock::now();
  Discretization d = load_mesh_info(state_dir);
  BoundState s = load_state(d, state_dir);
  VerifyOptions vo;
  if (c.tol > 0) vo.tol = c.tol;
  VerifyReport rep = verify_solution(s, d.ops, vo);
  print_report(rep);
  write_text_file(c.out + "/verify.txt", format_verify_report(rep));
  KV in = {{"state", state_dir}, {"tol", format_double(vo.tol)}, {"out", c.out}};
  finish(c, "verify", std::move(in), t0);
  return rep.all_pass ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"mass-constrained bound states of the supercritical NLS on metric graphs"};
  // --h is the mesh width, so the help flag keeps only its long form.
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);
  auto sub = [&app](const char* name, const char* desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->set_help_flag("--help", "print help and exit");
    return s;
  };
  int rc = 0;

  Common c_eig;
  int eig_k = 6;
  auto* eig = sub("eig", "Laplacian eigenpairs of the graph");
  add_graph_flag(eig, c_eig);
  add_run_flags(eig, c_eig);
  eig->add_option("--k", eig_k, "number of eigenpairs")->capture_default_str();
  eig->callback([&] { rc = cmd_eig(c_eig, eig_k); });

  Common c_thr;
  auto* thr = sub("threshold", "mass threshold mu1 of the constant state");
  add_graph_flag(thr, c_thr);
  thr->add_option("--p", c_thr.p, "nonlinearity exponent (> 6)")->capture_default_str();
  add_run_flags(thr, c_thr);
  thr->callback([&] { rc = cmd_threshold(c_thr); });

  Common c_sc;
  auto* sc = sub("solve-constant", "constant state kappa with verification");
  add_graph_flag(sc, c_sc);
  add_model_flags(sc, c_sc);
  sc->add_option("--mu", c_sc.mu, "mass")->required();
  add_run_flags(sc, c_sc);
  sc->callback([&] { rc = cmd_solve_constant(c_sc); });

  Common c_min;
  double min_perturb = 1e-2;
  auto* mn = sub("minimize", "normalized gradient flow from the perturbed constant");
  add_graph_flag(mn, c_min);
  add_model_flags(mn, c_min);
  mn->add_option("--mu", c_min.mu, "mass")->required();
  add_run_flags(mn, c_min);
  mn->add_option("--perturb", min_perturb, "relative nudge along the second eigenfunction")
      ->capture_default_str();
  mn->callback([&] { rc = cmd_minimize(c_min, min_perturb); });

  Common c_mp;
  int mp_nodes = 33;
  auto* mp = sub("mountain-pass", "minimax bound state between constant and bump");
  add_graph_flag(mp, c_mp);
  add_model_flags(mp, c_mp);
  mp->add_option("--mu", c_mp.mu, "mass")->required();
  add_run_flags(mp, c_mp);
  mp->add_option("--path-nodes", mp_nodes, "path discretization nodes")->capture_default_str();
  mp->callback([&] { rc = cmd_mountain_pass(c_mp, mp_nodes); });

  Common c_ct;
  std::string ct_param, ct_values, ct_from;
  double ct_to = std::numeric_limits<double>::quiet_NaN();
  int ct_steps = 8, ct_nodes = 33;
  auto* ct = sub("continue", "parameter continuation of a bound state");
  ct->add_option("--graph", c_ct.graph_file, "graph description file (unless --from)")
      ->check(CLI::ExistingFile);
  add_model_flags(ct, c_ct);
  ct->add_option("--mu", c_ct.mu, "mass at the start");
  add_run_flags(ct, c_ct);
  ct->add_option("--param", ct_param, "continuation parameter: rho or mu")->required();
  ct->add_option("--to", ct_to, "final parameter value");
  ct->add_option("--steps", ct_steps, "schedule steps to --to")->capture_default_str();
  ct->add_option("--values", ct_values, "explicit comma-separated schedule");
  ct->add_option("--from", ct_from, "state directory to continue from (else a mountain-pass run)")
      ->check(CLI::ExistingDirectory);
  ct->add_option("--path-nodes", ct_nodes, "path nodes for the bootstrap run")
      ->capture_default_str();
  ct->callback([&] {
    require(!ct_from.empty() || !c_ct.graph_file.empty(), errc::invalid_parameter,
            "continue needs --graph or --from");
    require(!ct_from.empty() || c_ct.mu > 0, errc::invalid_parameter,
            "continue needs --mu with --graph");
    rc = cmd_continue(c_ct, ct_param, ct_to, ct_steps, ct_values, ct_from, ct_nodes);
  });

  Common c_bl;
  std::string bl_trace;
  double bl_R = 15.0, bl_cutoff = 10.0, bl_C1 = 2.0, bl_C2 = 0.25;
  auto* bl = sub("blowup", "concentration report over a continuation trace");
  bl->add_option("--trace", bl_trace, "trace directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  bl->add_option("--out", c_bl.out, "output directory")->capture_default_str();
  bl->add_option("--R", bl_R, "window radius in eps units")->capture_default_str();
  bl->add_option("--cutoff", bl_cutoff, "interior/vertex regime cutoff")->capture_default_str();
  bl->add_option("--C1", bl_C1, "envelope prefactor")->capture_default_str();
  bl->add_option("--C2", bl_C2, "envelope decay rate")->capture_default_str();
  bl->callback([&] { rc = cmd_blowup(c_bl, bl_trace, bl_R, bl_cutoff, bl_C1, bl_C2); });

  Common c_vf;
  std::string vf_state;
  auto* vf = sub("verify", "re-run the identity battery on a saved state");
  vf->add_option("--state", vf_state, "state directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  vf->add_option("--tol", c_vf.tol, "relative tolerance for the identities");
  vf->add_option("--out", c_vf.out, "output directory")->capture_default_str();
  vf->callback([&] { rc = cmd_verify(c_vf, vf_state); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_config() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace gnls
