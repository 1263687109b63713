#include "gnls/solvers.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "gnls/blowup.hpp"
#include "gnls/spectral.hpp"

namespace gnls {

namespace {

double mass_of(const Vec& u, const Operators& ops) { return u.dot(ops.M * u); }

// Pure mass rescaling. No folding to |v|: the fold would reverse descent
// directions whenever a step pushes near-zero tail values through zero, which
// is exactly what happens inside a concentration basin.
Vec renormalized(Vec v, const Operators& ops, double mu) {
  double m = mass_of(v, ops);
  require(m > 0.0, errc::invalid_parameter, "cannot renormalize a vanishing state");
  return Vec(std::sqrt(mu / m) * v);
}

double energy_of(const Vec& u, const MeshPtr& mesh, const Operators& ops,
                 const EnergyParams& prm) {
  return energy(GraphFunction{mesh, u}, ops, prm);
}

std::string brief_history(const std::vector<double>& h) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  size_t n = h.size();
  for (size_t i = 0; i < n; ++i) {
    if (n > 8 && i == 4) {
      os << "... ";
      i = n - 4;
    }
    os << h[i] << (i + 1 < n ? " " : "");
  }
  return os.str();
}

// Smallest positive eigenvalue of (K, M) on an existing discretization.
double lambda2_of(const Discretization& d, double tol, std::uint64_t seed) {
  int n = d.mesh->num_dofs();
  PencilOptions popts;
  popts.tol = tol;
  popts.seed = seed;
  SpectralResult sp = eigenpairs(d.ops.K, d.ops.M, std::min(n, 6), popts);
  double L = d.mesh->graph().total_length();
  double zero_tol = 1e-6 * (M_PI * M_PI) / (L * L);
  for (int i = 0; i < sp.eigenvalues.size(); ++i)
    if (sp.eigenvalues(i) > zero_tol) return sp.eigenvalues(i);
  fail(errc::no_convergence, "no positive eigenvalue found below the probe window");
}

}  // namespace

Discretization discretize(const MetricGraph& g, double h_target) {
  Discretization d;
  d.mesh = build_mesh(g, h_target);
  d.ops = assemble_operators(*d.mesh);
  return d;
}

Discretization discretize(const MetricGraph& g, std::vector<int> elements_per_edge) {
  Discretization d;
  d.mesh = build_mesh(g, std::move(elements_per_edge));
  d.ops = assemble_operators(*d.mesh);
  return d;
}

BoundState make_state(GraphFunction u, double lambda, const Discretization& d,
                      const EnergyParams& prm, bool mountain_pass_tag, bool compute_morse,
                      const MorseConfig& morse) {
  require(u.mesh == d.mesh, errc::invalid_parameter, "state mesh differs from discretization");
  BoundState s;
  s.lambda = lambda;
  s.params = prm;
  s.mountain_pass_tag = mountain_pass_tag;
  s.mass = mass_of(u.values, d.ops);
  s.energy_value = energy(u, d.ops, prm);

  Vec N = nonlinear_term(u, prm.p);
  Vec Ku = d.ops.K * u.values;
  Vec Mu = d.ops.M * u.values;
  Vec F1 = Ku + lambda * Mu - prm.rho * N;
  double scale =
      std::max({Ku.norm(), std::abs(lambda) * Mu.norm(), prm.rho * N.norm()}) + 1e-300;
  s.residuals.stationary_rel = F1.norm() / scale;

  Vec gc = constrained_gradient(u, d.ops, prm);
  Eigen::SimplicialLDLT<SpMat> mfac(d.ops.M);
  require(mfac.info() == Eigen::Success, errc::singular_jacobian,
          "mass matrix factorization failed");
  Vec dir = mfac.solve(gc);
  s.residuals.constrained_grad = std::sqrt(std::max(0.0, dir.dot(gc)));

  StrongResidual sr = strong_residual(u, lambda, prm);
  s.residuals.interior_fd = sr.interior_norm;
  s.residuals.kirchhoff_fd = sr.max_defect();

  double umax = u.values.maxCoeff();
  double umin = u.values.minCoeff();
  s.positive = umax > 0.0 && umin > -1e-12 * std::max(1e-300, std::abs(umax));

  if (compute_morse) {
    MorseIndices mi = morse_index(u, lambda, d.ops, prm, morse);
    s.morse_unconstrained = mi.unconstrained;
    s.morse_constrained = mi.constrained;
  }
  s.u = std::move(u);
  return s;
}

BoundState constant_state(const Discretization& d, const EnergyParams& prm,
                          const MorseConfig& morse) {
  prm.validate();
  double L = d.mesh->graph().total_length();
  double kappa = std::sqrt(prm.mu / L);
  double lambda = prm.rho * std::pow(kappa, prm.p - 2.0);
  GraphFunction u{d.mesh, Vec::Constant(d.mesh->num_dofs(), kappa)};
  return make_state(std::move(u), lambda, d, prm, false, true, morse);
}

ThresholdResult mass_threshold(const MetricGraph& g, double p, double h_target, double tol,
                               std::uint64_t seed) {
  require(p > 6.0, errc::invalid_parameter, "threshold formula needs p > 6");
  ThresholdResult r;
  r.spectrum = lambda2(g, h_target, tol, seed);
  double L = g.total_length();
  double ex = 2.0 / (p - 2.0);
  r.mu1 = L * std::pow(r.spectrum.lambda2 / (p - 2.0), ex);
  r.lower_bound = std::pow(L, (p - 6.0) / (p - 2.0)) * std::pow(M_PI * M_PI / (p - 2.0), ex);
  return r;
}

FlowResult normalized_gradient_flow(const GraphFunction& u0, const Discretization& d,
                                    const EnergyParams& prm, const FlowOptions& opts) {
  prm.validate();
  require(u0.mesh == d.mesh, errc::invalid_parameter, "state mesh differs from discretization");
  require(opts.tol > 0 && opts.step > 0, errc::invalid_parameter, "flow needs positive tol/step");

  Eigen::SimplicialLDLT<SpMat> mfac(d.ops.M);
  require(mfac.info() == Eigen::Success, errc::singular_jacobian,
          "mass matrix factorization failed");

  // Fold the start onto the positive cone once; minimizers do not change sign
  // and this keeps sign-indefinite seeds from settling on -u.
  Vec u = renormalized(u0.values.cwiseAbs(), d.ops, prm.mu);
  double E = energy_of(u, d.mesh, d.ops, prm);
  double step = opts.step;
  const double floor_tol = std::max(100.0 * opts.tol, 1e-7);
  Vec u_prev, gc_prev;
  int it = 0;
  int flat = 0;  // accepted steps in a row whose decrease drowned in rounding
  bool converged = false;

  for (; it < opts.max_iters; ++it) {
    Vec gc = constrained_gradient(GraphFunction{d.mesh, u}, d.ops, prm);
    Vec dir = mfac.solve(gc);
    double gn2 = std::max(0.0, dir.dot(gc));
    double gnorm = std::sqrt(gn2);
    if (gnorm <= opts.tol) {
      converged = true;
      break;
    }

    // Curvature-scaled trial step (s's / s'y in the M metric). A plain
    // doubled-previous-step rule crawls on stiff meshes: one noise-level
    // rejection caps the doubling and the step never recovers. On nonconvex
    // stretches (s'y <= 0) restart the search at problem scale for the same
    // reason.
    double sigma = std::min(2.0 * step, 1e6);
    if (u_prev.size() == u.size()) {
      Vec s = u - u_prev;
      double sy = s.dot(gc - gc_prev);
      sigma = sy > 0.0 ? std::clamp(mass_of(s, d.ops) / sy, 1e-12, 1e6)
                       : std::min(std::max(2.0 * step, 1.0), 1e6);
    }
    u_prev = u;
    gc_prev = gc;

    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec trial = renormalized(u - sigma * dir, d.ops, prm.mu);
      double Et = energy_of(trial, d.mesh, d.ops, prm);
      if (Et <= E - 1e-4 * sigma * gn2) {
        double dec = E - Et;
        flat = dec <= 8.0 * 2.22e-16 * (1.0 + std::abs(E)) ? flat + 1 : 0;
        u = std::move(trial);
        E = Et;
        step = sigma;
        accepted = true;
        break;
      }
      sigma *= 0.5;
    }
    // Either no acceptable step exists or the accepted ones no longer change
    // the energy at double precision: the flow has hit the rounding floor.
    // Accept only when the gradient is already small enough for a Newton
    // polish to take over.
    if (!accepted || flat >= 50) {
      if (gnorm <= floor_tol) {
        converged = true;
        break;
      }
      fail(errc::no_convergence,
           "gradient flow stalled at gradient norm " + std::to_string(gnorm));
    }
  }
  if (!converged) fail(errc::max_iters_exceeded, "gradient flow: iteration limit");

  double lambda = lagrange_multiplier(GraphFunction{d.mesh, u}, d.ops, prm);
  FlowResult r;
  r.state = make_state(GraphFunction{d.mesh, std::move(u)}, lambda, d, prm, false,
                       opts.compute_morse, opts.morse);
  r.iterations = it;
  r.converged = true;
  return r;
}

GraphFunction build_bump(const Discretization& d, const EnergyParams& prm) {
  prm.validate();
  const MetricGraph& g = d.mesh->graph();
  int estar = 0;
  for (int e = 1; e < g.num_edges(); ++e)
    if (g.edge(e).length > g.edge(estar).length) estar = e;
  const double Lstar = g.edge(estar).length;
  const double S = std::min(Lstar, 1.0);
  const double c = Lstar / 2.0;
  const double a0 = S / 2.0;

  // The constant's action with the nonlinearity fully on; the bump is tested
  // with it half off, the worst pairing over the homotopy family.
  EnergyParams full = prm;
  full.rho = 1.0;
  double L = g.total_length();
  Vec kap = Vec::Constant(d.mesh->num_dofs(), std::sqrt(prm.mu / L));
  double target = energy_of(kap, d.mesh, d.ops, full);
  EnergyParams low = prm;
  low.rho = std::min(prm.rho, 0.5);

  double t = 1.0;
  for (int iter = 0; iter < 60; ++iter, t *= 2.0) {
    double half_width = a0 / t;
    double amp = std::sqrt(t);
    GraphFunction v = interpolate(d.mesh, [&](int e, double s) {
      if (e != estar) return 0.0;
      double y = s - c;
      if (std::abs(y) >= half_width) return 0.0;
      double cs = std::cos(M_PI * y / (2.0 * half_width));
      return amp * cs * cs;
    });
    double m = mass_of(v.values, d.ops);
    if (m <= 0.0) fail(errc::edge_too_short, "bump support fell below the mesh resolution");
    v.values *= std::sqrt(prm.mu / m);
    if (energy(v, d.ops, low) < target) return v;
  }
  fail(errc::no_convergence,
       "no concentrated state below the constant's action after 60 scale doublings");
}

BoundState newton_refine(const GraphFunction& u0, double lambda0, const Discretization& d,
                         const EnergyParams& prm, const NewtonOptions& opts, NewtonInfo* info,
                         bool mountain_pass_tag, bool compute_morse, const MorseConfig& morse) {
  prm.validate();
  require(u0.mesh == d.mesh, errc::invalid_parameter, "state mesh differs from discretization");
  const int n = d.mesh->num_dofs();
  const auto& K = d.ops.K;
  const auto& M = d.ops.M;

  Vec u = u0.values;
  double lambda = lambda0;
  std::vector<double> history;
  double best = std::numeric_limits<double>::infinity();
  int it = 0;

  Eigen::SparseLU<SpMat> lu;
  for (;; ++it) {
    Vec N = nonlinear_term(GraphFunction{d.mesh, u}, prm.p);
    Vec Ku = K * u;
    Vec Mu = M * u;
    Vec F1 = Ku + lambda * Mu - prm.rho * N;
    double F2 = 0.5 * (u.dot(Mu) - prm.mu);
    double scale =
        std::max({Ku.norm(), std::abs(lambda) * Mu.norm(), prm.rho * N.norm()}) + 1e-300;
    double rel = std::max(F1.norm() / scale, std::abs(F2) / prm.mu);
    history.push_back(rel);
    if (rel <= opts.tol) break;
    if (it >= 2 && rel > 1e4 * best)
      fail(errc::diverged, "newton residual grew: " + brief_history(history));
    best = std::min(best, rel);
    if (it >= opts.max_iters)
      fail(errc::no_convergence, "newton: iteration limit, residuals " + brief_history(history));

    SpMat W = nonlinear_weight(GraphFunction{d.mesh, u}, prm.p);
    SpMat H = K + lambda * M - (prm.p - 1.0) * prm.rho * W;
    H.makeCompressed();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(H.nonZeros() + 2 * n);
    for (int col = 0; col < H.outerSize(); ++col)
      for (SpMat::InnerIterator jt(H, col); jt; ++jt)
        trip.emplace_back(jt.row(), col, jt.value());
    for (int i = 0; i < n; ++i) {
      if (Mu(i) != 0.0) {
        trip.emplace_back(i, n, Mu(i));
        trip.emplace_back(n, i, Mu(i));
      }
    }
    SpMat B(n + 1, n + 1);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();

    lu.compute(B);
    if (lu.info() != Eigen::Success)
      fail(errc::singular_jacobian, "bordered jacobian factorization failed");
    Vec rhs(n + 1);
    rhs.head(n) = -F1;
    rhs(n) = -F2;
    Vec delta = lu.solve(rhs);
    u += delta.head(n);
    lambda += delta(n);
  }

  if (info) {
    info->iterations = it;
    info->residual_history = history;
  }
  return make_state(GraphFunction{d.mesh, std::move(u)}, lambda, d, prm, mountain_pass_tag,
                    compute_morse, morse);
}

namespace {

struct PathState {
  std::vector<Vec> nodes;
  std::vector<double> energies;

  int argmax() const {
    return int(std::max_element(energies.begin(), energies.end()) - energies.begin());
  }
  double level() const { return *std::max_element(energies.begin(), energies.end()); }
};

// Piecewise-linear re-equidistribution in the metric
// ds = sqrt(||du||_M^2 + dE^2), endpoints pinned. Returns false (leaving the
// path untouched) if the resampled path would raise the running maximum, or
// drop it by more than a sliver of the barrier height; the second refusal
// keeps the samples from losing the ridge once the energy drop toward the
// bump dominates the arclength.
bool redistribute(PathState& path, const Discretization& d, const EnergyParams& prm) {
  const int P = int(path.nodes.size());
  // The energy drop into the concentration basin dwarfs the barrier, so raw
  // dE in the metric would pull every sample off the ridge; weighting it by
  // (path length / energy range) keeps the two length scales comparable.
  double lu = 0.0;
  double emin = path.energies[0], emax = path.energies[0];
  for (int i = 1; i < P; ++i) {
    lu += std::sqrt(mass_of(Vec(path.nodes[i] - path.nodes[i - 1]), d.ops));
    emin = std::min(emin, path.energies[i]);
    emax = std::max(emax, path.energies[i]);
  }
  double we = emax > emin ? lu / (emax - emin) : 0.0;
  std::vector<double> cum(P, 0.0);
  for (int i = 1; i < P; ++i) {
    Vec du = path.nodes[i] - path.nodes[i - 1];
    double dE = we * (path.energies[i] - path.energies[i - 1]);
    cum[i] = cum[i - 1] + std::sqrt(mass_of(du, d.ops) + dE * dE);
  }
  if (cum[P - 1] <= 0.0) return false;

  std::vector<Vec> fresh(P);
  std::vector<double> fe(P);
  fresh[0] = path.nodes[0];
  fe[0] = path.energies[0];
  fresh[P - 1] = path.nodes[P - 1];
  fe[P - 1] = path.energies[P - 1];
  int seg = 0;
  for (int i = 1; i + 1 < P; ++i) {
    double target = cum[P - 1] * double(i) / double(P - 1);
    while (seg + 2 < P && cum[seg + 1] < target) ++seg;
    double w = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    w = std::clamp(w, 0.0, 1.0);
    Vec blend = (1.0 - w) * path.nodes[seg] + w * path.nodes[seg + 1];
    fresh[i] = renormalized(std::move(blend), d.ops, prm.mu);
    fe[i] = energy_of(fresh[i], d.mesh, d.ops, prm);
  }
  double old_level = path.level();
  double new_level = *std::max_element(fe.begin(), fe.end());
  double slack = 1e-12 * (1.0 + std::abs(old_level));
  double barrier = old_level - std::max(path.energies.front(), path.energies.back());
  if (new_level > old_level + slack) return false;
  if (new_level < old_level - 0.05 * std::max(barrier, 0.0) - slack) return false;
  path.nodes = std::move(fresh);
  path.energies = std::move(fe);
  return true;
}

}  // namespace

MountainPassResult mountain_pass(const Discretization& d, const EnergyParams& prm,
                                 const MountainPassConfig& cfg) {
  prm.validate();
  require(prm.rho >= 0.5 - 1e-12, errc::invalid_parameter,
          "the path construction needs rho >= 1/2");
  require(cfg.path_nodes >= 5, errc::invalid_parameter, "path needs at least 5 nodes");

  MountainPassResult result;

  // Below the threshold mass the constant is a strict local minimizer, which
  // is what makes it a usable path endpoint; above it we still run but warn.
  {
    double l2 = lambda2_of(d, 1e-10, cfg.seed);
    double L = d.mesh->graph().total_length();
    double mu1 = L * std::pow(l2 / (prm.p - 2.0), 2.0 / (prm.p - 2.0));
    result.mass_above_threshold = prm.mu >= mu1 * (1.0 - 1e-12);
    if (result.mass_above_threshold)
      std::cerr << "warning: mass " << prm.mu << " is at or above the threshold " << mu1
                << "; the constant may no longer be a local minimizer\n";
  }

  Eigen::SimplicialLDLT<SpMat> mfac(d.ops.M);
  require(mfac.info() == Eigen::Success, errc::singular_jacobian,
          "mass matrix factorization failed");

  double L = d.mesh->graph().total_length();
  Vec a = Vec::Constant(d.mesh->num_dofs(), std::sqrt(prm.mu / L));
  Vec b = build_bump(d, prm).values;

  const int P = cfg.path_nodes;
  PathState path;
  path.nodes.resize(P);
  path.energies.resize(P);
  std::vector<double> ts(P);
  for (int i = 0; i < P; ++i) ts[i] = double(i) / double(P - 1);
  auto rebuild = [&] {
    for (int i = 0; i < P; ++i) {
      path.nodes[i] = renormalized((1.0 - ts[i]) * a + ts[i] * b, d.ops, prm.mu);
      path.energies[i] = energy_of(path.nodes[i], d.mesh, d.ops, prm);
    }
  };
  rebuild();
  // A barrier too narrow for the uniform grid shows up as the max sitting on
  // an endpoint; squeezing the parameter grid toward that endpoint resolves
  // it whenever a barrier exists at all.
  for (int squeeze = 0; squeeze < 50; ++squeeze) {
    int j0 = path.argmax();
    if (j0 != 0 && j0 != P - 1) break;
    if (j0 == 0)
      for (double& t : ts) t = t * t;
    else
      for (double& t : ts) t = 1.0 - (1.0 - t) * (1.0 - t);
    rebuild();
  }
  result.energy_at_constant = path.energies[0];
  result.energy_at_bump = path.energies[P - 1];

  int total_sweeps = 0;
  double step = cfg.step0;
  int j = path.argmax();

  // Descent phase. Three exits, all into refinement: the max node's gradient
  // drops below tol (the path resolved the col), the level stops improving
  // over a window (the polygon hit its resolution floor), or backtracking
  // cannot make progress at all.
  while (true) {
    require(total_sweeps < cfg.max_sweeps, errc::max_iters_exceeded,
            "mountain pass: sweep limit");
    j = path.argmax();
    if (j == 0 || j == P - 1) break;  // samples no longer straddle a barrier

    Vec gc = constrained_gradient(GraphFunction{d.mesh, path.nodes[j]}, d.ops, prm);
    Vec dir = mfac.solve(gc);
    double gn2 = std::max(0.0, dir.dot(gc));
    double gnorm = std::sqrt(gn2);
    if (gnorm <= cfg.tol) break;

    const int m = int(result.level_history.size());
    if (cfg.stall_window > 0 && m >= cfg.stall_window) {
      double before = result.level_history[m - cfg.stall_window];
      double now = result.level_history.back();
      if (before - now < cfg.stall_rel * (1.0 + std::abs(now))) break;
    }

    // One sweep may move a node at most one neighbor gap, else a single
    // backtracked step can tunnel through the ridge into a basin.
    double seg = 0.0;
    if (j > 0) seg = std::max(seg, std::sqrt(mass_of(path.nodes[j] - path.nodes[j - 1], d.ops)));
    if (j + 1 < P)
      seg = std::max(seg, std::sqrt(mass_of(path.nodes[j] - path.nodes[j + 1], d.ops)));
    double dn = std::sqrt(std::max(mass_of(dir, d.ops), 0.0));
    double cap = dn > 0.0 ? seg / dn : cfg.step_max;
    double sigma = std::min({2.0 * step, cfg.step_max, cap});
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec trial = renormalized(path.nodes[j] - sigma * dir, d.ops, prm.mu);
      double Et = energy_of(trial, d.mesh, d.ops, prm);
      if (Et <= path.energies[j] - cfg.armijo * sigma * gn2) {
        path.nodes[j] = std::move(trial);
        path.energies[j] = Et;
        step = sigma;
        accepted = true;
        break;
      }
      sigma *= 0.5;
    }
    if (!accepted) break;
    ++total_sweeps;
    result.level_history.push_back(path.level());
    if (cfg.redistribute_every > 0 && total_sweeps % cfg.redistribute_every == 0)
      redistribute(path, d, prm);
  }

  // Refinement phase. A candidate counts only if Newton converged to something
  // genuinely above the constant's level and away from it: anything else means
  // the polygon slid off the ridge, not that no ridge exists.
  const double kap = std::sqrt(prm.mu / L);
  const double e_const = result.energy_at_constant;
  const double e_slack = 1e-10 * (1.0 + std::abs(e_const));
  auto admissible = [&](const BoundState& s) {
    double dev = (s.u.values.cwiseAbs().array() - kap).abs().maxCoeff() / kap;
    return dev > 0.01 && s.energy_value > e_const + e_slack;
  };

  bool have = false;
  GraphFunction u_best{d.mesh, Vec()};
  double lam_best = 0.0, e_best = 0.0;
  try {
    GraphFunction cand{d.mesh, path.nodes[j]};
    double lam0 = lagrange_multiplier(cand, d.ops, prm);
    BoundState s = newton_refine(cand, lam0, d, prm, cfg.newton, nullptr, true, false);
    if (admissible(s)) {
      u_best = s.u;
      lam_best = s.lambda;
      e_best = s.energy_value;
      have = true;
    }
  } catch (const Error& e) {
    if (e.is_config()) throw;
  }

  if (!have) {
    // The drifted polygon could not be refined. Concentration is the only
    // mechanism that produces critical points above the constant here, and
    // every candidate peak location is a vertex or an interior point of some
    // edge, with the peak's multiplier fixed by its share of the mass. Seed a
    // soliton at each site and keep the lowest admissible refinement.
    const MetricGraph& g = d.mesh->graph();
    LineSoliton sol(prm.p);
    const double I0 = sol.l2_mass();
    const double ex = 2.0 * (prm.p - 2.0) / (prm.p - 6.0);
    std::vector<std::pair<double, EdgeCoordinate>> sites;
    std::vector<bool> seen(g.num_vertices(), false);
    for (int e = 0; e < g.num_edges(); ++e) {
      const Edge& ed = g.edge(e);
      if (!seen[ed.a]) {
        seen[ed.a] = true;
        sites.push_back({0.5 * g.degree(ed.a), EdgeCoordinate{e, 0.0}});
      }
      if (!seen[ed.b]) {
        seen[ed.b] = true;
        sites.push_back({0.5 * g.degree(ed.b), EdgeCoordinate{e, ed.length}});
      }
      sites.push_back({1.0, EdgeCoordinate{e, 0.5 * ed.length}});
    }
    for (const auto& [fac, x0] : sites) {
      double lam0 = std::pow(fac * I0 / (prm.mu * std::pow(prm.rho, 2.0 / (prm.p - 2.0))), ex);
      try {
        GraphFunction u0 = soliton_ansatz(d.mesh, prm, lam0, x0);
        u0.values = renormalized(std::move(u0.values), d.ops, prm.mu);
        BoundState s = newton_refine(u0, lam0, d, prm, cfg.newton, nullptr, true, false);
        if (!admissible(s)) continue;
        if (!have || s.energy_value < e_best) {
          u_best = s.u;
          lam_best = s.lambda;
          e_best = s.energy_value;
          have = true;
        }
      } catch (const Error& e) {
        if (e.is_config()) throw;
      }
    }
  }

  require(have, errc::path_collapse,
          "no admissible critical point above the constant's level was reachable");
  result.candidate = make_state(std::move(u_best), lam_best, d, prm, true, true, cfg.morse);
  result.level = result.candidate.energy_value;
  result.path = path.nodes;
  result.path_energy = path.energies;
  result.sweeps = total_sweeps;
  return result;
}

void VerifyReport::add(const std::string& name, double value, double tol, bool pass) {
  checks.push_back({name, value, tol, pass});
  all_pass = all_pass && pass;
}

VerifyReport verify_solution(const BoundState& s, const Operators& ops,
                             const VerifyOptions& opts) {
  // Everything here is recomputed from (u, lambda, params); cached fields in
  // the state are not trusted, except the Morse indices which are only
  // meaningful if they were computed.
  VerifyReport rep;
  const Vec& u = s.u.values;
  const EnergyParams& prm = s.params;
  const double lambda = s.lambda;

  Vec Ku = ops.K * u;
  Vec Mu = ops.M * u;
  double m = u.dot(Mu);
  double dir = u.dot(Ku);
  Vec N = nonlinear_term(s.u, prm.p);
  double pint = integrate_power(s.u, prm.p);

  rep.add("mass", std::abs(m - prm.mu) / prm.mu, opts.tol,
          std::abs(m - prm.mu) / prm.mu <= opts.tol);

  Vec F1 = Ku + lambda * Mu - prm.rho * N;
  double scale =
      std::max({Ku.norm(), std::abs(lambda) * Mu.norm(), prm.rho * N.norm()}) + 1e-300;
  double rel = F1.norm() / scale;
  rep.add("stationary_residual", rel, opts.tol, rel <= opts.tol);

  double umax = u.maxCoeff();
  bool positive = umax > 0.0 && u.minCoeff() > -1e-12 * std::max(1e-300, std::abs(umax));
  bool sign_ok = !positive || prm.rho <= 0.0 || lambda > 0.0;
  rep.add("multiplier_sign", lambda, 0.0, sign_ok);

  // Equation integrated against the constant 1.
  double lhs_mean = lambda * Mu.sum();
  double rhs_mean = prm.rho * N.sum();
  double mean_scale = std::max({std::abs(lhs_mean), std::abs(rhs_mean), 1e-300});
  double mean_err = std::abs(lhs_mean - rhs_mean) / mean_scale;
  rep.add("mean_equation", mean_err, opts.tol, mean_err <= opts.tol);

  // Equation integrated against u itself.
  double lhs_nehari = dir + lambda * m;
  double rhs_nehari = prm.rho * pint;
  double nehari_scale =
      std::max({std::abs(dir), std::abs(lambda) * m, std::abs(rhs_nehari), 1e-300});
  double nehari_err = std::abs(lhs_nehari - rhs_nehari) / nehari_scale;
  rep.add("nehari_identity", nehari_err, opts.tol, nehari_err <= opts.tol);

  // Action through the multiplier: E = (1/2 - 1/p) int |u'|^2 - lambda mu / p.
  double E = 0.5 * dir - prm.rho / prm.p * pint;
  double act_rhs = (0.5 - 1.0 / prm.p) * dir - lambda * m / prm.p;
  double act_scale = std::max({std::abs(E), 0.5 * dir, std::abs(lambda) * m / prm.p, 1e-300});
  double act_err = std::abs(E - act_rhs) / act_scale;
  rep.add("action_identity", act_err, opts.tol, act_err <= opts.tol);

  if (s.mountain_pass_tag) {
    rep.add("morse_constrained", double(s.morse_constrained), 1.0,
            s.morse_constrained >= 0 && s.morse_constrained <= 1);
    rep.add("morse_unconstrained", double(s.morse_unconstrained), 2.0,
            s.morse_unconstrained >= 0 && s.morse_unconstrained <= 2);
  }
  return rep;
}

ContinuationTrace continuation(const BoundState& initial, const Discretization& d,
                               const Schedule& schedule, const ContinuationConfig& cfg) {
  const bool in_mu = schedule.param == Schedule::Param::mu;
  double v0 = in_mu ? initial.params.mu : initial.params.rho;
  // An empty schedule degenerates to the verified initial state alone.
  if (!schedule.values.empty())
    require(std::abs(schedule.values.front() - v0) <= 1e-12 * std::max(1.0, std::abs(v0)),
            errc::invalid_parameter, "schedule must start at the initial state's parameter");
  if (in_mu)
    for (double v : schedule.values)
      require(v > 0.0, errc::invalid_parameter, "mass values must be positive");

  ContinuationTrace trace;
  trace.param = schedule.param;

  VerifyReport rep0 = verify_solution(initial, d.ops, cfg.verify);
  require(rep0.all_pass, errc::invalid_parameter, "initial state fails verification");
  trace.entries.push_back({v0, initial, false, rep0});

  const BoundState* cur = &trace.entries.back().state;
  double curval = v0;

  for (size_t k = 1; k < schedule.values.size(); ++k) {
    double target = schedule.values[k];
    std::vector<double> pending{target};
    while (!pending.empty()) {
      double t = pending.back();
      EnergyParams np = cur->params;
      if (in_mu)
        np.mu = t;
      else
        np.rho = t;

      GraphFunction w0 = cur->u;
      if (in_mu) w0.values *= std::sqrt(t / cur->params.mu);
      double lam0 = cur->lambda;

      ++trace.newton_solves;
      try {
        BoundState next = newton_refine(w0, lam0, d, np, cfg.newton, nullptr,
                                        cur->mountain_pass_tag, cfg.compute_morse, cfg.morse);
        VerifyReport rep = verify_solution(next, d.ops, cfg.verify);
        require(rep.all_pass, errc::no_convergence, "step state fails verification");
        require(!cfg.accept_extra || cfg.accept_extra(next), errc::no_convergence,
                "step state rejected by the acceptance predicate");
        pending.pop_back();
        trace.entries.push_back({t, std::move(next), t != target, std::move(rep)});
        cur = &trace.entries.back().state;
        curval = t;
      } catch (const Error& e) {
        if (e.is_config()) throw;
        double mid = in_mu ? std::sqrt(curval * t) : 0.5 * (curval + t);
        double relstep = std::abs(mid - curval) / std::max({std::abs(curval), std::abs(t), 1e-300});
        if (relstep < cfg.step_floor_rel)
          fail(errc::step_floor_reached,
               "continuation step between " + std::to_string(curval) + " and " +
                   std::to_string(t) + " fell below the relative floor (" + e.what() + ")");
        pending.push_back(mid);
      }
    }
  }
  return trace;
}

}  // namespace gnls
