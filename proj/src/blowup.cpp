#include "gnls/blowup.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

namespace gnls {

namespace {

double sech(double x) {
  // 2 e^-|x| / (1 + e^-2|x|), stable for large |x|
  double e = std::exp(-std::abs(x));
  return 2.0 * e / (1.0 + e * e);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

struct ArmStart {
  int edge = 0;
  int k = 0;
  int dir = 0;
};

// Directions leading away from a node. A vertex yields one arm per incident
// edge end (self-loops give two); an interior node yields the two directions
// along its edge.
std::vector<ArmStart> arms_at(const Mesh& mesh, int dof) {
  const MetricGraph& g = mesh.graph();
  std::vector<ArmStart> arms;
  if (dof < g.num_vertices()) {
    for (int e = 0; e < g.num_edges(); ++e) {
      if (g.edge(e).a == dof) arms.push_back({e, 0, +1});
      if (g.edge(e).b == dof) arms.push_back({e, mesh.elements_on_edge(e), -1});
    }
  } else {
    EdgeCoordinate c = mesh.dof_coordinate(dof);
    int k = static_cast<int>(std::lround(c.s / mesh.spacing(c.edge)));
    arms.push_back({c.edge, k, -1});
    arms.push_back({c.edge, k, +1});
  }
  return arms;
}

// Nodes along one direction with their cumulative arclength from the start
// node (start excluded). Crosses degree-2 vertices, stops at junctions, tips,
// or max_len. On all-degree-2 graphs (cycles) this lifts to the universal
// cover and is cut by max_len alone.
std::vector<std::pair<double, int>> walk_arm(const Mesh& mesh, ArmStart a, double max_len) {
  const MetricGraph& g = mesh.graph();
  std::vector<std::pair<double, int>> out;
  double dist = 0.0;
  int e = a.edge, k = a.k, dir = a.dir;
  while (dist < max_len && out.size() < 20'000'000) {
    int k2 = k + dir;
    if (0 <= k2 && k2 <= mesh.elements_on_edge(e)) {
      dist += mesh.spacing(e);
      out.emplace_back(dist, mesh.node_dof(e, k2));
      k = k2;
      continue;
    }
    const bool at_a = (k == 0);
    const int v = at_a ? g.edge(e).a : g.edge(e).b;
    if (g.degree(v) != 2) break;
    std::pair<int, bool> ends[2];  // (edge, enters at its a end)
    int m = 0;
    for (int f = 0; f < g.num_edges() && m < 2; ++f) {
      if (g.edge(f).a == v) ends[m++] = {f, true};
      if (m < 2 && g.edge(f).b == v) ends[m++] = {f, false};
    }
    const int pick = (ends[0] == std::make_pair(e, at_a)) ? 1 : 0;
    e = ends[pick].first;
    if (ends[pick].second) {
      k = 0;
      dir = +1;
    } else {
      k = mesh.elements_on_edge(e);
      dir = -1;
    }
  }
  return out;
}

}  // namespace

LineSoliton::LineSoliton(double p_) : p(p_) {
  require(p > 2.0, errc::invalid_parameter, "line profile needs p > 2");
  alpha = 2.0 / (p - 2.0);
  beta = (p - 2.0) / 2.0;
  C = std::pow(p / 2.0, 1.0 / (p - 2.0));
}

double LineSoliton::operator()(double x) const { return C * std::pow(sech(beta * x), alpha); }

double LineSoliton::deriv(double x) const {
  return -alpha * beta * std::tanh(beta * x) * (*this)(x);
}

double LineSoliton::second(double x) const {
  double t = std::tanh(beta * x), s = sech(beta * x);
  return (*this)(x)*alpha * beta * beta * (alpha * t * t - s * s);
}

double LineSoliton::l2_mass() const {
  auto f = [this](double x) {
    double v = (*this)(x);
    return v * v;
  };
  // V^2 ~ e^-2x; past x = 60 the tail is below 1e-50
  double fa = f(0.0), fm = f(30.0), fb = f(60.0);
  return 2.0 * adaptive_simpson(f, 0.0, 60.0, fa, fm, fb, 1e-14, 40);
}

double concentration_mass(double p, double rho, double lambda) {
  require(p > 6.0 && rho > 0.0 && lambda > 0.0, errc::invalid_parameter,
          "concentration law needs p > 6, rho > 0, lambda > 0");
  return std::pow(rho, -2.0 / (p - 2.0)) * std::pow(lambda, (6.0 - p) / (2.0 * (p - 2.0))) *
         LineSoliton(p).l2_mass();
}

double concentration_lambda(double p, double rho, double mu) {
  require(p > 6.0 && rho > 0.0 && mu > 0.0, errc::invalid_parameter,
          "concentration law needs p > 6, rho > 0, mu > 0");
  double m0 = LineSoliton(p).l2_mass();
  return std::pow(mu * std::pow(rho, 2.0 / (p - 2.0)) / m0, 2.0 * (p - 2.0) / (6.0 - p));
}

StarProfile star_soliton(int arms, double p, double leg_length, double h_target) {
  require(arms >= 1, errc::invalid_parameter, "star needs at least one leg");
  require(leg_length > 5.0, errc::edge_too_short,
          "legs shorter than a few decay lengths cannot carry the profile");
  LineSoliton V(p);
  Discretization d = discretize(make_star(arms, leg_length), h_target);
  GraphFunction u = interpolate(d.mesh, [&](int, double s) { return V(s); });

  EnergyParams prm;
  prm.p = p;
  prm.rho = 1.0;
  prm.mu = 1.0;  // fixed up after the solve
  prm.validate();

  // Unconstrained Newton at fixed lambda = 1.
  Eigen::SparseLU<SpMat> lu;
  const int max_iters = 40;
  for (int it = 0;; ++it) {
    Vec N = nonlinear_term(u, p);
    Vec Ku = d.ops.K * u.values;
    Vec Mu = d.ops.M * u.values;
    Vec F = Ku + Mu - N;
    double scale = std::max({Ku.norm(), Mu.norm(), N.norm()}) + 1e-300;
    if (F.norm() / scale <= 1e-12) break;
    require(it < max_iters, errc::no_convergence, "star profile: Newton stalled");
    SpMat J = d.ops.K + d.ops.M - (p - 1.0) * nonlinear_weight(u, p);
    J.makeCompressed();
    lu.compute(J);
    require(lu.info() == Eigen::Success, errc::singular_jacobian,
            "star profile: jacobian factorization failed");
    Vec du = lu.solve(-F);
    u.values += du;
  }

  StarProfile sp;
  prm.mu = u.values.dot(d.ops.M * u.values);
  sp.state = make_state(u, 1.0, d, prm, false, false);
  double worst = 0.0;
  for (int i = 0; i < d.mesh->num_dofs(); ++i) {
    double dist = d.mesh->graph().distance_to_vertex(d.mesh->dof_coordinate(i), 0);
    worst = std::max(worst, std::abs(u.values(i) - V(dist)));
  }
  sp.sup_error = worst;
  return sp;
}

PeakSet detect_peaks(const BoundState& s, double R, double slack) {
  require(s.lambda > 0.0, errc::invalid_parameter, "peak detection needs a positive multiplier");
  require(R > 0.0 && slack >= 0.0, errc::invalid_parameter, "peak detection needs R > 0");
  const Mesh& mesh = *s.u.mesh;
  const MetricGraph& g = mesh.graph();
  const Vec v = s.u.values.cwiseAbs();
  const auto& adj = mesh.adjacency();
  const int n = mesh.num_dofs();
  const double umax = v.maxCoeff();

  PeakSet ps;
  ps.bound = std::pow(s.lambda, 1.0 / (s.params.p - 2.0));
  const double floor = ps.bound * (1.0 - slack);
  require(umax >= floor, errc::no_peaks,
          "maximum below the multiplier bound: nothing is concentrating");

  // A node tied with a neighbor at the top (the constant state, say) is a
  // plateau, not a peak.
  const double tie = 1e-12 * umax;
  for (int i = 0; i < n && !ps.degenerate; ++i) {
    if (v(i) < umax - tie) continue;
    for (int j : adj[i])
      if (v(j) >= umax - tie) {
        ps.degenerate = true;
        break;
      }
  }

  std::vector<int> cand;
  for (int i = 0; i < n; ++i) {
    if (v(i) < floor) continue;
    bool strict = true;
    for (int j : adj[i])
      if (v(j) >= v(i)) {
        strict = false;
        break;
      }
    if (strict) cand.push_back(i);
  }
  std::sort(cand.begin(), cand.end(), [&](int a, int b) {
    if (v(a) != v(b)) return v(a) > v(b);
    return a < b;
  });

  const double merge_len = R / std::sqrt(s.lambda);
  for (int i : cand) {
    EdgeCoordinate ci = mesh.dof_coordinate(i);
    bool merged = false;
    for (const Peak& acc : ps.peaks)
      if (g.distance(ci, acc.where) <= merge_len) {
        merged = true;
        break;
      }
    if (!merged) ps.peaks.push_back({i, ci, v(i)});
  }

  const double sq = std::sqrt(s.lambda);
  for (size_t i = 0; i < ps.peaks.size(); ++i)
    for (size_t j = i + 1; j < ps.peaks.size(); ++j)
      ps.separations.push_back(sq * g.distance(ps.peaks[i].where, ps.peaks[j].where));
  return ps;
}

double distance_to_junction(const MetricGraph& g, const EdgeCoordinate& x) {
  double best = std::numeric_limits<double>::infinity();
  for (int v = 0; v < g.num_vertices(); ++v)
    if (g.degree(v) != 2) best = std::min(best, g.distance_to_vertex(x, v));
  return best;
}

RescaledProfile rescale_at_peak(const BoundState& s, const Peak& pk, double R,
                                double regime_cutoff) {
  const EnergyParams& prm = s.params;
  require(s.lambda > 0.0 && prm.rho > 0.0, errc::invalid_parameter,
          "profile rescaling needs lambda > 0 and rho > 0");
  require(R > 0.0 && regime_cutoff > 0.0, errc::invalid_parameter,
          "window and regime cutoff must be positive");
  require(pk.height > 0.0, errc::invalid_parameter, "peak height must be positive");
  const Mesh& mesh = *s.u.mesh;

  RescaledProfile rp;
  rp.eps = 1.0 / std::sqrt(s.lambda);
  rp.eps_height = std::pow(pk.height, -(prm.p - 2.0) / 2.0);
  rp.junction_dist_eps = distance_to_junction(mesh.graph(), pk.where) / rp.eps;
  rp.regime = rp.junction_dist_eps > regime_cutoff ? PeakRegime::interior : PeakRegime::vertex;
  // v = eps^{2/(p-2)} u; the limit profile it converges to is rho^{-1/(p-2)} V.
  const double fac = std::pow(s.lambda, -1.0 / (prm.p - 2.0));
  const double aref = std::pow(prm.rho, -1.0 / (prm.p - 2.0));

  auto arms = arms_at(mesh, pk.dof);
  const bool two = arms.size() == 2;
  rp.y.push_back(0.0);
  rp.w.push_back(fac * s.u.values(pk.dof));
  double reach = R;
  bool any_reached = false;
  for (size_t ai = 0; ai < arms.size(); ++ai) {
    auto samples = walk_arm(mesh, arms[ai], R * rp.eps);
    double got = (samples.empty() ? 0.0 : samples.back().first) / rp.eps;
    if (got >= R * (1.0 - 1e-9)) any_reached = true;
    reach = std::min(reach, got);
    for (const auto& [dy, dof] : samples) {
      double yy = dy / rp.eps;
      rp.y.push_back(two && ai == 0 ? -yy : yy);
      rp.w.push_back(fac * s.u.values(dof));
    }
  }
  rp.window = std::min(reach, R);
  rp.window_exceeds_graph = !any_reached;

  LineSoliton V(prm.p);
  auto sup_err = [&](double delta) {
    double worst = 0.0;
    for (size_t i = 0; i < rp.y.size(); ++i)
      worst = std::max(worst, std::abs(rp.w[i] - aref * V(rp.y[i] - delta)));
    return worst;
  };

  // The nodal peak is only h-accurate; fit the offset by golden section.
  const double hpk = mesh.spacing(mesh.dof_coordinate(pk.dof).edge);
  const double dmax = std::min(2.0 * hpk / rp.eps + 0.1, 0.5 * R);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -dmax, hi = dmax;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = sup_err(x1), f2 = sup_err(x2);
  for (int i = 0; i < 80; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = sup_err(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = sup_err(x2);
    }
  }
  rp.shift = 0.5 * (lo + hi);
  rp.sup_error = sup_err(rp.shift);
  return rp;
}

EnvelopeCheck decay_envelope_check(const BoundState& s, const std::vector<Peak>& peaks,
                                   double C1, double C2, double R, double floor_rel) {
  require(s.lambda > 0.0, errc::invalid_parameter, "envelope check needs a positive multiplier");
  require(C1 > 0.0 && C2 >= 0.0 && R > 0.0 && floor_rel >= 0.0, errc::invalid_parameter,
          "envelope check needs C1 > 0, C2 >= 0, R > 0");
  const Mesh& mesh = *s.u.mesh;
  const MetricGraph& g = mesh.graph();
  const int n = mesh.num_dofs();
  const double sq = std::sqrt(s.lambda);
  const double inf = std::numeric_limits<double>::infinity();

  EnvelopeCheck ec;
  ec.C1 = C1;
  ec.C2 = C2;
  const double lpref = std::log(C1) + std::log(s.lambda) / (s.params.p - 2.0);
  ec.floor_abs = floor_rel * std::exp(lpref);
  const double lfloor = ec.floor_abs > 0.0 ? std::log(ec.floor_abs) : -inf;
  const double excl = R / sq;

  // Checked nodes keep log|u| and sqrt(lambda)-scaled distances to every peak
  // and every vertex; nodes inside any peak ball are skipped.
  std::vector<double> lu;
  std::vector<std::vector<double>> sd;
  const int terms = static_cast<int>(peaks.size()) + g.num_vertices();
  for (int i = 0; i < n; ++i) {
    EdgeCoordinate ci = mesh.dof_coordinate(i);
    std::vector<double> row;
    row.reserve(terms);
    bool inside = false;
    for (const Peak& pk : peaks) {
      double dpk = g.distance(ci, pk.where);
      if (dpk < excl) {
        inside = true;
        break;
      }
      row.push_back(sq * dpk);
    }
    if (inside) continue;
    for (int vtx = 0; vtx < g.num_vertices(); ++vtx)
      row.push_back(sq * g.distance_to_vertex(ci, vtx));
    double a = std::abs(s.u.values(i));
    lu.push_back(a > 0.0 ? std::log(a) : -inf);
    sd.push_back(std::move(row));
  }
  ec.checked_nodes = static_cast<int>(lu.size());

  // Compare against envelope + floor in log space; the additive floor keeps
  // nodes carrying pure roundoff from failing an envelope that has underflowed.
  auto eval = [&](double c2, double* margin) {
    bool ok = true;
    if (margin) *margin = 0.0;
    for (size_t k = 0; k < lu.size(); ++k) {
      if (lu[k] == -inf) continue;
      double lenv = -inf;
      for (double d : sd[k]) lenv = logaddexp(lenv, -c2 * d);
      lenv += lpref;
      double lcmp = logaddexp(lenv, lfloor);
      if (lu[k] > lcmp + 1e-12) ok = false;
      if (margin && lu[k] > lfloor)
        *margin = std::max(*margin, std::exp(std::min(700.0, lu[k] - lcmp)));
    }
    return ok;
  };

  ec.pass = eval(C2, &ec.worst_margin);

  // Largest decay rate the state supports at this prefactor. Raising the rate
  // only shrinks the envelope, so the pass set is an interval [0, c*].
  double lo = 0.0, hi = 2.0;
  if (eval(hi, nullptr)) {
    ec.fitted_C2 = hi;
  } else if (!eval(lo, nullptr)) {
    ec.fitted_C2 = 0.0;
  } else {
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (eval(mid, nullptr) ? lo : hi) = mid;
    }
    ec.fitted_C2 = lo;
  }
  return ec;
}

double envelope_value(const BoundState& s, const std::vector<Peak>& peaks, double C1, double C2,
                      const EdgeCoordinate& x) {
  require(s.lambda > 0.0 && C1 > 0.0 && C2 >= 0.0, errc::invalid_parameter,
          "envelope needs lambda > 0, C1 > 0, C2 >= 0");
  const MetricGraph& g = s.u.mesh->graph();
  const double sq = std::sqrt(s.lambda);
  double sum = 0.0;
  for (const Peak& pk : peaks) sum += std::exp(-C2 * sq * g.distance(x, pk.where));
  for (int v = 0; v < g.num_vertices(); ++v)
    sum += std::exp(-C2 * sq * g.distance_to_vertex(x, v));
  return C1 * std::pow(s.lambda, 1.0 / (s.params.p - 2.0)) * sum;
}

GraphFunction soliton_ansatz(const MeshPtr& mesh, const EnergyParams& prm, double lambda,
                             const EdgeCoordinate& x0) {
  prm.validate();
  require(lambda > 0.0 && prm.rho > 0.0, errc::invalid_parameter,
          "concentration ansatz needs lambda > 0 and rho > 0");
  mesh->graph().check_coordinate(x0);
  LineSoliton V(prm.p);
  const double amp = std::pow(lambda / prm.rho, 1.0 / (prm.p - 2.0));
  const double sq = std::sqrt(lambda);
  const MetricGraph& g = mesh->graph();
  return interpolate(mesh, [&](int e, double sc) {
    return amp * V(sq * g.distance({e, sc}, x0));
  });
}

BlowupReport analyze_state(const BoundState& s, double R, double regime_cutoff, double C1,
                           double C2) {
  PeakSet ps = detect_peaks(s, R);
  BlowupReport rep;
  rep.lambda = s.lambda;
  rep.eps = 1.0 / std::sqrt(s.lambda);
  rep.bound = ps.bound;
  rep.degenerate = ps.degenerate;
  rep.separations = ps.separations;
  for (const Peak& pk : ps.peaks) {
    PeakRecord rec;
    rec.peak = pk;
    rec.eps_height = std::pow(pk.height, -(s.params.p - 2.0) / 2.0);
    rec.ratio = rec.eps_height / rep.eps;
    rec.profile = rescale_at_peak(s, pk, R, regime_cutoff);
    rep.peaks.push_back(std::move(rec));
  }
  rep.envelope = decay_envelope_check(s, ps.peaks, C1, C2, R);
  return rep;
}

std::vector<BlowupReport> analyze_trace(const ContinuationTrace& trace, double R,
                                        double regime_cutoff, double C1, double C2) {
  std::vector<BlowupReport> reps;
  reps.reserve(trace.entries.size());
  for (const TraceEntry& te : trace.entries)
    reps.push_back(analyze_state(te.state, R, regime_cutoff, C1, C2));
  return reps;
}

}  // namespace gnls
