#include <doctest.h>

#include <cmath>

#include "gnls/blowup.hpp"
#include "gnls/solvers.hpp"

using namespace gnls;

namespace {
constexpr double kPi = 3.14159265358979323846;

// kappa + amp * phi2, renormalized by the flow itself on entry.
GraphFunction nudged_constant(const Discretization& d, double mu, double amp) {
  SpectralResult sr = eigenpairs(d.ops.K, d.ops.M, 2);
  double kappa = std::sqrt(mu / d.mesh->graph().total_length());
  Vec v = Vec::Constant(d.mesh->num_dofs(), kappa);
  Vec phi2 = sr.eigenvectors.col(1);
  v += amp * kappa / phi2.cwiseAbs().maxCoeff() * phi2;
  return {d.mesh, v};
}
}  // namespace

TEST_CASE("mass threshold: closed forms on interval and cycle") {
  ThresholdResult ti = mass_threshold(make_interval(1.0), 8.0, 1.0 / 64.0);
  double exact = std::pow(kPi * kPi / 6.0, 1.0 / 3.0);  // 1.18062...
  CHECK(ti.mu1 == doctest::Approx(exact).epsilon(1e-3));
  // On an interval the Rayleigh bound is attained, so the two coincide.
  CHECK(ti.lower_bound == doctest::Approx(exact).epsilon(1e-12));
  CHECK(ti.mu1 >= ti.lower_bound - 1e-9);

  ThresholdResult tc = mass_threshold(make_cycle(1.0), 8.0, 1.0 / 64.0);
  CHECK(tc.mu1 == doctest::Approx(std::pow(4.0 * kPi * kPi / 6.0, 1.0 / 3.0)).epsilon(1e-3));
  CHECK(tc.mu1 >= tc.lower_bound - 1e-9);

  ThresholdResult t7 = mass_threshold(make_interval(1.0), 7.0, 1.0 / 64.0);
  CHECK(t7.mu1 == doctest::Approx(std::pow(kPi * kPi / 5.0, 2.0 / 5.0)).epsilon(1e-3));
}

TEST_CASE("flow below threshold returns to the constant") {
  MetricGraph g = make_interval(1.0);
  Discretization d = discretize(g, 1.0 / 64.0);
  double mu1 = mass_threshold(g, 8.0, 1.0 / 64.0).mu1;
  EnergyParams prm{8.0, 1.0, 0.5 * mu1};
  FlowResult fr = normalized_gradient_flow(nudged_constant(d, prm.mu, 1e-3), d, prm);
  CHECK(fr.converged);
  double kappa = std::sqrt(prm.mu / g.total_length());
  CHECK((fr.state.u.values.array() - kappa).abs().maxCoeff() < 1e-6);
}

TEST_CASE("flow above threshold escapes to lower energy") {
  MetricGraph g = make_interval(1.0);
  Discretization d = discretize(g, 1.0 / 64.0);
  double mu1 = mass_threshold(g, 8.0, 1.0 / 64.0).mu1;
  EnergyParams prm{8.0, 1.0, 2.0 * mu1};
  FlowOptions fo;
  fo.compute_morse = false;
  FlowResult fr = normalized_gradient_flow(nudged_constant(d, prm.mu, 1e-2), d, prm, fo);
  CHECK(fr.converged);
  double kappa = std::sqrt(prm.mu / g.total_length());
  double e_const = constant_state(d, prm).energy_value;
  CHECK(fr.state.energy_value < e_const);
  CHECK((fr.state.u.values.array() - kappa).abs().maxCoeff() / kappa > 0.01);
}

TEST_CASE("flow with rho = 0 lands on the constant from any start") {
  MetricGraph g = make_star(3, 1.0);
  Discretization d = discretize(g, 1.0 / 32.0);
  EnergyParams prm{8.0, 0.0, 1.7};
  // Sign-changing, lopsided start.
  GraphFunction u0 = interpolate(d.mesh, [](int e, double s) {
    return std::cos((e + 1) * s * 2.0) - 0.3;
  });
  FlowResult fr = normalized_gradient_flow(u0, d, prm);
  CHECK(fr.converged);
  double kappa = std::sqrt(prm.mu / g.total_length());
  CHECK((fr.state.u.values.array() - kappa).abs().maxCoeff() < 1e-6);
}

TEST_CASE("flow errors: bad options and iteration cap") {
  Discretization d = discretize(make_interval(1.0), 1.0 / 32.0);
  EnergyParams prm{8.0, 1.0, 0.4};
  GraphFunction u0 = nudged_constant(d, prm.mu, 1e-3);
  FlowOptions fo;
  fo.tol = -1.0;
  CHECK_THROWS_AS(normalized_gradient_flow(u0, d, prm, fo), Error);
  fo = FlowOptions{};
  fo.max_iters = 2;
  try {
    normalized_gradient_flow(u0, d, prm, fo);
    FAIL("iteration cap ignored");
  } catch (const Error& e) {
    CHECK(e.code() == errc::max_iters_exceeded);
  }
}

TEST_CASE("bump: exact mass, longest-edge support, low homotopy action") {
  GraphSpec s;
  s.vertices = {"a", "b", "c"};
  s.edges = {{"e0", "a", "b", 1.0}, {"e1", "b", "c", 3.0}};
  MetricGraph g = build_graph(s);
  Discretization d = discretize(g, 1.0 / 32.0);
  EnergyParams prm{8.0, 1.0, 1.2};
  GraphFunction w = build_bump(d, prm);

  double m = w.values.dot(d.ops.M * w.values);
  CHECK(std::abs(m - prm.mu) <= 1e-12 * prm.mu);
  // Vanishes off the longest edge (vertex dofs of e1 may carry tail zeros).
  for (int k = 0; k <= d.mesh->elements_on_edge(0); ++k)
    CHECK(w.values[d.mesh->node_dof(0, k)] <= 1e-14);

  EnergyParams half = prm;
  half.rho = 0.5;
  CHECK(energy(w, d.ops, half) < constant_state(d, prm).energy_value);
}

TEST_CASE("newton: the constant is a fixed point and ansatz seeds converge") {
  MetricGraph g = make_interval(8.0);
  Discretization d = discretize(g, 1.0 / 32.0);
  EnergyParams prm{8.0, 1.0, 1.0};

  BoundState c = constant_state(d, prm);
  NewtonInfo info;
  BoundState refined = newton_refine(c.u, c.lambda, d, prm, {}, &info, false, false);
  CHECK(info.iterations <= 1);
  CHECK((refined.u.values - c.u.values).cwiseAbs().maxCoeff() <= 1e-10);

  // Interior concentration seed at the closed-form multiplier. mu = 1.4 keeps
  // the peak width ~8 mesh cells, where the discrete multiplier sits within a
  // few percent of the asymptotic one.
  prm.mu = 1.4;
  double lam0 = concentration_lambda(prm.p, prm.rho, prm.mu);
  GraphFunction u0 = soliton_ansatz(d.mesh, prm, lam0, {0, 4.0});
  BoundState s = newton_refine(u0, lam0, d, prm, {}, &info, false, false);
  CHECK(s.lambda == doctest::Approx(lam0).epsilon(0.05));
  Peak top = detect_peaks(s).peaks.at(0);
  CHECK(d.mesh->graph().distance(top.where, {0, 4.0}) < 0.5);
  CHECK(verify_solution(s, d.ops).all_pass);
  CHECK(s.residuals.stationary_rel <= 1e-10);
  CHECK(s.energy_value > constant_state(d, prm).energy_value);
}

TEST_CASE("newton reports singular data instead of wandering") {
  Discretization d = discretize(make_interval(1.0), 1.0 / 16.0);
  EnergyParams prm{8.0, 1.0, 1.0};
  GraphFunction zero{d.mesh, Vec::Zero(d.mesh->num_dofs())};
  CHECK_THROWS_AS(newton_refine(zero, 1.0, d, prm), Error);
}

TEST_CASE("mountain pass finds an admissible col on the benchmark star") {
  MetricGraph g = make_star(3, 2.0);
  double mu1 = mass_threshold(g, 8.0, default_h_target(g)).mu1;
  Discretization d = discretize(g, default_h_target(g));
  EnergyParams prm{8.0, 1.0, 0.5 * mu1};

  MountainPassConfig cfg;
  cfg.morse = MorseConfig{};
  MountainPassResult r = mountain_pass(d, prm, cfg);

  BoundState c = constant_state(d, prm);
  CHECK(r.candidate.energy_value > c.energy_value);
  CHECK(r.candidate.lambda > 0.0);
  CHECK(verify_solution(r.candidate, d.ops).all_pass);
  CHECK(r.candidate.morse_constrained <= 1);
  CHECK(r.candidate.morse_unconstrained <= 2);
  CHECK(r.energy_at_constant == doctest::Approx(c.energy_value).epsilon(1e-12));
  CHECK(r.energy_at_bump < c.energy_value);
  CHECK_FALSE(r.mass_above_threshold);
  // The descent never raises the col estimate.
  for (size_t i = 1; i < r.level_history.size(); ++i)
    CHECK(r.level_history[i] <= r.level_history[i - 1] + 1e-12);
  double kappa = std::sqrt(prm.mu / g.total_length());
  CHECK((r.candidate.u.values.array() - kappa).abs().maxCoeff() / kappa > 0.1);
}

TEST_CASE("continuation walks the constant branch with closed-form multipliers") {
  MetricGraph g = make_interval(1.0);
  Discretization d = discretize(g, 1.0 / 32.0);
  double p = 8.0;
  EnergyParams prm{p, 1.0, 0.5};
  BoundState c0 = constant_state(d, prm);

  Schedule sched;
  sched.param = Schedule::Param::mu;
  sched.values = {0.5, 0.4, 0.3, 0.25};
  ContinuationConfig cc;
  cc.compute_morse = false;
  ContinuationTrace t = continuation(c0, d, sched, cc);
  REQUIRE(t.entries.size() == 4);
  for (size_t k = 0; k < t.entries.size(); ++k) {
    double mu = sched.values[k];
    CHECK(t.entries[k].param == doctest::Approx(mu).epsilon(1e-12));
    CHECK(t.entries[k].state.lambda ==
          doctest::Approx(std::pow(mu, (p - 2.0) / 2.0)).epsilon(1e-10));
    CHECK(t.entries[k].verify.all_pass);
    CHECK_FALSE(t.entries[k].from_bisection);
  }

  // A schedule must start where the state is.
  sched.values = {0.7, 0.5};
  CHECK_THROWS_AS(continuation(c0, d, sched, cc), Error);

  // An always-false acceptance predicate exhausts the bisection floor.
  sched.values = {0.5, 0.4};
  cc.accept_extra = [](const BoundState&) { return false; };
  try {
    continuation(c0, d, sched, cc);
    FAIL("predicate rejection did not surface");
  } catch (const Error& e) {
    CHECK(e.code() == errc::step_floor_reached);
  }
}
