#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gnls/energy.hpp"

namespace gnls {

// Mesh plus assembled operators; every solver below works on one of these.
struct Discretization {
  MeshPtr mesh;
  Operators ops;
};

Discretization discretize(const MetricGraph& g, double h_target);
Discretization discretize(const MetricGraph& g, std::vector<int> elements_per_edge);

struct Residuals {
  double constrained_grad = 0.0;  // ||g + lambda(u) M u|| in the M^{-1} norm
  double stationary_rel = 0.0;    // ||K u + lambda M u - rho N(u)|| relative to term scale
  double interior_fd = 0.0;       // second-difference residual, O(h^2) diagnostics
  double kirchhoff_fd = 0.0;
};

struct BoundState {
  GraphFunction u;
  double lambda = 0.0;
  EnergyParams params;
  double energy_value = 0.0;
  double mass = 0.0;
  Residuals residuals;
  int morse_unconstrained = -1;  // -1 = not computed
  int morse_constrained = -1;
  bool positive = false;
  bool mountain_pass_tag = false;
};

// Populates the derived fields of a state (energy, mass, residual block,
// positivity, optionally Morse indices).
BoundState make_state(GraphFunction u, double lambda, const Discretization& d,
                      const EnergyParams& prm, bool mountain_pass_tag, bool compute_morse,
                      const MorseConfig& morse = {});

// The constant kappa = sqrt(mu/L); stationary with lambda = rho kappa^{p-2}.
BoundState constant_state(const Discretization& d, const EnergyParams& prm,
                          const MorseConfig& morse = {});

struct ThresholdResult {
  double mu1 = 0.0;          // L (lambda2 / (p-2))^{2/(p-2)}
  double lower_bound = 0.0;  // L^{(p-6)/(p-2)} (pi^2 / (p-2))^{2/(p-2)}
  Lambda2Result spectrum;
};

// Mass threshold below which the constant is a strict local minimizer.
ThresholdResult mass_threshold(const MetricGraph& g, double p, double h_target,
                               double tol = 1e-10, std::uint64_t seed = 12345);

struct FlowOptions {
  double step = 1.0;      // initial trial step, adapted en route
  double tol = 1e-8;      // on the preconditioned constrained-gradient norm
  int max_iters = 200000;
  bool compute_morse = true;
  MorseConfig morse;
};

struct FlowResult {
  BoundState state;
  int iterations = 0;
  bool converged = false;
};

// Projected descent u <- renormalize(u - step M^{-1} g_c) with Armijo
// backtracking; energy is non-increasing across accepted steps. The start is
// folded to |u0| once, then steps stay unfolded so the descent slope is exact.
FlowResult normalized_gradient_flow(const GraphFunction& u0, const Discretization& d,
                                    const EnergyParams& prm, const FlowOptions& opts = {});

// Concentrated cos^2 cap on the longest edge, scaled mass-invariantly by
// v_t(x) = t^{1/2} v(t x) with t doubled until the action at rho = 1/2 drops
// below the constant's action at rho = 1 (that is the worst case over the
// homotopy family). Result has mass exactly mu.
GraphFunction build_bump(const Discretization& d, const EnergyParams& prm);

struct NewtonOptions {
  double tol = 1e-10;  // relative to the stationary-equation term scale
  int max_iters = 50;
};

struct NewtonInfo {
  int iterations = 0;
  std::vector<double> residual_history;
};

// Bordered Newton on F(u, lambda) = (K u + lambda M u - rho N(u),
// (u' M u - mu)/2) with the exact Jacobian [[H, M u], [(M u)', 0]] solved by
// direct sparse factorization.
BoundState newton_refine(const GraphFunction& u0, double lambda0, const Discretization& d,
                         const EnergyParams& prm, const NewtonOptions& opts = {},
                         NewtonInfo* info = nullptr, bool mountain_pass_tag = false,
                         bool compute_morse = true, const MorseConfig& morse = {});

struct MountainPassConfig {
  int path_nodes = 33;
  double tol = 1e-3;          // descent stops when the max node's gradient norm drops below
  int max_sweeps = 200000;
  int redistribute_every = 5;
  double armijo = 1e-4;
  double step0 = 1.0;
  double step_max = 16.0;
  // The polygon's Rayleigh floor sits far above `tol` on hard landscapes; when
  // the level improves by less than stall_rel * (1 + |level|) over a window,
  // the path has told us everything it can and refinement takes over.
  int stall_window = 1000;
  double stall_rel = 1e-3;
  NewtonOptions newton;
  MorseConfig morse;
  std::uint64_t seed = 12345;
};

struct MountainPassResult {
  BoundState candidate;       // Newton-refined max node
  double level = 0.0;         // max energy over the final path
  double energy_at_constant = 0.0;
  double energy_at_bump = 0.0;
  std::vector<Vec> path;      // nodal values of the final path
  std::vector<double> path_energy;
  std::vector<double> level_history;  // max-node energy per sweep, non-increasing
  int sweeps = 0;
  bool mass_above_threshold = false;  // warned: mu >= mu1, existence not covered
};

// Numerical minimax on the mass sphere between the constant and the bump.
MountainPassResult mountain_pass(const Discretization& d, const EnergyParams& prm,
                                 const MountainPassConfig& cfg = {});

struct VerifyCheck {
  std::string name;
  double value = 0.0;      // measured error or index
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass = true;
  void add(const std::string& name, double value, double tol, bool pass);
};

struct VerifyOptions {
  double tol = 1e-8;  // relative tolerance for the identity checks
};

// Identity battery for a computed state: mass; stationary residual;
// multiplier sign for positive states; lambda int u = rho int u^{p-1};
// int(|u'|^2 + lambda u^2) = rho int |u|^p; the action identity
// (1/2 - 1/p) int |u'|^2 - lambda mu / p = E; Morse bounds when the state is
// tagged as a mountain-pass candidate.
VerifyReport verify_solution(const BoundState& s, const Operators& ops,
                             const VerifyOptions& opts = {});

struct Schedule {
  enum class Param { rho, mu };
  Param param = Param::rho;
  std::vector<double> values;  // first entry must match the initial state
};

struct TraceEntry {
  double param = 0.0;
  BoundState state;
  bool from_bisection = false;
  VerifyReport verify;
};

struct ContinuationTrace {
  Schedule::Param param = Schedule::Param::rho;
  std::vector<TraceEntry> entries;  // strictly monotone in param, initial state included
  int newton_solves = 0;
};

struct ContinuationConfig {
  NewtonOptions newton;
  VerifyOptions verify;
  MorseConfig morse;
  bool compute_morse = true;
  double step_floor_rel = 1e-4;
  // Optional extra acceptance predicate (e.g. branch guards); a rejected
  // solve triggers the same bisection as a Newton failure.
  std::function<bool(const BoundState&)> accept_extra;
};

// Warm-started parameter continuation. Failed steps are bisected (geometric
// midpoints for mass, arithmetic for rho) down to a relative floor; every
// accepted state passes verify_solution.
ContinuationTrace continuation(const BoundState& initial, const Discretization& d,
                               const Schedule& schedule, const ContinuationConfig& cfg = {});

}  // namespace gnls
