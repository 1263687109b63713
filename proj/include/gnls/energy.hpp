#pragma once

#include "gnls/mesh.hpp"
#include "gnls/spectral.hpp"

namespace gnls {

// Parameters of the action E_rho(u) = 1/2 int |u'|^2 - rho/p int |u|^p on the
// mass sphere int u^2 = mu. Only p > 6 is admitted. rho = 1 is the plain
// action; the homotopy family lives in [1/2, 1], and rho = 0 (pure Dirichlet
// energy) is allowed for flow sanity checks.
struct EnergyParams {
  double p = 8.0;
  double rho = 1.0;
  double mu = 1.0;
  void validate() const;
};

double energy(const GraphFunction& u, const Operators& ops, const EnergyParams& prm);

// N(u)_i = int |u|^{p-2} u phi_i, the Gateaux derivative of int |u|^p / p.
Vec nonlinear_term(const GraphFunction& u, double p);

// grad E = K u - rho N(u).
Vec gradient(const GraphFunction& u, const Operators& ops, const EnergyParams& prm);

// lambda(u) = (rho int |u|^p - int |u'|^2) / int u^2. Requires the mass to be
// within 1e-8 (relative) of prm.mu; the division uses the actual mass so the
// projection below is exactly M-orthogonal to u.
double lagrange_multiplier(const GraphFunction& u, const Operators& ops, const EnergyParams& prm);

// grad E + lambda(u) M u: the gradient projected onto the mass-sphere tangent.
Vec constrained_gradient(const GraphFunction& u, const Operators& ops, const EnergyParams& prm);

// Weight operator W(u)_ij = int |u|^{p-2} phi_i phi_j (3-point Gauss).
SpMat nonlinear_weight(const GraphFunction& u, double p);

// Second variation Q(phi; u) = int |phi'|^2 + lambda int phi^2
//                              - (p-1) rho int |u|^{p-2} phi^2.
double hessian_form(const GraphFunction& phi, const GraphFunction& u, double lambda,
                    const Operators& ops, const EnergyParams& prm);

struct MorseConfig {
  double theta = 1e-8;   // eigenvalues below -theta count as negative
  double eig_tol = 1e-8;  // bisection width for the reported smallest eigenvalues
  int max_iters = 600;
};

struct MorseIndices {
  int unconstrained = 0;
  int constrained = 0;
  double min_unconstrained = 0.0;
  double min_constrained = 0.0;
};

// Counts eigenvalues of H = K + lambda M - (p-1) rho W(u) (as a pencil against
// M) below -theta, both on the whole space and restricted to the tangent space
// { phi : phi' M u = 0 }. Eigenvalues within a round-off window of -theta are
// counted non-negative (conservative index).
MorseIndices morse_index(const GraphFunction& u, double lambda, const Operators& ops,
                         const EnergyParams& prm, const MorseConfig& cfg = {});

// Smallest eigenvalue of the constrained second variation at u.
double constrained_hessian_min_eig(const GraphFunction& u, double lambda, const Operators& ops,
                                   const EnergyParams& prm, const MorseConfig& cfg = {});

struct StrongResidual {
  double interior_norm = 0.0;            // sup of |-u'' + lambda u - rho |u|^{p-2} u| at interior nodes
  std::vector<double> kirchhoff_defects;  // per vertex, one-sided second-order differences
  double max_defect() const;
};

// Pointwise residual diagnostics: second differences on edge interiors and
// flux-balance defects at vertices. These converge at O(h^2) for smooth
// states; they are reported, while the solver-controlled algebraic residual
// is what convergence tests gate on.
StrongResidual strong_residual(const GraphFunction& u, double lambda, const EnergyParams& prm);

}  // namespace gnls
