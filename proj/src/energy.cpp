#include "gnls/energy.hpp"

#include <algorithm>
#include <cmath>

namespace gnls {

namespace {

const double kGaussT[3] = {0.5 * (1.0 - std::sqrt(0.6)), 0.5, 0.5 * (1.0 + std::sqrt(0.6))};
const double kGaussW[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

double pow_abs(double v, double q) { return std::pow(std::abs(v), q); }

}  // namespace

void EnergyParams::validate() const {
  require(std::isfinite(p) && p > 6.0, errc::invalid_parameter, "exponent p must exceed 6");
  require(std::isfinite(rho) && rho >= 0.0 && rho <= 1.0, errc::invalid_parameter,
          "rho must lie in [0, 1]");
  require(std::isfinite(mu) && mu > 0.0, errc::invalid_parameter, "mass mu must be positive");
}

double energy(const GraphFunction& u, const Operators&, const EnergyParams& prm) {
  prm.validate();
  // Elementwise sum-of-squares form of u' K u. Algebraically identical, but
  // free of the cancellation that makes the assembled form noisy near
  // constants: descent flows must resolve energy differences far below
  // eps * ||K|| * ||u||^2.
  const Mesh& mesh = *u.mesh;
  double kinetic = 0.0;
  for (int e = 0; e < mesh.graph().num_edges(); ++e) {
    const double inv_h = 1.0 / mesh.spacing(e);
    double acc = 0.0;
    for (int k = 0; k < mesh.elements_on_edge(e); ++k) {
      const double d = u.values[mesh.node_dof(e, k + 1)] - u.values[mesh.node_dof(e, k)];
      acc += d * d;
    }
    kinetic += acc * inv_h;
  }
  if (prm.rho == 0.0) return 0.5 * kinetic;
  return 0.5 * kinetic - (prm.rho / prm.p) * integrate_power(u, prm.p);
}

Vec nonlinear_term(const GraphFunction& u, double p) {
  const Mesh& m = *u.mesh;
  Vec out = Vec::Zero(m.num_dofs());
  for (int e = 0; e < m.graph().num_edges(); ++e) {
    const double h = m.spacing(e);
    for (int el = 0; el < m.elements_on_edge(e); ++el) {
      const int d0 = m.node_dof(e, el);
      const int d1 = m.node_dof(e, el + 1);
      const double u0 = u.values[d0], u1 = u.values[d1];
      double a0 = 0.0, a1 = 0.0;
      for (int g = 0; g < 3; ++g) {
        const double t = kGaussT[g];
        const double val = u0 + (u1 - u0) * t;
        const double f = kGaussW[g] * pow_abs(val, p - 2.0) * val;
        a0 += f * (1.0 - t);
        a1 += f * t;
      }
      out[d0] += h * a0;
      out[d1] += h * a1;
    }
  }
  return out;
}

Vec gradient(const GraphFunction& u, const Operators& ops, const EnergyParams& prm) {
  prm.validate();
  Vec g = ops.K * u.values;
  if (prm.rho != 0.0) g -= prm.rho * nonlinear_term(u, prm.p);
  return g;
}

double lagrange_multiplier(const GraphFunction& u, const Operators& ops,
                           const EnergyParams& prm) {
  prm.validate();
  const double mass = u.values.dot(ops.M * u.values);
  require(std::abs(mass - prm.mu) <= 1e-8 * prm.mu, errc::mass_mismatch,
          "mass " + std::to_string(mass) + " is off the sphere mu = " + std::to_string(prm.mu));
  const double kinetic = u.values.dot(ops.K * u.values);
  const double power = prm.rho == 0.0 ? 0.0 : prm.rho * integrate_power(u, prm.p);
  return (power - kinetic) / mass;
}

Vec constrained_gradient(const GraphFunction& u, const Operators& ops, const EnergyParams& prm) {
  const double lam = lagrange_multiplier(u, ops, prm);
  return gradient(u, ops, prm) + lam * (ops.M * u.values);
}

SpMat nonlinear_weight(const GraphFunction& u, double p) {
  const Mesh& m = *u.mesh;
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < m.graph().num_edges(); ++e) {
    const double h = m.spacing(e);
    for (int el = 0; el < m.elements_on_edge(e); ++el) {
      const int d0 = m.node_dof(e, el);
      const int d1 = m.node_dof(e, el + 1);
      const double u0 = u.values[d0], u1 = u.values[d1];
      double w00 = 0.0, w01 = 0.0, w11 = 0.0;
      for (int g = 0; g < 3; ++g) {
        const double t = kGaussT[g];
        const double wgt = kGaussW[g] * pow_abs(u0 + (u1 - u0) * t, p - 2.0);
        w00 += wgt * (1.0 - t) * (1.0 - t);
        w01 += wgt * (1.0 - t) * t;
        w11 += wgt * t * t;
      }
      trip.emplace_back(d0, d0, h * w00);
      trip.emplace_back(d0, d1, h * w01);
      trip.emplace_back(d1, d0, h * w01);
      trip.emplace_back(d1, d1, h * w11);
    }
  }
  SpMat W(m.num_dofs(), m.num_dofs());
  W.setFromTriplets(trip.begin(), trip.end());
  return W;
}

double hessian_form(const GraphFunction& phi, const GraphFunction& u, double lambda,
                    const Operators& ops, const EnergyParams& prm) {
  prm.validate();
  const double quad =
      phi.values.dot(ops.K * phi.values) + lambda * phi.values.dot(ops.M * phi.values);
  if (prm.rho == 0.0) return quad;
  // int |u|^{p-2} phi^2 by the same rule as every other nonlinear integral
  const Mesh& m = *u.mesh;
  double mix = 0.0;
  for (int e = 0; e < m.graph().num_edges(); ++e) {
    const double h = m.spacing(e);
    for (int el = 0; el < m.elements_on_edge(e); ++el) {
      const int d0 = m.node_dof(e, el);
      const int d1 = m.node_dof(e, el + 1);
      const double u0 = u.values[d0], u1 = u.values[d1];
      const double p0 = phi.values[d0], p1 = phi.values[d1];
      double acc = 0.0;
      for (int g = 0; g < 3; ++g) {
        const double t = kGaussT[g];
        const double pv = p0 + (p1 - p0) * t;
        acc += kGaussW[g] * pow_abs(u0 + (u1 - u0) * t, prm.p - 2.0) * pv * pv;
      }
      mix += h * acc;
    }
  }
  return quad - (prm.p - 1.0) * prm.rho * mix;
}

namespace {

// Negative-pivot count of a sparse LDLT of A, or -1 when the factorization
// broke down (exact zero pivot, reported as NumericalIssue or as NaN in D);
// the caller then nudges the spectral cut and refactors. Small nonzero pivots
// are accepted: bisection drives the matrix toward singularity on purpose,
// and the pivot sign stays a valid Sturm reading there.
int negative_pivots(const SpMat& A) {
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) return -1;
  const Vec d = ldlt.vectorD();
  int neg = 0;
  for (int i = 0; i < d.size(); ++i) {
    if (std::isnan(d[i])) return -1;
    if (d[i] < 0.0) ++neg;
  }
  return neg;
}

// Sylvester inertia: #pencil eigenvalues of (H, M) below nu equals the
// negative-pivot count of H - nu M. Bordering with a column c restricts the
// count to the subspace { phi : c' phi = 0 } at the price of one spurious
// negative pivot (standard KKT inertia identity), so the bordered count minus
// one is the constrained count. Exact integers; no iteration to stall on
// stiff spectra.
int count_below(const SpMat& H, const SpMat& M, double nu, const Vec* border, double scale) {
  const int n = static_cast<int>(H.rows());
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double off = attempt == 0 ? 0.0
                                    : scale * 1e-12 * ((attempt + 1) / 2) *
                                          (attempt % 2 == 1 ? 1.0 : -1.0);
    SpMat A = H - (nu + off) * M;
    if (border == nullptr) {
      const int c = negative_pivots(A);
      if (c >= 0) return c;
      continue;
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(A.nonZeros() + 2 * static_cast<std::size_t>(n));
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) {
      if ((*border)[i] == 0.0) continue;
      trip.emplace_back(i, n, (*border)[i]);
      trip.emplace_back(n, i, (*border)[i]);
    }
    SpMat B(n + 1, n + 1);
    B.setFromTriplets(trip.begin(), trip.end());
    const int c = negative_pivots(B);
    if (c >= 1) return c - 1;
  }
  require(false, errc::no_convergence, "inertia count: factorization kept hitting zero pivots");
  return -1;
}

// Smallest pencil eigenvalue to within tol by inertia bisection. lo must be a
// strict lower bound for the whole (restricted) spectrum.
double min_eig_bisect(const SpMat& H, const SpMat& M, const Vec* border, double lo, double scale,
                      double tol, int max_iters) {
  double width = std::max(1.0, 0.25 * scale);
  double a = lo, b = lo + width;
  for (int guard = 0; count_below(H, M, b, border, scale) < 1; ++guard) {
    require(guard < 120, errc::no_convergence, "min-eig bracket: no eigenvalue found above bound");
    a = b;
    width *= 2.0;
    b = a + width;
  }
  for (int it = 0; it < max_iters && b - a > tol; ++it) {
    const double mid = 0.5 * (a + b);
    if (count_below(H, M, mid, border, scale) < 1)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

struct PencilSetup {
  SpMat H;
  Vec border;      // M u, normal of the mass-sphere tangent
  double scale;    // spectral magnitude for jitters and tolerances
  double lower;    // analytic lower bound: lambda - (p-1) rho max|u|^{p-2}
};

// phi' W(u) phi <= max|u|^{p-2} phi' M phi holds exactly for the shared
// 3-point Gauss rule, so the pencil spectrum is bounded below by
// lambda - (p-1) rho max|u|^{p-2}.
PencilSetup hessian_pencil(const GraphFunction& u, double lambda, const Operators& ops,
                           const EnergyParams& prm) {
  PencilSetup s;
  s.H = ops.K + lambda * ops.M;
  double wmax = 0.0;
  if (prm.rho != 0.0) {
    s.H -= (prm.p - 1.0) * prm.rho * nonlinear_weight(u, prm.p);
    wmax = (prm.p - 1.0) * prm.rho * std::pow(u.values.cwiseAbs().maxCoeff(), prm.p - 2.0);
  }
  s.border = ops.M * u.values;
  s.scale = std::max(1.0, std::abs(lambda) + wmax);
  s.lower = lambda - wmax - 1e-6 * s.scale;
  return s;
}

}  // namespace

MorseIndices morse_index(const GraphFunction& u, double lambda, const Operators& ops,
                         const EnergyParams& prm, const MorseConfig& cfg) {
  prm.validate();
  const PencilSetup s = hessian_pencil(u, lambda, ops, prm);
  const double tol = std::max(1e-12, cfg.eig_tol * s.scale);

  MorseIndices out;
  out.unconstrained = count_below(s.H, ops.M, -cfg.theta, nullptr, s.scale);
  out.constrained = count_below(s.H, ops.M, -cfg.theta, &s.border, s.scale);
  out.min_unconstrained =
      min_eig_bisect(s.H, ops.M, nullptr, s.lower, s.scale, tol, cfg.max_iters);
  out.min_constrained =
      min_eig_bisect(s.H, ops.M, &s.border, s.lower, s.scale, tol, cfg.max_iters);
  return out;
}

double constrained_hessian_min_eig(const GraphFunction& u, double lambda, const Operators& ops,
                                   const EnergyParams& prm, const MorseConfig& cfg) {
  prm.validate();
  const PencilSetup s = hessian_pencil(u, lambda, ops, prm);
  const double tol = std::max(1e-12, cfg.eig_tol * s.scale);
  return min_eig_bisect(s.H, ops.M, &s.border, s.lower, s.scale, tol, cfg.max_iters);
}

double StrongResidual::max_defect() const {
  double worst = 0.0;
  for (double d : kirchhoff_defects) worst = std::max(worst, std::abs(d));
  return worst;
}

StrongResidual strong_residual(const GraphFunction& u, double lambda, const EnergyParams& prm) {
  prm.validate();
  const Mesh& m = *u.mesh;
  const MetricGraph& g = m.graph();
  StrongResidual out;
  for (int e = 0; e < g.num_edges(); ++e) {
    const double h = m.spacing(e);
    for (int k = 1; k < m.elements_on_edge(e); ++k) {
      const double um = u.values[m.node_dof(e, k - 1)];
      const double uc = u.values[m.node_dof(e, k)];
      const double up = u.values[m.node_dof(e, k + 1)];
      const double lap = (um - 2.0 * uc + up) / (h * h);
      const double r = -lap + lambda * uc - prm.rho * pow_abs(uc, prm.p - 2.0) * uc;
      out.interior_norm = std::max(out.interior_norm, std::abs(r));
    }
  }
  out.kirchhoff_defects.assign(g.num_vertices(), 0.0);
  for (int e = 0; e < g.num_edges(); ++e) {
    const double h = m.spacing(e);
    const int n = m.elements_on_edge(e);
    // outward derivative at each end by second-order one-sided differences
    const double u0 = u.values[m.node_dof(e, 0)];
    const double u1 = u.values[m.node_dof(e, 1)];
    const double u2 = u.values[m.node_dof(e, 2)];
    out.kirchhoff_defects[g.edge(e).a] += (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h);
    const double vn = u.values[m.node_dof(e, n)];
    const double vn1 = u.values[m.node_dof(e, n - 1)];
    const double vn2 = u.values[m.node_dof(e, n - 2)];
    out.kirchhoff_defects[g.edge(e).b] += (-3.0 * vn + 4.0 * vn1 - vn2) / (2.0 * h);
  }
  return out;
}

}  // namespace gnls
