#pragma once

#include "gnls/solvers.hpp"

namespace gnls {

// Decaying positive even solution of -V'' + V = |V|^{p-2} V on the line:
// V(x) = C sech^alpha(beta x) with alpha = 2/(p-2), beta = (p-2)/2,
// C = (p/2)^{1/(p-2)}. alpha * beta = 1, so the tails go like C 2^alpha e^-|x|.
struct LineSoliton {
  double p = 0.0;
  double alpha = 0.0, beta = 0.0, C = 0.0;

  explicit LineSoliton(double p_);
  double operator()(double x) const;
  double deriv(double x) const;
  double second(double x) const;
  double l2_mass() const;  // int_R V^2
};

// Mass carried by a single concentrated peak at multiplier lambda, far from
// junctions: mu = rho^{-2/(p-2)} lambda^{(6-p)/(2(p-2))} int V^2. Decreasing
// in lambda precisely when p > 6.
double concentration_mass(double p, double rho, double lambda);
// Inverse of the above in lambda.
double concentration_lambda(double p, double rho, double mu);

// Symmetric profile at lambda = 1, rho = 1 on a star with truncated legs,
// computed by Newton on the unconstrained equation from the line-soliton
// restriction. V'(0) = 0 makes the vertex balance hold leg by leg, so the
// profile coincides with V on every leg up to truncation error.
struct StarProfile {
  BoundState state;        // params.mu is set to the computed mass
  double sup_error = 0.0;  // max nodal deviation from the line soliton
};
StarProfile star_soliton(int arms, double p, double leg_length = 20.0,
                         double h_target = 1.0 / 64.0);

struct Peak {
  int dof = -1;
  EdgeCoordinate where;
  double height = 0.0;
};

struct PeakSet {
  std::vector<Peak> peaks;          // tallest first
  std::vector<double> separations;  // sqrt(lambda) * dist(P_i, P_j), i < j
  double bound = 0.0;               // lambda^{1/(p-2)}
  bool degenerate = false;          // the state's top is a plateau
};

// Strict nodal local maxima of |u| clearing the maximum-principle floor
// u(P) >= lambda^{1/(p-2)} (1 - slack); maxima closer than R * lambda^{-1/2}
// are merged keeping the taller. A flat top (the constant state) comes back
// as degenerate with no peak entries. Throws NoPeaks when no node clears the
// floor at all.
PeakSet detect_peaks(const BoundState& s, double R = 15.0, double slack = 1e-8);

enum class PeakRegime { interior, vertex };

// Distance to the nearest vertex of degree != 2. Degree-2 vertices are
// removable (their matching conditions reduce to C^1 continuity), so they do
// not separate concentration windows; +inf when every vertex has degree 2.
double distance_to_junction(const MetricGraph& g, const EdgeCoordinate& x);

struct RescaledProfile {
  double eps = 0.0;                // lambda^{-1/2}
  double eps_height = 0.0;         // u(P)^{-(p-2)/2}
  double junction_dist_eps = 0.0;  // dist(P, junctions) / eps
  PeakRegime regime = PeakRegime::interior;
  std::vector<double> y;  // window coordinate in eps units; signed when the
                          // window is a two-arm line, nonnegative otherwise
  std::vector<double> w;  // eps^{2/(p-2)} u at the window nodes
  double shift = 0.0;     // fitted peak offset in eps units
  double sup_error = 0.0; // sup over the window of |w - rho^{-1/(p-2)} V(y - shift)|
  double window = 0.0;    // shortest arm reach in eps units
  bool window_exceeds_graph = false;  // every route ended before R
};

// Zooms into a peak at the multiplier scale and measures the distance to the
// limit profile, fitting the sub-mesh peak offset. The window follows the
// graph through degree-2 vertices and stops at junctions, tips, or R * eps;
// regime is interior when the junction distance exceeds regime_cutoff * eps,
// and vertex otherwise (where the reference per arm is the star profile's
// leg, which equals the line soliton's restriction).
RescaledProfile rescale_at_peak(const BoundState& s, const Peak& pk, double R = 15.0,
                                double regime_cutoff = 10.0);

struct EnvelopeCheck {
  double C1 = 2.0, C2 = 0.25;  // u <= C1 lambda^{1/(p-2)} [sum_i e^{-C2 sqrt(lambda) d(x,P_i)}
                               //                           + sum_j e^{-C2 sqrt(lambda) d(x,v_j)}]
  bool pass = false;
  double worst_margin = 0.0;  // max u/envelope over checked nodes
  double fitted_C2 = 0.0;     // largest rate in [0, 2] passing at this C1
  double floor_abs = 0.0;     // noise floor honored by the comparison
  int checked_nodes = 0;      // nodes outside the R * eps peak balls
};

// Tail-bound check at every node outside the peak windows, in log space. The
// additive floor (floor_rel * C1 * lambda^{1/(p-2)}) keeps the comparison
// honest where the solution underflows the envelope's dynamic range.
EnvelopeCheck decay_envelope_check(const BoundState& s, const std::vector<Peak>& peaks,
                                   double C1 = 2.0, double C2 = 0.25, double R = 15.0,
                                   double floor_rel = 1e-12);

// Pointwise envelope value (underflows to 0 where the exponents are extreme);
// for plots and spot checks, not the check itself.
double envelope_value(const BoundState& s, const std::vector<Peak>& peaks, double C1, double C2,
                      const EdgeCoordinate& x);

// Scaled line soliton u = (lambda/rho)^{1/(p-2)} V(sqrt(lambda) d(x, x0)),
// the standard initial guess for a state concentrating at x0.
GraphFunction soliton_ansatz(const MeshPtr& mesh, const EnergyParams& prm, double lambda,
                             const EdgeCoordinate& x0);

struct PeakRecord {
  Peak peak;
  double eps_height = 0.0;  // u(P)^{-(p-2)/2}
  double ratio = 0.0;       // eps_height / eps, in (0, 1] by the max bound
  RescaledProfile profile;
};

struct BlowupReport {
  double lambda = 0.0;
  double eps = 0.0;
  double bound = 0.0;
  bool degenerate = false;
  std::vector<PeakRecord> peaks;
  std::vector<double> separations;  // sqrt(lambda) * dist(P_i, P_j), i < j
  EnvelopeCheck envelope;
};

BlowupReport analyze_state(const BoundState& s, double R = 15.0, double regime_cutoff = 10.0,
                           double C1 = 2.0, double C2 = 0.25);

// One report per trace entry, in trace order.
std::vector<BlowupReport> analyze_trace(const ContinuationTrace& trace, double R = 15.0,
                                        double regime_cutoff = 10.0, double C1 = 2.0,
                                        double C2 = 0.25);

}  // namespace gnls
