#pragma once

#include <cstdint>
#include <vector>

#include "gnls/mesh.hpp"

namespace gnls {

struct PencilOptions {
  double tol = 1e-10;      // relative residual ||Ax - t Mx|| / (||Ax|| + |t| ||Mx||)
  int max_iters = 500;
  std::uint64_t seed = 12345;
  int block_extra = 8;     // extra subspace columns beyond the requested count
  // When progress stalls (round-off floor of the factorization), results at or
  // below this residual are still accepted. Matters only for badly scaled
  // pencils; desk-scale problems converge to `tol`.
  double stall_tol = 1e-6;
};

struct PencilResult {
  Vec values;                // ascending
  Eigen::MatrixXd vectors;   // M-orthonormal columns
  Vec residuals;
  int iterations = 0;
};

// Smallest eigenpairs of the symmetric pencil A x = t M x restricted to the
// M-orthogonal complement of `deflate`. Shift-inverted subspace iteration:
// factor (A + sigma M) once (must be positive definite), iterate
// X <- (A + sigma M)^{-1} M X with M-orthonormalization and Rayleigh-Ritz.
// Deterministic for a fixed seed.
PencilResult smallest_pencil_eigs(const SpMat& A, const SpMat& M, int k,
                                  const std::vector<Vec>& deflate, double sigma,
                                  const PencilOptions& opts = {});

struct SpectralResult {
  Vec eigenvalues;
  Eigen::MatrixXd eigenvectors;  // M-orthonormal
  Vec residuals;
  int iterations = 0;
};

// k smallest eigenpairs of K phi = lambda M phi for the Kirchhoff pencil.
// The zero mode (constants) is injected exactly and deflated from the
// iteration by explicit M-orthogonal projection.
SpectralResult eigenpairs(const SpMat& K, const SpMat& M, int k, const PencilOptions& opts = {});

// Eigenvalues within rel_tol (relative to the cluster head) count as one
// multiplicity cluster.
int multiplicity_of(const Vec& values, int index, double rel_tol = 1e-8);

struct Lambda2Result {
  double lambda2 = 0.0;
  int multiplicity = 1;
  double friedlander_bound = 0.0;  // pi^2 / L^2
  bool bound_ok = true;
  SpectralResult spectrum;
  MeshPtr mesh;
};

// First positive eigenvalue of the graph Laplacian (zero modes skipped), with
// its multiplicity cluster and the pi^2/L^2 lower-bound check (warns on
// stderr if violated; conforming P1 approximations stay above it).
Lambda2Result lambda2(const MetricGraph& g, double h_target, double tol = 1e-10,
                      std::uint64_t seed = 12345);

}  // namespace gnls
