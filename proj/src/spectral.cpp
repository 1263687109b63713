#include "gnls/spectral.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <iostream>
#include <random>

namespace gnls {

namespace {

// Deterministic uniform in [-1, 1]. std::uniform_real_distribution is
// implementation-defined, so map the raw 64-bit stream directly.
double unit_from(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
  return 2.0 * u - 1.0;
}

// Modified Gram-Schmidt in the M inner product, in place. Columns that
// collapse are refilled from the RNG and re-orthogonalized.
void m_orthonormalize(Eigen::MatrixXd& X, const SpMat& M, const Eigen::MatrixXd& deflate,
                      std::mt19937_64& rng) {
  const int n = static_cast<int>(X.rows());
  for (int j = 0; j < X.cols(); ++j) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec x = X.col(j);
      // two passes of projection keep orthogonality at round-off level
      for (int pass = 0; pass < 2; ++pass) {
        if (deflate.cols() > 0) {
          Vec mx = M * x;
          x -= deflate * (deflate.transpose() * mx);
        }
        for (int i = 0; i < j; ++i) {
          Vec mx = M * x;
          x -= X.col(i) * X.col(i).dot(mx);
        }
      }
      const double nrm = std::sqrt(x.dot(M * x));
      if (nrm > 1e-12) {
        X.col(j) = x / nrm;
        break;
      }
      for (int r = 0; r < n; ++r) X(r, j) = unit_from(rng);
    }
  }
}

}  // namespace

PencilResult smallest_pencil_eigs(const SpMat& A, const SpMat& M, int k,
                                  const std::vector<Vec>& deflate, double sigma,
                                  const PencilOptions& opts) {
  const int n = static_cast<int>(A.rows());
  const int nd = static_cast<int>(deflate.size());
  require(k >= 1, errc::invalid_parameter, "need k >= 1 eigenpairs");
  require(k + nd <= n, errc::invalid_parameter, "k exceeds pencil dimension");

  std::mt19937_64 rng(opts.seed);

  // M-orthonormal basis of the deflation space.
  Eigen::MatrixXd D(n, nd);
  for (int i = 0; i < nd; ++i) D.col(i) = deflate[i];
  if (nd > 0) {
    Eigen::MatrixXd none(n, 0);
    m_orthonormalize(D, M, none, rng);
  }

  SpMat S = A;
  if (sigma != 0.0) S = A + sigma * M;
  Eigen::SimplicialLDLT<SpMat> fact(S);
  require(fact.info() == Eigen::Success, errc::singular_jacobian,
          "shifted pencil factorization failed");

  const int m = std::min(n - nd, k + opts.block_extra);
  Eigen::MatrixXd X(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = unit_from(rng);
  m_orthonormalize(X, M, D, rng);

  PencilResult out;
  double worst = std::numeric_limits<double>::infinity();
  double prev_worst = worst;
  int stall = 0;
  Eigen::VectorXd theta(m);
  for (int it = 1; it <= opts.max_iters; ++it) {
    Eigen::MatrixXd Y(n, m);
    for (int j = 0; j < m; ++j) Y.col(j) = fact.solve(M * X.col(j));
    m_orthonormalize(Y, M, D, rng);

    // Rayleigh-Ritz on the iterated subspace
    Eigen::MatrixXd T = Y.transpose() * (A * Y).eval();
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    X = Y * es.eigenvectors();
    theta = es.eigenvalues();

    worst = 0.0;
    Vec res(k);
    for (int j = 0; j < k; ++j) {
      const Vec ax = A * X.col(j);
      const Vec mx = M * X.col(j);
      const double scale = ax.norm() + std::abs(theta[j]) * mx.norm() + 1e-300;
      res[j] = (ax - theta[j] * mx).norm() / scale;
      worst = std::max(worst, res[j]);
    }
    out.iterations = it;
    out.residuals = res;
    if (worst <= opts.tol) break;
    stall = (worst > 0.8 * prev_worst) ? stall + 1 : 0;
    prev_worst = worst;
    if (stall >= 20 && worst <= opts.stall_tol) break;  // round-off floor reached
    if (it == opts.max_iters)
      fail(errc::no_convergence, "pencil solver: " + std::to_string(it) +
                                     " iterations, worst residual " + std::to_string(worst));
  }

  out.values = theta.head(k);
  out.vectors = X.leftCols(k);
  return out;
}

SpectralResult eigenpairs(const SpMat& K, const SpMat& M, int k, const PencilOptions& opts) {
  const int n = static_cast<int>(K.rows());
  require(k >= 2, errc::invalid_parameter, "need k >= 2");
  require(k <= n, errc::invalid_parameter, "k exceeds number of DOFs");

  // Constants span the kernel of K on a connected graph; inject the zero mode
  // exactly and compute the rest in its M-orthogonal complement.
  const Vec ones = Vec::Ones(n);
  const double ell = ones.dot(M * ones);  // total length
  const Vec phi1 = ones / std::sqrt(ell);

  // Friedlander gives lambda2 >= pi^2/L^2, so half of that keeps the shifted
  // operator positive definite while staying below the target eigenvalues.
  const double sigma = 0.5 * M_PI * M_PI / (ell * ell);

  PencilResult rest = smallest_pencil_eigs(K, M, k - 1, {phi1}, sigma, opts);

  SpectralResult out;
  out.eigenvalues = Vec(k);
  out.eigenvectors = Eigen::MatrixXd(n, k);
  out.residuals = Vec(k);
  out.eigenvalues[0] = 0.0;
  out.eigenvectors.col(0) = phi1;
  out.residuals[0] = (K * phi1).norm() / std::max(1e-300, (M * phi1).norm());
  out.eigenvalues.tail(k - 1) = rest.values;
  out.eigenvectors.rightCols(k - 1) = rest.vectors;
  out.residuals.tail(k - 1) = rest.residuals;
  out.iterations = rest.iterations;
  return out;
}

int multiplicity_of(const Vec& values, int index, double rel_tol) {
  const double head = values[index];
  const double scale = std::max(std::abs(head), 1e-300);
  int mult = 1;
  for (int j = index + 1; j < values.size(); ++j) {
    if (std::abs(values[j] - head) <= rel_tol * scale)
      ++mult;
    else
      break;
  }
  return mult;
}

Lambda2Result lambda2(const MetricGraph& g, double h_target, double tol, std::uint64_t seed) {
  Lambda2Result out;
  out.mesh = build_mesh(g, h_target);
  Operators ops = assemble_operators(*out.mesh);
  PencilOptions opts;
  opts.tol = tol;
  opts.seed = seed;
  const int k = std::min(out.mesh->num_dofs(), 6);
  out.spectrum = eigenpairs(ops.K, ops.M, k, opts);

  const double L = g.total_length();
  out.friedlander_bound = M_PI * M_PI / (L * L);
  // Skip zero modes: anything below a small fraction of the Friedlander bound
  // is the (deflated) kernel.
  const double zero_tol = 1e-6 * out.friedlander_bound;
  int first = -1;
  for (int j = 0; j < out.spectrum.eigenvalues.size(); ++j) {
    if (out.spectrum.eigenvalues[j] > zero_tol) {
      first = j;
      break;
    }
  }
  require(first >= 0, errc::no_convergence, "no positive eigenvalue found");
  out.lambda2 = out.spectrum.eigenvalues[first];
  out.multiplicity = multiplicity_of(out.spectrum.eigenvalues, first);
  out.bound_ok = out.lambda2 >= out.friedlander_bound * (1.0 - 1e-9);
  if (!out.bound_ok)
    std::cerr << "warning: lambda2 = " << out.lambda2 << " violates pi^2/L^2 = "
              << out.friedlander_bound << "\n";
  return out;
}

}  // namespace gnls
