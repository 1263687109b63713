#include <doctest.h>

#include <cmath>

#include "gnls/spectral.hpp"

using namespace gnls;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("interval spectrum: k^2 pi^2 ladder") {
  MeshPtr m = build_mesh(make_interval(1.0), 1.0 / 64.0);
  Operators ops = assemble_operators(*m);
  SpectralResult r = eigenpairs(ops.K, ops.M, 4);
  REQUIRE(r.eigenvalues.size() == 4);
  CHECK(std::abs(r.eigenvalues[0]) <= 1e-12);  // constants, injected exactly
  for (int k = 1; k < 4; ++k) {
    double exact = k * k * kPi * kPi;
    // P1 Rayleigh quotients overshoot by O((k pi h)^2) relative.
    CHECK(r.eigenvalues[k] == doctest::Approx(exact).epsilon(1e-3 * k * k));
    CHECK(r.eigenvalues[k] >= exact);  // conforming approximation from above
    CHECK(r.residuals[k] <= 1e-8);
  }
  // M-orthonormal basis.
  Eigen::MatrixXd G = r.eigenvectors.transpose() * ops.M * r.eigenvectors;
  CHECK((G - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("cycle spectrum: double eigenvalues") {
  MeshPtr m = build_mesh(make_cycle(1.0), 1.0 / 64.0);
  Operators ops = assemble_operators(*m);
  SpectralResult r = eigenpairs(ops.K, ops.M, 3);
  double exact = 4.0 * kPi * kPi;
  CHECK(r.eigenvalues[1] == doctest::Approx(exact).epsilon(1e-3));
  CHECK(r.eigenvalues[2] == doctest::Approx(exact).epsilon(1e-3));
  CHECK(multiplicity_of(r.eigenvalues, 1, 1e-6) == 2);
}

TEST_CASE("equilateral star: lambda2 = (pi/2a)^2") {
  Lambda2Result r = lambda2(make_star(3, 1.0), 1.0 / 64.0);
  CHECK(r.lambda2 == doctest::Approx(kPi * kPi / 4.0).epsilon(1e-3));
  CHECK(r.multiplicity == 2);  // odd across any two arms
  CHECK(r.friedlander_bound == doctest::Approx(kPi * kPi / 9.0).epsilon(1e-14));
  CHECK(r.bound_ok);
  CHECK(r.lambda2 >= r.friedlander_bound);
}

TEST_CASE("lambda2 on the benchmark graphs clears pi^2/L^2") {
  for (const MetricGraph& g :
       {make_interval(4.0), make_cycle(4.0), make_dumbbell(2.0, 1.0, 2.0)}) {
    Lambda2Result r = lambda2(g, default_h_target(g));
    double L = g.total_length();
    CHECK(r.friedlander_bound == doctest::Approx(kPi * kPi / (L * L)).epsilon(1e-14));
    CHECK(r.lambda2 >= r.friedlander_bound - 1e-9);
    CHECK(r.bound_ok);
  }
}

TEST_CASE("pencil solver: deflation and shifted operators") {
  MeshPtr m = build_mesh(make_interval(1.0), 1.0 / 32.0);
  Operators ops = assemble_operators(*m);
  // Deflating the true ground mode must surface the next one.
  SpectralResult full = eigenpairs(ops.K, ops.M, 2);
  Vec ground = full.eigenvectors.col(1);
  PencilResult r = smallest_pencil_eigs(ops.K, ops.M, 1, {full.eigenvectors.col(0), ground},
                                        /*sigma=*/1.0);
  CHECK(r.values[0] == doctest::Approx(4.0 * kPi * kPi).epsilon(1e-2));
}

TEST_CASE("spectral results are bitwise deterministic") {
  MeshPtr m = build_mesh(make_star(3, 1.0), 1.0 / 64.0);
  Operators ops = assemble_operators(*m);
  PencilOptions o;
  o.seed = 999;
  SpectralResult a = eigenpairs(ops.K, ops.M, 3, o);
  SpectralResult b = eigenpairs(ops.K, ops.M, 3, o);
  CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.eigenvectors - b.eigenvectors).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("multiplicity clustering splits on relative gaps") {
  Vec v(4);
  v << 0.0, 1.0, 1.0 + 1e-10, 2.0;
  CHECK(multiplicity_of(v, 1, 1e-8) == 2);
  CHECK(multiplicity_of(v, 3, 1e-8) == 1);
}
