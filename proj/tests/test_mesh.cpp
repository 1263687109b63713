#include <doctest.h>

#include <Eigen/Dense>

#include "gnls/mesh.hpp"

using namespace gnls;

TEST_CASE("dof layout: vertices first, then edge interiors") {
  MetricGraph st = make_star(3, 1.0);
  MeshPtr m = build_mesh(st, 0.25);
  // 4 vertices + 3 interior nodes per arm.
  CHECK(m->num_dofs() == 13);
  for (int e = 0; e < 3; ++e) {
    CHECK(m->elements_on_edge(e) == 4);
    CHECK(m->spacing(e) == doctest::Approx(0.25));
    CHECK(m->node_dof(e, 0) == st.edge(e).a);
    CHECK(m->node_dof(e, 4) == st.edge(e).b);
    CHECK(m->node_dof(e, 1) >= st.num_vertices());
  }
  CHECK(m->vertex_dof(2) == 2);

  MeshPtr c = build_mesh(make_cycle(1.0), 0.25);
  CHECK(c->num_dofs() == 4);  // 1 vertex + 3 interior

  // Explicit per-edge counts.
  MeshPtr x = build_mesh(st, std::vector<int>{2, 3, 5});
  CHECK(x->num_dofs() == 4 + 1 + 2 + 4);
  CHECK(x->spacing(2) == doctest::Approx(0.2));
}

TEST_CASE("default target is a 64th of the shortest edge") {
  GraphSpec s;
  s.vertices = {"a", "b", "c"};
  s.edges = {{"e0", "a", "b", 2.0}, {"e1", "b", "c", 0.5}};
  MetricGraph g = build_graph(s);
  CHECK(default_h_target(g) == doctest::Approx(0.5 / 64.0));
}

TEST_CASE("assembled operators match the hand-made element sum") {
  // Interval of length 1 with two elements, h = 1/2. DOF order [v0, v1, mid].
  MeshPtr m = build_mesh(make_interval(1.0), std::vector<int>{2});
  Operators ops = assemble_operators(*m);
  REQUIRE(m->num_dofs() == 3);

  const double h = 0.5;
  Eigen::Matrix3d K, M;
  K << 1 / h, 0, -1 / h,
       0, 1 / h, -1 / h,
       -1 / h, -1 / h, 2 / h;
  M << 2 * h / 6, 0, h / 6,
       0, 2 * h / 6, h / 6,
       h / 6, h / 6, 4 * h / 6;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(ops.K.coeff(i, j) == doctest::Approx(K(i, j)).epsilon(1e-14));
      CHECK(ops.M.coeff(i, j) == doctest::Approx(M(i, j)).epsilon(1e-14));
    }
}

TEST_CASE("operator quadratic forms reproduce exact integrals") {
  MeshPtr m = build_mesh(make_interval(1.0), 1.0 / 64.0);
  Operators ops = assemble_operators(*m);
  GraphFunction u = interpolate(m, [](int, double s) { return s; });
  // u(x) = x is in the P1 space, so both forms are exact.
  double kin = u.values.dot(ops.K * u.values);
  double mass = u.values.dot(ops.M * u.values);
  CHECK(kin == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(mass == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("integrate_power: exact for p1 squares, gauss-accurate otherwise") {
  MeshPtr m = build_mesh(make_interval(1.0), 1.0 / 64.0);
  GraphFunction u = interpolate(m, [](int, double s) { return s; });
  CHECK(integrate_power(u, 2.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(integrate_power(u, 1.0) == doctest::Approx(0.5).epsilon(1e-13));
  // x^8 is beyond the rule's degree; per-element error is O(h^6).
  CHECK(integrate_power(u, 8.0) == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
  GraphFunction c = interpolate(m, [](int, double) { return -2.0; });
  CHECK(integrate_power(c, 3.0) == doctest::Approx(8.0).epsilon(1e-13));
}

TEST_CASE("interpolate enforces vertex consistency") {
  MeshPtr m = build_mesh(make_star(3, 1.0), 0.25);
  // s is measured from the hub on every arm, so this is single-valued.
  CHECK_NOTHROW(interpolate(m, [](int, double s) { return 1.0 + s * s; }));
  // Edge-dependent values collide at the shared hub.
  CHECK_THROWS_AS(interpolate(m, [](int e, double) { return double(e); }), Error);
}

TEST_CASE("nodal evaluation interpolates linearly") {
  MeshPtr m = build_mesh(make_interval(1.0), std::vector<int>{4});
  GraphFunction u = interpolate(m, [](int, double s) { return 2.0 * s; });
  CHECK(u(0, 0.125) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(u.at({0, 1.0}) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(u.at({0, 0.0}) == doctest::Approx(0.0).epsilon(1e-14));
}
