#include <doctest.h>

#include <random>

#include "gnls/graph.hpp"

using namespace gnls;

TEST_CASE("build_graph rejects bad specs") {
  GraphSpec s;
  s.vertices = {"a", "b"};
  s.edges = {{"e0", "a", "b", 0.0}};
  CHECK_THROWS_WITH_AS(build_graph(s), doctest::Contains("e0"), Error);
  try {
    build_graph(s);
  } catch (const Error& e) {
    CHECK(e.code() == errc::non_positive_length);
    CHECK(e.is_config());
  }

  s.edges = {{"e0", "a", "zz", 1.0}};
  try {
    build_graph(s);
    FAIL("dangling endpoint accepted");
  } catch (const Error& e) {
    CHECK(e.code() == errc::dangling_vertex_reference);
  }

  // Two components: a-b and c-d.
  s.vertices = {"a", "b", "c", "d"};
  s.edges = {{"e0", "a", "b", 1.0}, {"e1", "c", "d", 1.0}};
  try {
    build_graph(s);
    FAIL("disconnected graph accepted");
  } catch (const Error& e) {
    CHECK(e.code() == errc::disconnected_graph);
  }
}

TEST_CASE("built-in families have the advertised shape") {
  MetricGraph iv = make_interval(1.0);
  CHECK(iv.num_vertices() == 2);
  CHECK(iv.num_edges() == 1);
  CHECK(iv.total_length() == doctest::Approx(1.0));
  CHECK(iv.degree(0) == 1);

  MetricGraph cy = make_cycle(4.0);
  CHECK(cy.num_edges() == 1);
  CHECK(cy.edge(0).a == cy.edge(0).b);  // self-loop realization
  CHECK(cy.degree(cy.edge(0).a) == 2);  // loops count twice
  CHECK(cy.total_length() == doctest::Approx(4.0));

  MetricGraph st = make_star(3, 2.0);
  CHECK(st.num_vertices() == 4);
  CHECK(st.num_edges() == 3);
  CHECK(st.total_length() == doctest::Approx(6.0));
  int hubs = 0, tips = 0;
  for (int v = 0; v < st.num_vertices(); ++v) {
    if (st.degree(v) == 3) ++hubs;
    if (st.degree(v) == 1) ++tips;
  }
  CHECK(hubs == 1);
  CHECK(tips == 3);

  MetricGraph db = make_dumbbell(2.0, 1.0, 2.0);
  CHECK(db.num_vertices() == 2);
  CHECK(db.num_edges() == 3);
  CHECK(db.degree(0) == 3);
  CHECK(db.degree(1) == 3);
  CHECK(db.total_length() == doctest::Approx(5.0));
}

TEST_CASE("vertex distances are shortest paths") {
  MetricGraph st = make_star(3, 2.0);
  int hub = -1;
  for (int v = 0; v < st.num_vertices(); ++v)
    if (st.degree(v) == 3) hub = v;
  REQUIRE(hub >= 0);
  for (int v = 0; v < st.num_vertices(); ++v) {
    if (v == hub) continue;
    CHECK(st.vertex_distance(hub, v) == doctest::Approx(2.0));
    for (int w = 0; w < st.num_vertices(); ++w)
      if (w != hub && w != v) CHECK(st.vertex_distance(v, w) == doctest::Approx(4.0));
  }

  MetricGraph db = make_dumbbell(2.0, 1.0, 2.0);
  CHECK(db.vertex_distance(0, 1) == doctest::Approx(1.0));
  CHECK(db.vertex_distance(0, 0) == 0.0);
}

TEST_CASE("point distance handles self-loop wraparound") {
  MetricGraph cy = make_cycle(4.0);
  // Around through the vertex beats the direct same-edge segment.
  CHECK(cy.distance({0, 0.5}, {0, 3.9}) == doctest::Approx(0.6));
  CHECK(cy.distance({0, 1.0}, {0, 3.0}) == doctest::Approx(2.0));
  CHECK(cy.distance({0, 0.25}, {0, 0.75}) == doctest::Approx(0.5));
}

TEST_CASE("point distance uses parallel-edge shortcuts") {
  GraphSpec s;
  s.vertices = {"a", "b"};
  s.edges = {{"short", "a", "b", 1.0}, {"long", "a", "b", 10.0}};
  MetricGraph g = build_graph(s);
  // From deep on the long edge, hop across the short one.
  CHECK(g.distance({1, 9.5}, {1, 0.2}) == doctest::Approx(1.7));
  CHECK(g.distance({1, 5.0}, {0, 0.5}) == doctest::Approx(5.5));
  CHECK(g.distance_to_vertex({1, 9.5}, 0) == doctest::Approx(1.5));
}

TEST_CASE("point distance is a metric (fuzz)") {
  MetricGraph db = make_dumbbell(2.0, 1.0, 2.0);
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> pick_edge(0, db.num_edges() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pt = [&] {
    EdgeCoordinate x;
    x.edge = pick_edge(rng);
    x.s = unit(rng) * db.edge(x.edge).length;
    return x;
  };
  for (int i = 0; i < 1000; ++i) {
    EdgeCoordinate x = pt(), y = pt(), z = pt();
    double dxy = db.distance(x, y), dyx = db.distance(y, x);
    CHECK(dxy == doctest::Approx(dyx).epsilon(1e-12));
    CHECK(db.distance(x, x) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(db.distance(x, z) <= dxy + db.distance(y, z) + 1e-12);
    CHECK(dxy >= 0.0);
  }
}

TEST_CASE("graded interval is isometric to a straight one") {
  MetricGraph g = make_graded_interval(16.0, 1e-4);
  CHECK(g.total_length() == doctest::Approx(16.0).epsilon(1e-12));
  std::vector<int> tips;
  for (int v = 0; v < g.num_vertices(); ++v) {
    int d = g.degree(v);
    CHECK((d == 1 || d == 2));
    if (d == 1) tips.push_back(v);
  }
  REQUIRE(tips.size() == 2);
  CHECK(g.vertex_distance(tips[0], tips[1]) == doctest::Approx(16.0).epsilon(1e-12));
  double shortest = g.edge(0).length;
  for (const Edge& e : g.edges()) shortest = std::min(shortest, e.length);
  CHECK(shortest >= 0.49e-4);
  CHECK_THROWS_AS(make_graded_interval(1.0, 0.5), Error);  // scale must be << total
}

TEST_CASE("coordinate validation") {
  MetricGraph iv = make_interval(2.0);
  CHECK_NOTHROW(iv.check_coordinate({0, 0.0}));
  CHECK_NOTHROW(iv.check_coordinate({0, 2.0}));
  CHECK_THROWS_AS(iv.check_coordinate({1, 0.5}), Error);
  CHECK_THROWS_AS(iv.check_coordinate({0, 2.5}), Error);
  CHECK_THROWS_AS(iv.check_coordinate({0, -0.5}), Error);
  CHECK(iv.vertex_index("v0") == 0);
  CHECK_THROWS_AS(iv.vertex_index("nope"), Error);
}
