#include "gnls/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gnls {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

MetricGraph::MetricGraph(std::vector<std::string> vertex_names, std::vector<Edge> edges)
    : vertex_names_(std::move(vertex_names)), edges_(std::move(edges)) {
  const int nv = num_vertices();
  require(nv >= 1, errc::invalid_parameter, "graph needs at least one vertex");
  degree_.assign(nv, 0);
  incident_.assign(nv, {});
  for (int e = 0; e < num_edges(); ++e) {
    const Edge& ed = edges_[e];
    require(ed.a >= 0 && ed.a < nv && ed.b >= 0 && ed.b < nv, errc::dangling_vertex_reference,
            "edge " + ed.name + " references a missing vertex");
    require(ed.length > 0.0 && std::isfinite(ed.length), errc::non_positive_length,
            "edge " + ed.name + " has non-positive length");
    degree_[ed.a] += 1;
    degree_[ed.b] += 1;
    incident_[ed.a].push_back(e);
    if (ed.b != ed.a) incident_[ed.b].push_back(e);
    total_length_ += ed.length;
  }
  require(num_edges() >= 1, errc::invalid_parameter, "graph needs at least one edge");

  // All-pairs shortest paths on the vertex skeleton. Graphs here are small
  // (tens of vertices), so Floyd-Warshall is plenty.
  vdist_.assign(static_cast<size_t>(nv) * nv, kInf);
  for (int v = 0; v < nv; ++v) vdist_[v * nv + v] = 0.0;
  for (const Edge& ed : edges_) {
    if (ed.a == ed.b) continue;  // a loop never shortens vertex-to-vertex routes
    double& d1 = vdist_[ed.a * nv + ed.b];
    double& d2 = vdist_[ed.b * nv + ed.a];
    d1 = std::min(d1, ed.length);
    d2 = std::min(d2, ed.length);
  }
  for (int k = 0; k < nv; ++k)
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) {
        const double via = vdist_[i * nv + k] + vdist_[k * nv + j];
        if (via < vdist_[i * nv + j]) vdist_[i * nv + j] = via;
      }
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < nv; ++j)
      require(std::isfinite(vdist_[i * nv + j]), errc::disconnected_graph,
              "vertices " + vertex_names_[i] + " and " + vertex_names_[j] + " are not connected");
}

int MetricGraph::vertex_index(const std::string& name) const {
  for (int v = 0; v < num_vertices(); ++v)
    if (vertex_names_[v] == name) return v;
  fail(errc::dangling_vertex_reference, "unknown vertex id " + name);
}

void MetricGraph::check_coordinate(const EdgeCoordinate& x) const {
  require(x.edge >= 0 && x.edge < num_edges(), errc::invalid_parameter, "edge index out of range");
  const double len = edges_[x.edge].length;
  require(x.s >= -1e-12 && x.s <= len + 1e-12, errc::invalid_parameter,
          "coordinate outside edge length");
}

double MetricGraph::distance(const EdgeCoordinate& x, const EdgeCoordinate& y) const {
  check_coordinate(x);
  check_coordinate(y);
  const Edge& ex = edges_[x.edge];
  const Edge& ey = edges_[y.edge];
  double best = kInf;
  if (x.edge == y.edge) best = std::abs(x.s - y.s);
  // Route through endpoint pairs. For self-loops both endpoint distances
  // collapse onto the single vertex, which covers the wrap-around route.
  const double xa = x.s, xb = ex.length - x.s;
  const double ya = y.s, yb = ey.length - y.s;
  const double cand[4] = {
      xa + vertex_distance(ex.a, ey.a) + ya,
      xa + vertex_distance(ex.a, ey.b) + yb,
      xb + vertex_distance(ex.b, ey.a) + ya,
      xb + vertex_distance(ex.b, ey.b) + yb,
  };
  for (double c : cand) best = std::min(best, c);
  return best;
}

double MetricGraph::distance_to_vertex(const EdgeCoordinate& x, int v) const {
  check_coordinate(x);
  const Edge& ex = edges_[x.edge];
  return std::min(x.s + vertex_distance(ex.a, v), (ex.length - x.s) + vertex_distance(ex.b, v));
}

MetricGraph build_graph(const GraphSpec& spec) {
  require(!spec.vertices.empty(), errc::parse_error, "no vertices declared");
  std::map<std::string, int> index;
  std::vector<std::string> names;
  for (const std::string& v : spec.vertices) {
    require(index.emplace(v, static_cast<int>(names.size())).second, errc::parse_error,
            "duplicate vertex id " + v);
    names.push_back(v);
  }
  std::vector<Edge> edges;
  for (const auto& es : spec.edges) {
    Edge ed;
    ed.name = es.name;
    auto ia = index.find(es.a);
    auto ib = index.find(es.b);
    require(ia != index.end(), errc::dangling_vertex_reference,
            "edge " + es.name + " references unknown vertex " + es.a);
    require(ib != index.end(), errc::dangling_vertex_reference,
            "edge " + es.name + " references unknown vertex " + es.b);
    ed.a = ia->second;
    ed.b = ib->second;
    ed.length = es.length;
    edges.push_back(ed);
  }
  return MetricGraph(std::move(names), std::move(edges));
}

MetricGraph make_interval(double length) {
  return MetricGraph({"v0", "v1"}, {{"e0", 0, 1, length}});
}

MetricGraph make_cycle(double length) {
  return MetricGraph({"v0"}, {{"e0", 0, 0, length}});
}

MetricGraph make_star(int arms, double arm_length) {
  require(arms >= 1, errc::invalid_parameter, "star needs at least one arm");
  std::vector<std::string> names = {"c"};
  std::vector<Edge> edges;
  for (int i = 0; i < arms; ++i) {
    names.push_back("t" + std::to_string(i));
    edges.push_back({"e" + std::to_string(i), 0, i + 1, arm_length});
  }
  return MetricGraph(std::move(names), std::move(edges));
}

MetricGraph make_dumbbell(double loop_a, double bridge, double loop_b) {
  return MetricGraph({"v0", "v1"},
                     {{"loopA", 0, 0, loop_a}, {"bridge", 0, 1, bridge}, {"loopB", 1, 1, loop_b}});
}

MetricGraph make_graded_interval(double total, double center_scale) {
  require(total > 0 && center_scale > 0 && center_scale < total / 4, errc::invalid_parameter,
          "graded interval needs 0 < center_scale < total/4");
  const double half = total / 2.0;
  // Octave ladder: lengths half/2, half/4, ... ; the innermost rung spans the
  // midpoint as a single edge of length 2*half*2^-J, so the sum is exact.
  const int levels = std::max(1, static_cast<int>(std::round(std::log2(half / center_scale))));
  std::vector<double> down;
  for (int j = 1; j <= levels; ++j) down.push_back(half * std::pow(2.0, -j));
  std::vector<double> lengths(down.begin(), down.end());
  lengths.push_back(2.0 * down.back());
  lengths.insert(lengths.end(), down.rbegin(), down.rend());

  std::vector<std::string> names;
  std::vector<Edge> edges;
  const int n = static_cast<int>(lengths.size());
  for (int v = 0; v <= n; ++v) names.push_back("v" + std::to_string(v));
  for (int e = 0; e < n; ++e) edges.push_back({"e" + std::to_string(e), e, e + 1, lengths[e]});
  return MetricGraph(std::move(names), std::move(edges));
}

const char* errc_name(errc c) {
  switch (c) {
    case errc::disconnected_graph: return "DisconnectedGraph";
    case errc::non_positive_length: return "NonPositiveLength";
    case errc::dangling_vertex_reference: return "DanglingVertexReference";
    case errc::invalid_parameter: return "InvalidParameter";
    case errc::conflicting_vertex_values: return "ConflictingVertexValues";
    case errc::no_convergence: return "NoConvergence";
    case errc::mass_mismatch: return "MassMismatch";
    case errc::max_iters_exceeded: return "MaxItersExceeded";
    case errc::edge_too_short: return "EdgeTooShort";
    case errc::path_collapse: return "PathCollapse";
    case errc::singular_jacobian: return "SingularJacobian";
    case errc::diverged: return "Diverged";
    case errc::step_floor_reached: return "StepFloorReached";
    case errc::no_peaks: return "NoPeaks";
    case errc::parse_error: return "ParseError";
    case errc::io_error: return "IoError";
  }
  return "Error";
}

}  // namespace gnls
