#pragma once

#include <string>
#include <vector>

#include "gnls/errors.hpp"

namespace gnls {

// Edge of a metric graph: an interval [0, length] glued to vertices a (s = 0)
// and b (s = length). Self-loops (a == b) and parallel edges are allowed.
struct Edge {
  std::string name;
  int a = -1;
  int b = -1;
  double length = 0.0;
};

// A point on the graph: arclength coordinate s along edge `edge`, measured
// from endpoint a.
struct EdgeCoordinate {
  int edge = 0;
  double s = 0.0;
};

// Parsed description before validation; vertex ids are free-form tokens.
struct GraphSpec {
  std::vector<std::string> vertices;
  struct EdgeSpec {
    std::string name, a, b;
    double length;
  };
  std::vector<EdgeSpec> edges;
};

// Compact connected metric graph with a path metric. Immutable after
// construction; distances between vertices are precomputed.
class MetricGraph {
 public:
  MetricGraph(std::vector<std::string> vertex_names, std::vector<Edge> edges);

  int num_vertices() const { return static_cast<int>(vertex_names_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_.at(e); }
  const std::string& vertex_name(int v) const { return vertex_names_.at(v); }
  int vertex_index(const std::string& name) const;

  double total_length() const { return total_length_; }
  // Self-loops contribute 2 to the degree of their vertex.
  int degree(int v) const { return degree_.at(v); }
  const std::vector<int>& incident_edges(int v) const { return incident_.at(v); }

  // Shortest-path distance in the vertex skeleton.
  double vertex_distance(int u, int v) const { return vdist_.at(u * num_vertices() + v); }
  // Path metric between arbitrary points. Routes through endpoints and the
  // direct same-edge segment are both considered, so self-loop wrap-arounds
  // and parallel-edge shortcuts come out right.
  double distance(const EdgeCoordinate& x, const EdgeCoordinate& y) const;
  double distance_to_vertex(const EdgeCoordinate& x, int v) const;

  void check_coordinate(const EdgeCoordinate& x) const;

 private:
  std::vector<std::string> vertex_names_;
  std::vector<Edge> edges_;
  std::vector<int> degree_;
  std::vector<std::vector<int>> incident_;
  std::vector<double> vdist_;
  double total_length_ = 0.0;
};

// Validates and bakes a GraphSpec. Throws NonPositiveLength,
// DanglingVertexReference, or DisconnectedGraph.
MetricGraph build_graph(const GraphSpec& spec);

// Built-in families used by benchmarks and tests.
MetricGraph make_interval(double length);
MetricGraph make_cycle(double length);
MetricGraph make_star(int arms, double arm_length);
// Two self-loop cycles joined by a bridge edge: 2 vertices, 3 edges.
MetricGraph make_dumbbell(double loop_a, double bridge, double loop_b);
// Path graph isometric to an interval of length `total`, with edge lengths
// shrinking geometrically (by octaves) toward the midpoint down to
// `center_scale`. Meshing such a graph with a fixed per-edge element count
// yields spacing proportional to the distance from the center, which is what
// resolves concentrating states on one fixed mesh.
MetricGraph make_graded_interval(double total, double center_scale);

}  // namespace gnls
