#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "gnls/graph.hpp"

namespace gnls {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// P1 mesh over a metric graph. Each edge e carries n_e >= 2 uniform elements
// of spacing h_e = length_e / n_e. Global DOF numbering: vertices first
// (dof v == vertex index), then interior nodes edge by edge, so H1 continuity
// and the natural vertex coupling come from shared DOFs alone.
class Mesh {
 public:
  Mesh(MetricGraph graph, std::vector<int> elements_per_edge);

  const MetricGraph& graph() const { return graph_; }
  int num_dofs() const { return num_dofs_; }
  int elements_on_edge(int e) const { return n_[e]; }
  double spacing(int e) const { return h_[e]; }
  double min_spacing() const { return min_h_; }
  double max_spacing() const { return max_h_; }

  // Global DOF of the k-th node (k in [0, n_e]) along edge e.
  int node_dof(int e, int k) const {
    if (k == 0) return graph_.edge(e).a;
    if (k == n_[e]) return graph_.edge(e).b;
    return interior_start_[e] + (k - 1);
  }
  double node_s(int e, int k) const { return k * h_[e]; }
  int vertex_dof(int v) const { return v; }

  // Location of a DOF as an edge coordinate (vertices resolve to one of
  // their incident edges).
  EdgeCoordinate dof_coordinate(int dof) const { return coords_[dof]; }

  // Mesh-graph adjacency of DOFs, used for nodal peak detection.
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

 private:
  MetricGraph graph_;
  std::vector<int> n_;
  std::vector<double> h_;
  std::vector<int> interior_start_;
  std::vector<EdgeCoordinate> coords_;
  std::vector<std::vector<int>> adjacency_;
  int num_dofs_ = 0;
  double min_h_ = 0.0, max_h_ = 0.0;
};

using MeshPtr = std::shared_ptr<const Mesh>;

// Default element budget: n_e = max(2, ceil(length_e / h_target)).
MeshPtr build_mesh(const MetricGraph& g, double h_target);
// Explicit per-edge element counts (each >= 2).
MeshPtr build_mesh(const MetricGraph& g, std::vector<int> elements_per_edge);
double default_h_target(const MetricGraph& g);

// Piecewise-linear function on a mesh, identified with its nodal values.
struct GraphFunction {
  MeshPtr mesh;
  Vec values;

  GraphFunction() = default;
  GraphFunction(MeshPtr m, Vec v) : mesh(std::move(m)), values(std::move(v)) {}

  double operator()(int edge, double s) const;
  double at(const EdgeCoordinate& x) const { return (*this)(x.edge, x.s); }
};

// Stiffness and mass operators of the graph Laplacian in P1: K from
// (1/h)[[1,-1],[-1,1]] per element, M from (h/6)[[2,1],[1,2]]. Kirchhoff
// vertex conditions are natural in this weak form; no vertex rows are edited.
struct Operators {
  SpMat K;
  SpMat M;
};

Operators assemble_operators(const Mesh& mesh);

// Integral of |u|^q by 3-point Gauss quadrature per element (exact for P1
// integrands with q in {1, 2}).
double integrate_power(const GraphFunction& u, double q);

// Nodal interpolant of a pointwise function given per edge. Throws
// ConflictingVertexValues if two incident edges disagree at a vertex by more
// than 1e-12 (relative).
GraphFunction interpolate(const MeshPtr& mesh, const std::function<double(int, double)>& f);

}  // namespace gnls
