#include "gnls/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnls {

namespace {

// 3-point Gauss-Legendre rule on [0, 1], exact through degree 5.
struct GaussRule {
  double t[3];
  double w[3];
};

const GaussRule& gauss3() {
  static const double r = std::sqrt(0.6);
  static const GaussRule rule = {{0.5 * (1.0 - r), 0.5, 0.5 * (1.0 + r)},
                                 {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  return rule;
}

}  // namespace

Mesh::Mesh(MetricGraph graph, std::vector<int> elements_per_edge)
    : graph_(std::move(graph)), n_(std::move(elements_per_edge)) {
  const int ne = graph_.num_edges();
  require(static_cast<int>(n_.size()) == ne, errc::invalid_parameter,
          "need one element count per edge");
  const int nv = graph_.num_vertices();
  h_.resize(ne);
  interior_start_.resize(ne);
  int next = nv;
  for (int e = 0; e < ne; ++e) {
    require(n_[e] >= 2, errc::invalid_parameter, "need at least 2 elements per edge");
    h_[e] = graph_.edge(e).length / n_[e];
    interior_start_[e] = next;
    next += n_[e] - 1;
  }
  num_dofs_ = next;
  min_h_ = *std::min_element(h_.begin(), h_.end());
  max_h_ = *std::max_element(h_.begin(), h_.end());

  coords_.assign(num_dofs_, EdgeCoordinate{});
  std::vector<bool> seen(num_dofs_, false);
  adjacency_.assign(num_dofs_, {});
  for (int e = 0; e < ne; ++e) {
    for (int k = 0; k <= n_[e]; ++k) {
      const int d = node_dof(e, k);
      if (!seen[d]) {
        coords_[d] = {e, node_s(e, k)};
        seen[d] = true;
      }
      if (k > 0) {
        const int prev = node_dof(e, k - 1);
        adjacency_[d].push_back(prev);
        adjacency_[prev].push_back(d);
      }
    }
  }
}

MeshPtr build_mesh(const MetricGraph& g, double h_target) {
  require(h_target > 0.0 && std::isfinite(h_target), errc::invalid_parameter,
          "h_target must be positive");
  std::vector<int> counts(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    const double raw = g.edge(e).length / h_target;
    counts[e] = std::max(2, static_cast<int>(std::ceil(raw * (1.0 - 1e-12))));
  }
  return std::make_shared<const Mesh>(g, std::move(counts));
}

MeshPtr build_mesh(const MetricGraph& g, std::vector<int> elements_per_edge) {
  return std::make_shared<const Mesh>(g, std::move(elements_per_edge));
}

double default_h_target(const MetricGraph& g) {
  double lmin = std::numeric_limits<double>::infinity();
  for (const Edge& e : g.edges()) lmin = std::min(lmin, e.length);
  return lmin / 64.0;
}

double GraphFunction::operator()(int edge, double s) const {
  const Mesh& m = *mesh;
  m.graph().check_coordinate({edge, s});
  const double h = m.spacing(edge);
  int k = static_cast<int>(std::floor(s / h));
  k = std::clamp(k, 0, m.elements_on_edge(edge) - 1);
  const double t = std::clamp((s - k * h) / h, 0.0, 1.0);
  const double u0 = values[m.node_dof(edge, k)];
  const double u1 = values[m.node_dof(edge, k + 1)];
  return u0 + (u1 - u0) * t;
}

Operators assemble_operators(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> tk, tm;
  const MetricGraph& g = mesh.graph();
  for (int e = 0; e < g.num_edges(); ++e) {
    const double h = mesh.spacing(e);
    const double k11 = 1.0 / h;
    const double m11 = h / 3.0, m12 = h / 6.0;
    for (int el = 0; el < mesh.elements_on_edge(e); ++el) {
      const int d0 = mesh.node_dof(e, el);
      const int d1 = mesh.node_dof(e, el + 1);
      tk.emplace_back(d0, d0, k11);
      tk.emplace_back(d1, d1, k11);
      tk.emplace_back(d0, d1, -k11);
      tk.emplace_back(d1, d0, -k11);
      tm.emplace_back(d0, d0, m11);
      tm.emplace_back(d1, d1, m11);
      tm.emplace_back(d0, d1, m12);
      tm.emplace_back(d1, d0, m12);
    }
  }
  Operators ops;
  ops.K.resize(mesh.num_dofs(), mesh.num_dofs());
  ops.M.resize(mesh.num_dofs(), mesh.num_dofs());
  ops.K.setFromTriplets(tk.begin(), tk.end());
  ops.M.setFromTriplets(tm.begin(), tm.end());
  return ops;
}

double integrate_power(const GraphFunction& u, double q) {
  require(q >= 0.0, errc::invalid_parameter, "power must be non-negative");
  const Mesh& m = *u.mesh;
  const GaussRule& gr = gauss3();
  double total = 0.0;
  for (int e = 0; e < m.graph().num_edges(); ++e) {
    const double h = m.spacing(e);
    double edge_sum = 0.0;
    for (int el = 0; el < m.elements_on_edge(e); ++el) {
      const double u0 = u.values[m.node_dof(e, el)];
      const double u1 = u.values[m.node_dof(e, el + 1)];
      double acc = 0.0;
      for (int gpt = 0; gpt < 3; ++gpt) {
        const double val = u0 + (u1 - u0) * gr.t[gpt];
        acc += gr.w[gpt] * std::pow(std::abs(val), q);
      }
      edge_sum += acc;
    }
    total += h * edge_sum;
  }
  return total;
}

GraphFunction interpolate(const MeshPtr& mesh, const std::function<double(int, double)>& f) {
  const Mesh& m = *mesh;
  const MetricGraph& g = m.graph();
  Vec vals = Vec::Zero(m.num_dofs());
  std::vector<bool> set(m.num_dofs(), false);
  for (int e = 0; e < g.num_edges(); ++e) {
    for (int k = 0; k <= m.elements_on_edge(e); ++k) {
      const int d = m.node_dof(e, k);
      const double v = f(e, m.node_s(e, k));
      if (set[d]) {
        const double scale = std::max(1.0, std::abs(vals[d]));
        require(std::abs(v - vals[d]) <= 1e-12 * scale, errc::conflicting_vertex_values,
                "edge " + g.edge(e).name + " disagrees at a shared vertex");
      } else {
        vals[d] = v;
        set[d] = true;
      }
    }
  }
  return GraphFunction(mesh, std::move(vals));
}

}  // namespace gnls
