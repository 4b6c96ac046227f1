#include "reinforce/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "reinforce/error.hpp"

namespace reinforce {
namespace {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<std::size_t> parent;
};

void check_conductances(const WeightedGraph& g, std::span<const double> c) {
  if (c.size() != g.n_edges()) throw InvalidArgument("conductance vector size does not match edge count");
  for (double x : c) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("conductances must be positive and finite");
  }
}

}  // namespace

WeightedGraph::WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges)
    : edges_(std::move(edges)), adjacency_(n_vertices) {
  if (n_vertices == 0) throw InvalidArgument("graph needs at least one vertex");
  std::set<std::pair<Vertex, Vertex>> seen;
  UnionFind components(n_vertices);
  std::size_t merges = 0;
  for (EdgeId e = 0; e < edges_.size(); ++e) {
    auto& edge = edges_[e];
    if (edge.u >= n_vertices || edge.v >= n_vertices) {
      throw InvalidArgument("edge endpoint out of range");
    }
    if (edge.u == edge.v) throw InvalidArgument("self-loops are not allowed");
    if (edge.u > edge.v) std::swap(edge.u, edge.v);
    if (!(edge.weight > 0.0) || !std::isfinite(edge.weight)) {
      throw InvalidArgument("edge weights must be positive and finite");
    }
    if (!seen.emplace(edge.u, edge.v).second) {
      std::ostringstream msg;
      msg << "duplicate edge {" << edge.u << "," << edge.v << "}";
      throw InvalidArgument(msg.str());
    }
    adjacency_[edge.u].push_back({edge.v, e});
    adjacency_[edge.v].push_back({edge.u, e});
    if (components.unite(edge.u, edge.v)) ++merges;
  }
  if (merges + 1 != n_vertices) throw DisconnectedError("graph is not connected");
}

std::vector<double> WeightedGraph::weights() const {
  std::vector<double> w(edges_.size());
  for (EdgeId e = 0; e < edges_.size(); ++e) w[e] = edges_[e].weight;
  return w;
}

std::optional<EdgeId> WeightedGraph::find_edge(Vertex a, Vertex b) const {
  if (a >= n_vertices() || b >= n_vertices()) return std::nullopt;
  for (const auto& inc : adjacency_[a]) {
    if (inc.neighbor == b) return inc.edge;
  }
  return std::nullopt;
}

WeightedGraph WeightedGraph::with_weights(std::span<const double> weights) const {
  if (weights.size() != edges_.size()) throw InvalidArgument("weight vector size does not match edge count");
  auto edges = edges_;
  for (EdgeId e = 0; e < edges.size(); ++e) edges[e].weight = weights[e];
  return WeightedGraph(n_vertices(), std::move(edges));
}

WeightedGraph make_path(std::size_t n, double weight) {
  std::vector<Edge> edges;
  for (Vertex i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, weight});
  return WeightedGraph(n, std::move(edges));
}

WeightedGraph make_cycle(std::size_t n, double weight) {
  if (n < 3) throw InvalidArgument("cycle needs at least 3 vertices");
  std::vector<Edge> edges;
  for (Vertex i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, weight});
  return WeightedGraph(n, std::move(edges));
}

WeightedGraph make_complete(std::size_t n, double weight) {
  std::vector<Edge> edges;
  for (Vertex i = 0; i < n; ++i) {
    for (Vertex j = i + 1; j < n; ++j) edges.push_back({i, j, weight});
  }
  return WeightedGraph(n, std::move(edges));
}

namespace {

WeightedGraph extend_with_delta(const WeightedGraph& base, std::span<const double> eps) {
  auto edges = base.edges();
  const Vertex delta = base.n_vertices();
  for (Vertex i = 0; i < base.n_vertices(); ++i) {
    if (eps[i] > 0.0) edges.push_back({i, delta, eps[i]});
  }
  return WeightedGraph(base.n_vertices() + 1, std::move(edges));
}

const std::vector<double>& validate_eps(const WeightedGraph& base, const std::vector<double>& eps) {
  if (eps.size() != base.n_vertices()) throw InvalidArgument("pinning vector size does not match vertex count");
  bool any = false;
  for (double e : eps) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidArgument("pinning weights must be finite and >= 0");
    any = any || e > 0.0;
  }
  if (!any) throw InvalidArgument("at least one pinning weight must be positive");
  return eps;
}

}  // namespace

PinnedGraph::PinnedGraph(WeightedGraph base, std::vector<double> eps)
    : base_(std::move(base)),
      eps_(validate_eps(base_, eps)),
      extended_(extend_with_delta(base_, eps_)) {}

Vertex LatticeBox::index_of(std::span<const int> coord) const {
  if (coord.size() != static_cast<std::size_t>(dim)) throw InvalidArgument("coordinate dimension mismatch");
  Vertex index = 0;
  const int side = 2 * radius + 1;
  for (int k = 0; k < dim; ++k) {
    if (coord[k] < -radius || coord[k] > radius) throw InvalidArgument("coordinate outside the box");
    index = index * side + static_cast<Vertex>(coord[k] + radius);
  }
  return index;
}

int LatticeBox::l1_norm(Vertex v) const {
  int s = 0;
  for (int c : coords[v]) s += std::abs(c);
  return s;
}

LatticeBox build_lattice_box(int d, int n, double weight, std::size_t max_vertices) {
  if (d < 1) throw InvalidArgument("lattice dimension must be >= 1");
  if (n < 0) throw InvalidArgument("lattice radius must be >= 0");
  const std::size_t side = static_cast<std::size_t>(2 * n + 1);
  std::size_t count = 1;
  for (int k = 0; k < d; ++k) {
    if (count > max_vertices / side) {
      throw CapacityError("lattice box exceeds the vertex cap");
    }
    count *= side;
  }
  if (count > max_vertices) throw CapacityError("lattice box exceeds the vertex cap");

  std::vector<std::vector<int>> coords(count, std::vector<int>(d));
  for (Vertex v = 0; v < count; ++v) {
    Vertex rest = v;
    for (int k = d - 1; k >= 0; --k) {
      coords[v][k] = static_cast<int>(rest % side) - n;
      rest /= side;
    }
  }
  // Row-major index: moving +1 along axis k adds stride[k].
  std::vector<Vertex> stride(d, 1);
  for (int k = d - 2; k >= 0; --k) stride[k] = stride[k + 1] * side;

  std::vector<Edge> edges;
  std::vector<Vertex> boundary;
  for (Vertex v = 0; v < count; ++v) {
    bool on_boundary = false;
    for (int k = 0; k < d; ++k) {
      if (coords[v][k] < n) edges.push_back({v, v + stride[k], weight});
      if (std::abs(coords[v][k]) == n) on_boundary = true;
    }
    if (on_boundary) boundary.push_back(v);
  }
  LatticeBox box{WeightedGraph(count, std::move(edges)), d, n, std::move(coords), 0, std::move(boundary)};
  std::vector<int> zero(d, 0);
  box.origin = box.index_of(zero);
  return box;
}

std::vector<std::vector<EdgeId>> spanning_trees(const WeightedGraph& g) {
  const std::size_t n = g.n_vertices();
  if (n > kSpanningTreeOracleCap) throw SizeError("spanning tree enumeration is limited to 8 vertices");
  const std::size_t m = g.n_edges();
  const std::size_t k = n - 1;
  std::vector<std::vector<EdgeId>> trees;
  if (k == 0) {
    trees.emplace_back();
    return trees;
  }
  // Walk all k-subsets of edges in lexicographic order.
  std::vector<EdgeId> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    UnionFind uf(n);
    bool acyclic = true;
    for (EdgeId e : pick) {
      if (!uf.unite(g.edge(e).u, g.edge(e).v)) {
        acyclic = false;
        break;
      }
    }
    if (acyclic) trees.push_back(pick);  // k acyclic edges on n vertices span
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == m - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return trees;
}

Eigen::MatrixXd laplacian(const WeightedGraph& g, std::span<const double> conductances) {
  check_conductances(g, conductances);
  const auto n = static_cast<Eigen::Index>(g.n_vertices());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    const auto i = static_cast<Eigen::Index>(g.edge(e).u);
    const auto j = static_cast<Eigen::Index>(g.edge(e).v);
    const double c = conductances[e];
    lap(i, j) -= c;
    lap(j, i) -= c;
    lap(i, i) += c;
    lap(j, j) += c;
  }
  return lap;
}

Eigen::MatrixXd laplacian(const WeightedGraph& g) {
  const auto w = g.weights();
  return laplacian(g, w);
}

namespace {

// Marks boundary vertices, validating the source/boundary pair.
std::vector<char> boundary_mask(const WeightedGraph& g, Vertex source, std::span<const Vertex> boundary) {
  if (boundary.empty()) throw InvalidArgument("boundary set must be nonempty");
  if (source >= g.n_vertices()) throw InvalidArgument("source vertex out of range");
  std::vector<char> mask(g.n_vertices(), 0);
  for (Vertex b : boundary) {
    if (b >= g.n_vertices()) throw InvalidArgument("boundary vertex out of range");
    mask[b] = 1;
  }
  if (mask[source]) throw InvalidArgument("source must not lie in the boundary");
  return mask;
}

}  // namespace

ResistanceResult effective_resistance(const WeightedGraph& g, std::span<const double> conductances,
                                      Vertex source, std::span<const Vertex> boundary) {
  check_conductances(g, conductances);
  const auto mask = boundary_mask(g, source, boundary);
  const std::size_t n = g.n_vertices();

  // Unknowns: every vertex except source and boundary.
  std::vector<Eigen::Index> slot(n, -1);
  Eigen::Index interior = 0;
  for (Vertex v = 0; v < n; ++v) {
    if (v != source && !mask[v]) slot[v] = interior++;
  }

  std::vector<double> potential(n, 0.0);
  potential[source] = 1.0;
  if (interior > 0) {
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(interior);
    for (EdgeId e = 0; e < g.n_edges(); ++e) {
      const Vertex a = g.edge(e).u;
      const Vertex b = g.edge(e).v;
      const double c = conductances[e];
      for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        if (slot[x] < 0) continue;
        triplets.emplace_back(slot[x], slot[x], c);
        if (slot[y] >= 0) {
          triplets.emplace_back(slot[x], slot[y], -c);
        } else {
          rhs(slot[x]) += c * potential[y];
        }
      }
    }
    Eigen::SparseMatrix<double> system(interior, interior);
    system.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
    if (solver.info() != Eigen::Success) {
      throw DisconnectedError("interior Dirichlet problem is singular: source and boundary disconnected");
    }
    const Eigen::VectorXd phi = solver.solve(rhs);
    for (Vertex v = 0; v < n; ++v) {
      if (slot[v] >= 0) potential[v] = phi(slot[v]);
    }
  }

  double current = 0.0;
  for (const auto& inc : g.neighbors(source)) {
    current += conductances[inc.edge] * (1.0 - potential[inc.neighbor]);
  }
  if (!(current > 0.0) || !std::isfinite(current)) {
    throw DisconnectedError("no current flows from source to boundary");
  }

  ResistanceResult result{1.0 / current, std::move(potential), std::vector<double>(g.n_edges())};
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    const auto& edge = g.edge(e);
    result.flow[e] = conductances[e] * (result.potential[edge.u] - result.potential[edge.v]) / current;
  }
  return result;
}

double effective_resistance_injection(const WeightedGraph& g, std::span<const double> conductances,
                                      Vertex source, std::span<const Vertex> boundary) {
  check_conductances(g, conductances);
  const auto mask = boundary_mask(g, source, boundary);
  const std::size_t n = g.n_vertices();

  // Collapse the boundary into one grounded node and drop its row/column.
  std::vector<Eigen::Index> slot(n, -1);
  Eigen::Index m = 0;
  for (Vertex v = 0; v < n; ++v) {
    if (!mask[v]) slot[v] = m++;
  }
  Eigen::MatrixXd reduced = Eigen::MatrixXd::Zero(m, m);
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    const auto a = slot[g.edge(e).u];
    const auto b = slot[g.edge(e).v];
    const double c = conductances[e];
    if (a >= 0) reduced(a, a) += c;
    if (b >= 0) reduced(b, b) += c;
    if (a >= 0 && b >= 0) {
      reduced(a, b) -= c;
      reduced(b, a) -= c;
    }
  }
  Eigen::VectorXd injection = Eigen::VectorXd::Zero(m);
  injection(slot[source]) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
  if (!lu.isInvertible()) throw DisconnectedError("grounded Laplacian is singular");
  const Eigen::VectorXd phi = lu.solve(injection);
  return phi(slot[source]);
}

double flow_energy(const WeightedGraph& g, std::span<const double> flow,
                   std::span<const double> conductances) {
  check_conductances(g, conductances);
  if (flow.size() != g.n_edges()) throw InvalidArgument("flow vector size does not match edge count");
  double energy = 0.0;
  for (EdgeId e = 0; e < g.n_edges(); ++e) energy += flow[e] * flow[e] / conductances[e];
  return energy;
}

}  // namespace reinforce
