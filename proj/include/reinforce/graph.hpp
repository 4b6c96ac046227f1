#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace reinforce {

using Vertex = std::size_t;
using EdgeId = std::size_t;

// Undirected edge stored with u < v.
struct Edge {
  Vertex u;
  Vertex v;
  double weight;

  Vertex other(Vertex x) const { return x == u ? v : u; }
};

struct Incidence {
  Vertex neighbor;
  EdgeId edge;
};

// Finite connected simple graph with a positive weight per undirected edge.
// The weight plays the role of the ERRW initial weight, the VRJP
// conductance, or the sigma-model coupling depending on the caller.
// Immutable after construction.
class WeightedGraph {
 public:
  WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges);

  std::size_t n_vertices() const { return adjacency_.size(); }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  double weight(EdgeId e) const { return edges_[e].weight; }
  std::vector<double> weights() const;

  std::span<const Incidence> neighbors(Vertex v) const { return adjacency_[v]; }
  std::size_t degree(Vertex v) const { return adjacency_[v].size(); }
  std::optional<EdgeId> find_edge(Vertex a, Vertex b) const;

  // Same topology, new per-edge weights.
  WeightedGraph with_weights(std::span<const double> weights) const;

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
};

WeightedGraph make_path(std::size_t n, double weight = 1.0);
WeightedGraph make_cycle(std::size_t n, double weight = 1.0);
WeightedGraph make_complete(std::size_t n, double weight = 1.0);

// Base graph plus an extra vertex delta wired to every i with eps_i > 0.
class PinnedGraph {
 public:
  PinnedGraph(WeightedGraph base, std::vector<double> eps);

  const WeightedGraph& base() const { return base_; }
  const WeightedGraph& extended() const { return extended_; }
  std::span<const double> eps() const { return eps_; }
  Vertex delta() const { return base_.n_vertices(); }

 private:
  WeightedGraph base_;
  std::vector<double> eps_;
  WeightedGraph extended_;
};

inline constexpr std::size_t kDefaultVertexCap = std::size_t{1} << 20;

// Box {i in Z^d : |i|_inf <= n} with nearest-neighbour edges.
struct LatticeBox {
  WeightedGraph graph;
  int dim;
  int radius;
  std::vector<std::vector<int>> coords;  // vertex -> coordinates
  Vertex origin;
  std::vector<Vertex> boundary;  // |i|_inf == n

  Vertex index_of(std::span<const int> coord) const;
  int l1_norm(Vertex v) const;
};

LatticeBox build_lattice_box(int d, int n, double weight = 1.0,
                             std::size_t max_vertices = kDefaultVertexCap);

// Exhaustive spanning-tree enumeration. Test oracle, n_vertices <= 8.
inline constexpr std::size_t kSpanningTreeOracleCap = 8;
std::vector<std::vector<EdgeId>> spanning_trees(const WeightedGraph& g);

// Weighted Laplacian with the given per-edge conductances (positive
// diagonal, negative off-diagonal).
Eigen::MatrixXd laplacian(const WeightedGraph& g, std::span<const double> conductances);
Eigen::MatrixXd laplacian(const WeightedGraph& g);

struct ResistanceResult {
  double resistance;
  std::vector<double> potential;  // 1 at source, 0 on boundary
  std::vector<double> flow;       // unit current flow, oriented edge.u -> edge.v
};

// Effective resistance between `source` and the set `boundary` through a
// harmonic (Dirichlet) solve. Also returns the unit current flow, which is
// the energy-minimizing unit flow from source to boundary.
ResistanceResult effective_resistance(const WeightedGraph& g, std::span<const double> conductances,
                                      Vertex source, std::span<const Vertex> boundary);

// Same quantity by injecting a unit current at `source` with the boundary
// grounded, solved densely. Independent cross-check of the solver above.
double effective_resistance_injection(const WeightedGraph& g, std::span<const double> conductances,
                                      Vertex source, std::span<const Vertex> boundary);

// Thomson energy sum_e flow_e^2 / c_e.
double flow_energy(const WeightedGraph& g, std::span<const double> flow,
                   std::span<const double> conductances);

}  // namespace reinforce
