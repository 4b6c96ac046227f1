#pragma once

#include <span>
#include <variant>
#include <vector>

#include "reinforce/graph.hpp"

namespace reinforce {

enum class Gauge { ZeroSum, Free };

inline constexpr double kZeroSumTolerance = 1e-12;

// Subtracts the mean so that sum(u) == 0 up to rounding.
void project_zero_sum(std::span<double> u);
// |sum u| <= 1e-12 * max(1, sum |u|).
bool is_zero_sum(std::span<const double> u);

struct FieldConfig {
  std::vector<double> u;
  Gauge gauge = Gauge::Free;
};

// Rooted form: density on the zero-sum hyperplane for conductances W and a
// distinguished vertex.
struct RootedMeasure {
  WeightedGraph graph;
  Vertex root;
};

// Pinned form: sigma-model couplings on the base graph plus pinning eps.
struct PinnedMeasure {
  PinnedGraph pinned;
};

class MeasureParams {
 public:
  static MeasureParams rooted(WeightedGraph g, Vertex root);
  static MeasureParams pinned(PinnedGraph p);

  bool is_rooted() const { return std::holds_alternative<RootedMeasure>(form_); }
  Gauge gauge() const { return is_rooted() ? Gauge::ZeroSum : Gauge::Free; }
  std::size_t dimension() const;
  const WeightedGraph& graph() const;
  const RootedMeasure& as_rooted() const { return std::get<RootedMeasure>(form_); }
  const PinnedMeasure& as_pinned() const { return std::get<PinnedMeasure>(form_); }

  double log_density(std::span<const double> x) const;

 private:
  explicit MeasureParams(std::variant<RootedMeasure, PinnedMeasure> form) : form_(std::move(form)) {}
  std::variant<RootedMeasure, PinnedMeasure> form_;
};

// 2 sum_e W_e sinh^2((u_i - u_j)/2).
double h_functional(const WeightedGraph& g, std::span<const double> u);
// sum_e beta_e (cosh(t_i - t_j) - 1).
double cosh_energy(const WeightedGraph& g, std::span<const double> t);
// sum_i eps_i (cosh(t_i) - 1).
double pinning_energy(std::span<const double> eps, std::span<const double> t);

// log of the diagonal minor (row/column `minor` removed) of the weighted
// Laplacian with conductances W_ij exp(u_i + u_j).
double log_tree_determinant(const WeightedGraph& g, std::span<const double> u, Vertex minor = 0);

// log of the diagonal minor of the Laplacian with the given edge weights.
double log_laplacian_minor(const WeightedGraph& g, std::span<const double> weights, Vertex minor = 0);

// Log density on the zero-sum hyperplane, taken with respect to the
// Lebesgue measure on the differences u_i - u_j0 (i != j0).
double limit_log_density(const WeightedGraph& g, Vertex root, std::span<const double> u);

// Log density of the pinned sigma-model measure in free coordinates t,
// with respect to prod_j dt_j.
double sigma_log_density(const PinnedGraph& p, std::span<const double> t);

// log of the Coppersmith-Diaconis normalizing constant for initial weights
// a (the graph's edge weights) started at `root`.
double cd_log_constant(const WeightedGraph& a, Vertex root);

// Coppersmith-Diaconis log density of the normalized conductances y
// (edge-indexed, y[e0] == 1) with respect to prod_{e != e0} dy_e.
double cd_log_density(const WeightedGraph& a, Vertex root, EdgeId e0, std::span<const double> y);

}  // namespace reinforce
