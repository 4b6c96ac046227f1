#include "reinforce/measure.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Core>
#include <limits>

#include "reinforce/error.hpp"

namespace reinforce {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_size(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() != n) {
    std::ostringstream msg;
    msg << what << ": expected " << n << " entries, got " << x.size();
    throw InvalidArgument(msg.str());
  }
}

std::string describe(std::span<const double> u) {
  std::ostringstream msg;
  msg << "u = (";
  const std::size_t shown = std::min<std::size_t>(u.size(), 12);
  for (std::size_t i = 0; i < shown; ++i) msg << (i ? ", " : "") << u[i];
  if (shown < u.size()) msg << ", ...";
  msg << ")";
  return msg.str();
}

// log det of the diagonal minor (row/column `removed` dropped) of the
// Laplacian with symmetric weights exp(log_w(i, j)), with -inf marking a
// missing edge. `excess` adds exp(log_excess[i]) to the diagonal.
//
// Eliminates one vertex at a time. Each Schur complement of a Laplacian
// minor is again a Laplacian minor, so the pivots and the updated weights
// are sums of positive terms and no cancellation occurs.
double log_minor_subtraction_free(Eigen::MatrixXd log_w, std::vector<double> log_excess, Eigen::Index removed) {
  const Eigen::Index n = log_w.rows();
  double peak = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) peak = std::max(peak, log_w(i, j));
    }
    peak = std::max(peak, log_excess[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(peak)) return n <= 1 ? 0.0 : std::numeric_limits<double>::quiet_NaN();

  // Scale every weight by exp(-peak); the minor of size m scales by exp(-m peak).
  Eigen::MatrixXd w(n, n);
  std::vector<double> excess(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) w(i, j) = i == j ? 0.0 : std::exp(log_w(i, j) - peak);
    excess[static_cast<std::size_t>(i)] = std::exp(log_excess[static_cast<std::size_t>(i)] - peak);
  }
  // Edges into the removed vertex become diagonal excess.
  if (removed >= 0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != removed) excess[static_cast<std::size_t>(i)] += w(i, removed);
    }
  }

  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  if (removed >= 0) alive[static_cast<std::size_t>(removed)] = 0;
  double log_det = 0.0;
  Eigen::Index size = 0;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (!alive[static_cast<std::size_t>(v)]) continue;
    ++size;
    double pivot = excess[static_cast<std::size_t>(v)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != v && alive[static_cast<std::size_t>(j)]) pivot += w(v, j);
    }
    if (!(pivot > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    log_det += std::log(pivot);
    alive[static_cast<std::size_t>(v)] = 0;
    const double sv = excess[static_cast<std::size_t>(v)] / pivot;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!alive[static_cast<std::size_t>(i)] || w(i, v) == 0.0) continue;
      const double ratio = w(i, v) / pivot;
      excess[static_cast<std::size_t>(i)] += w(i, v) * sv;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (!alive[static_cast<std::size_t>(j)]) continue;
        const double add = ratio * w(j, v);
        w(i, j) += add;
        w(j, i) += add;
      }
    }
  }
  return log_det + static_cast<double>(size) * peak;
}

Eigen::MatrixXd log_edge_weights(const WeightedGraph& g, std::span<const double> log_weight) {
  const auto n = static_cast<Eigen::Index>(g.n_vertices());
  Eigen::MatrixXd lw = Eigen::MatrixXd::Constant(n, n, -std::numeric_limits<double>::infinity());
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    const auto i = static_cast<Eigen::Index>(g.edge(e).u);
    const auto j = static_cast<Eigen::Index>(g.edge(e).v);
    lw(i, j) = lw(j, i) = log_weight[e];
  }
  return lw;
}

}  // namespace

void project_zero_sum(std::span<double> u) {
  if (u.empty()) return;
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
  for (double& x : u) x -= mean;
}

bool is_zero_sum(std::span<const double> u) {
  double sum = 0.0;
  double mass = 0.0;
  for (double x : u) {
    sum += x;
    mass += std::abs(x);
  }
  return std::abs(sum) <= kZeroSumTolerance * std::max(1.0, mass);
}

MeasureParams MeasureParams::rooted(WeightedGraph g, Vertex root) {
  if (root >= g.n_vertices()) throw InvalidArgument("root vertex out of range");
  return MeasureParams(RootedMeasure{std::move(g), root});
}

MeasureParams MeasureParams::pinned(PinnedGraph p) { return MeasureParams(PinnedMeasure{std::move(p)}); }

std::size_t MeasureParams::dimension() const { return graph().n_vertices(); }

const WeightedGraph& MeasureParams::graph() const {
  return is_rooted() ? as_rooted().graph : as_pinned().pinned.base();
}

double MeasureParams::log_density(std::span<const double> x) const {
  if (is_rooted()) return limit_log_density(as_rooted().graph, as_rooted().root, x);
  return sigma_log_density(as_pinned().pinned, x);
}

double h_functional(const WeightedGraph& g, std::span<const double> u) {
  check_size(u, g.n_vertices(), "h_functional");
  double h = 0.0;
  for (const auto& e : g.edges()) {
    const double s = std::sinh(0.5 * (u[e.u] - u[e.v]));
    h += e.weight * s * s;
  }
  return 2.0 * h;
}

double cosh_energy(const WeightedGraph& g, std::span<const double> t) {
  check_size(t, g.n_vertices(), "cosh_energy");
  double f = 0.0;
  for (const auto& e : g.edges()) f += e.weight * (std::cosh(t[e.u] - t[e.v]) - 1.0);
  return f;
}

double pinning_energy(std::span<const double> eps, std::span<const double> t) {
  check_size(t, eps.size(), "pinning_energy");
  double m = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) m += eps[i] * (std::cosh(t[i]) - 1.0);
  return m;
}

double log_tree_determinant(const WeightedGraph& g, std::span<const double> u, Vertex minor) {
  const std::size_t n = g.n_vertices();
  check_size(u, n, "log_tree_determinant");
  if (minor >= n) throw InvalidArgument("minor index out of range");
  for (double x : u) {
    if (!std::isfinite(x)) throw NumericalError("non-finite field value: " + describe(u));
  }
  std::vector<double> log_w(g.n_edges());
  for (EdgeId e = 0; e < g.n_edges(); ++e) log_w[e] = std::log(g.weight(e)) + u[g.edge(e).u] + u[g.edge(e).v];
  const double result = log_minor_subtraction_free(log_edge_weights(g, log_w),
                                                   std::vector<double>(n, -std::numeric_limits<double>::infinity()),
                                                   static_cast<Eigen::Index>(minor));
  if (!std::isfinite(result)) throw NumericalError("tree determinant is not finite at " + describe(u));
  return result;
}

double log_laplacian_minor(const WeightedGraph& g, std::span<const double> weights, Vertex minor) {
  if (minor >= g.n_vertices()) throw InvalidArgument("minor index out of range");
  if (weights.size() != g.n_edges()) throw InvalidArgument("weight vector size does not match edge count");
  std::vector<double> log_w(g.n_edges());
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    if (!(weights[e] > 0.0)) throw InvalidArgument("Laplacian weights must be positive");
    log_w[e] = std::log(weights[e]);
  }
  const double result = log_minor_subtraction_free(
      log_edge_weights(g, log_w), std::vector<double>(g.n_vertices(), -std::numeric_limits<double>::infinity()),
      static_cast<Eigen::Index>(minor));
  if (!std::isfinite(result)) throw NumericalError("Laplacian minor is not finite");
  return result;
}

double limit_log_density(const WeightedGraph& g, Vertex root, std::span<const double> u) {
  check_size(u, g.n_vertices(), "limit_log_density");
  if (root >= g.n_vertices()) throw InvalidArgument("root vertex out of range");
  if (!is_zero_sum(u)) throw InvalidArgument("limit density is defined on the zero-sum hyperplane");
  const double n = static_cast<double>(g.n_vertices());
  return u[root] - h_functional(g, u) + 0.5 * log_tree_determinant(g, u) - 0.5 * (n - 1.0) * kLog2Pi;
}

double sigma_log_density(const PinnedGraph& p, std::span<const double> t) {
  const auto& g = p.base();
  const std::size_t n = g.n_vertices();
  check_size(t, n, "sigma_log_density");
  for (double x : t) {
    if (!std::isfinite(x)) throw NumericalError("non-finite field value: " + describe(t));
  }
  const auto eps = p.eps();
  // A is the Laplacian of the extended graph, weights beta_ij exp(t_i + t_j)
  // and eps_i exp(t_i), with the pinning vertex removed.
  std::vector<double> log_w(g.n_edges());
  for (EdgeId e = 0; e < g.n_edges(); ++e) log_w[e] = std::log(g.weight(e)) + t[g.edge(e).u] + t[g.edge(e).v];
  std::vector<double> log_excess(n);
  double sum_t = 0.0;
  for (Vertex i = 0; i < n; ++i) {
    log_excess[i] = eps[i] > 0.0 ? std::log(eps[i]) + t[i] : -std::numeric_limits<double>::infinity();
    sum_t += t[i];
  }
  const double log_det_a = log_minor_subtraction_free(log_edge_weights(g, log_w), std::move(log_excess), -1);
  const double result = -sum_t - cosh_energy(g, t) - pinning_energy(eps, t) + 0.5 * log_det_a -
                        0.5 * static_cast<double>(n) * kLog2Pi;
  if (!std::isfinite(result)) throw NumericalError("sigma-model density is not finite at " + describe(t));
  return result;
}

double cd_log_constant(const WeightedGraph& a, Vertex root) {
  const std::size_t n = a.n_vertices();
  if (root >= n) throw InvalidArgument("root vertex out of range");
  std::vector<double> vertex_weight(n, 0.0);
  double total = 0.0;
  double log_gamma_edges = 0.0;
  for (const auto& e : a.edges()) {
    vertex_weight[e.u] += e.weight;
    vertex_weight[e.v] += e.weight;
    total += e.weight;
    log_gamma_edges += std::lgamma(e.weight);
  }
  double c = (1.0 - static_cast<double>(n) + total) * std::numbers::ln2 -
             0.5 * static_cast<double>(n - 1) * std::log(std::numbers::pi) - log_gamma_edges;
  for (Vertex i = 0; i < n; ++i) {
    c += i == root ? std::lgamma(0.5 * vertex_weight[i]) : std::lgamma(0.5 * (vertex_weight[i] + 1.0));
  }
  return c;
}

double cd_log_density(const WeightedGraph& a, Vertex root, EdgeId e0, std::span<const double> y) {
  const std::size_t n = a.n_vertices();
  check_size(y, a.n_edges(), "cd_log_density");
  if (root >= n) throw InvalidArgument("root vertex out of range");
  if (e0 >= a.n_edges()) throw InvalidArgument("reference edge out of range");
  if (std::abs(y[e0] - 1.0) > 1e-12) throw InvalidArgument("reference edge must carry y = 1");
  for (double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("normalized conductances must be positive");
  }
  std::vector<double> y_vertex(n, 0.0);
  std::vector<double> a_vertex(n, 0.0);
  double value = cd_log_constant(a, root);
  for (EdgeId e = 0; e < a.n_edges(); ++e) {
    const auto& edge = a.edge(e);
    y_vertex[edge.u] += y[e];
    y_vertex[edge.v] += y[e];
    a_vertex[edge.u] += edge.weight;
    a_vertex[edge.v] += edge.weight;
    // y_e^{a_e} from the mixing density, and 1/y_e converts the dy_e/y_e
    // reference measure to dy_e.
    value += edge.weight * std::log(y[e]);
    if (e != e0) value -= std::log(y[e]);
  }
  value += 0.5 * std::log(y_vertex[root]);
  for (Vertex i = 0; i < n; ++i) value -= 0.5 * (a_vertex[i] + 1.0) * std::log(y_vertex[i]);
  value += 0.5 * log_laplacian_minor(a, y);
  return value;
}

}  // namespace reinforce
