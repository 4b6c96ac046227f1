#include "reinforce/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "reinforce/error.hpp"

namespace reinforce {

std::size_t PathLaw::index_of(const Path& path) const {
  const auto it = lookup_.find(path);
  return it == lookup_.end() ? paths.size() : it->second;
}

double PathLaw::total() const { return std::accumulate(probabilities.begin(), probabilities.end(), 0.0); }

double errw_path_prob(const WeightedGraph& a, std::span<const Vertex> path) {
  if (path.empty()) throw InvalidArgument("path must contain at least the start vertex");
  if (path.size() > kMaxOraclePathLength + 1) throw SizeError("oracle paths are limited to 8 steps");
  for (Vertex v : path) {
    if (v >= a.n_vertices()) throw InvalidArgument("path vertex out of range");
  }
  // crossings[{i,j}] for i < j, looked up by scanning the incidence list.
  std::map<std::pair<Vertex, Vertex>, double> crossings;
  auto weight_of = [&](Vertex i, Vertex j) {
    const auto key = std::minmax(i, j);
    const auto it = crossings.find(key);
    double w = 0.0;
    for (const auto& inc : a.neighbors(i)) {
      if (inc.neighbor == j) w = a.weight(inc.edge);
    }
    return w + (it == crossings.end() ? 0.0 : it->second);
  };
  double prob = 1.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Vertex here = path[k];
    const Vertex next = path[k + 1];
    bool adjacent = false;
    double total = 0.0;
    for (const auto& inc : a.neighbors(here)) {
      total += weight_of(here, inc.neighbor);
      adjacent = adjacent || inc.neighbor == next;
    }
    if (!adjacent) throw InvalidArgument("path steps between non-adjacent vertices");
    prob *= weight_of(here, next) / total;
    crossings[std::minmax(here, next)] += 1.0;
  }
  return prob;
}

PathLaw enumerate_path_law(const WeightedGraph& a, Vertex start, std::size_t n, std::size_t max_paths) {
  if (start >= a.n_vertices()) throw InvalidArgument("start vertex out of range");
  if (n > kMaxOraclePathLength) throw SizeError("oracle paths are limited to 8 steps");
  PathLaw law;
  Path current{start};
  // Depth-first walk over all continuations.
  std::function<void()> extend = [&] {
    if (current.size() == n + 1) {
      if (law.paths.size() >= max_paths) throw CapacityError("path enumeration exceeds its budget");
      law.lookup_.emplace(current, law.paths.size());
      law.paths.push_back(current);
      law.probabilities.push_back(errw_path_prob(a, current));
      return;
    }
    std::vector<Vertex> next;
    for (const auto& inc : a.neighbors(current.back())) next.push_back(inc.neighbor);
    std::sort(next.begin(), next.end());
    for (Vertex v : next) {
      current.push_back(v);
      extend();
      current.pop_back();
    }
  };
  extend();
  return law;
}

double chi_square_sf(double statistic, double dof) {
  if (dof <= 0) throw InvalidArgument("chi-square needs positive degrees of freedom");
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

namespace {

// Groups cell indices so that every group has weight >= 5. Small cells
// are pooled together; a pool still below 5 joins the smallest kept cell.
std::vector<std::vector<std::size_t>> pool_cells(std::span<const double> expected) {
  std::vector<std::size_t> order(expected.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return expected[i] < expected[j]; });
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> pool;
  double pool_mass = 0.0;
  for (auto i : order) {
    if (expected[i] < 5.0) {
      pool.push_back(i);
      pool_mass += expected[i];
    } else {
      groups.push_back({i});
    }
  }
  if (!pool.empty()) {
    if (pool_mass >= 5.0) {
      groups.insert(groups.begin(), pool);
    } else if (!groups.empty()) {
      groups.front().insert(groups.front().end(), pool.begin(), pool.end());
    } else {
      groups.push_back(pool);
    }
  }
  return groups;
}

}  // namespace

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_prob) {
  if (observed.size() != expected_prob.size() || observed.empty()) {
    throw InvalidArgument("observed and expected must be nonempty and the same size");
  }
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double mass = std::accumulate(expected_prob.begin(), expected_prob.end(), 0.0);
  std::vector<double> expected(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) expected[i] = n * expected_prob[i] / mass;
  const auto groups = pool_cells(expected);
  if (groups.size() < 2) throw InvalidArgument("all cells pooled: too few expected counts for a chi-square test");
  double stat = 0.0;
  for (const auto& group : groups) {
    double o = 0.0, e = 0.0;
    for (auto i : group) {
      o += observed[i];
      e += expected[i];
    }
    stat += (o - e) * (o - e) / e;
  }
  const std::size_t dof = groups.size() - 1;
  return {stat, dof, chi_square_sf(stat, static_cast<double>(dof)), groups.size()};
}

ChiSquareResult chi_square_homogeneity(std::span<const double> counts_a, std::span<const double> counts_b) {
  if (counts_a.size() != counts_b.size() || counts_a.empty()) {
    throw InvalidArgument("count vectors must be nonempty and the same size");
  }
  const double na = std::accumulate(counts_a.begin(), counts_a.end(), 0.0);
  const double nb = std::accumulate(counts_b.begin(), counts_b.end(), 0.0);
  if (na <= 0.0 || nb <= 0.0) throw InvalidArgument("both samples must be nonempty");
  // Pool on the smaller expected count of each cell.
  std::vector<double> smaller(counts_a.size());
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    const double total = counts_a[i] + counts_b[i];
    smaller[i] = std::min(na, nb) * total / (na + nb);
  }
  const auto groups = pool_cells(smaller);
  if (groups.size() < 2) throw InvalidArgument("all cells pooled: too few counts for a chi-square test");
  double stat = 0.0;
  for (const auto& group : groups) {
    double a = 0.0, b = 0.0;
    for (auto i : group) {
      a += counts_a[i];
      b += counts_b[i];
    }
    const double ea = na * (a + b) / (na + nb);
    const double eb = nb * (a + b) / (na + nb);
    stat += (a - ea) * (a - ea) / ea + (b - eb) * (b - eb) / eb;
  }
  const std::size_t dof = groups.size() - 1;
  return {stat, dof, chi_square_sf(stat, static_cast<double>(dof)), groups.size()};
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p_value(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_sf((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) throw InvalidArgument("KS samples must be nonempty");
  std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw InvalidArgument("KS sample must be nonempty");
  std::vector<double> a(xs.begin(), xs.end());
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return {d, ks_p_value(d, n)};
}

double inverse_gaussian_cdf(double x, double mu, double shape) {
  if (!(mu > 0.0) || !(shape > 0.0)) throw InvalidArgument("inverse Gaussian parameters must be positive");
  if (x <= 0.0) return 0.0;
  const boost::math::normal std_normal;
  const double r = std::sqrt(shape / x);
  const double first = boost::math::cdf(std_normal, r * (x / mu - 1.0));
  // e^{2 shape/mu} Phi(-r (x/mu + 1)) evaluated in logs.
  const double tail = boost::math::cdf(boost::math::complement(std_normal, r * (x / mu + 1.0)));
  const double second = tail > 0.0 ? std::exp(2.0 * shape / mu + std::log(tail)) : 0.0;
  return std::clamp(first + second, 0.0, 1.0);
}

InverseGaussianFit fit_inverse_gaussian(std::span<const double> xs) {
  const auto s = summarize(xs);
  if (!(s.mean > 0.0) || !(s.variance > 0.0)) throw InvalidArgument("inverse Gaussian fit needs positive data with spread");
  return {s.mean, s.mean * s.mean * s.mean / s.variance};
}

Summary summarize(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("cannot summarize an empty sample");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, var, std::sqrt(var / n), xs.size()};
}

}  // namespace reinforce
