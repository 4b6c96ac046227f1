// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "reinforce/graph.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/parallel.hpp"
#include "reinforce/phase.hpp"
#include "reinforce/quadrature.hpp"
#include "reinforce/rng.hpp"
#include "reinforce/verify.hpp"

using namespace reinforce;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

Outcome from_report(const VerifyReport& r, const std::string& detail) {
  if (r.status == VerifyStatus::Error) return {false, "error: " + r.error};
  return {r.pass(), detail};
}

// Random connected graph: spanning path plus extra edges.
WeightedGraph random_graph(std::size_t n, Stream& rng) {
  std::vector<Edge> edges;
  for (Vertex i = 1; i < n; ++i) edges.push_back({rng.below(i), i, 0.1 + 3.0 * rng.uniform()});
  for (Vertex i = 0; i < n; ++i) {
    for (Vertex j = i + 1; j < n; ++j) {
      bool present = false;
      for (const auto& e : edges) present = present || (std::min(e.u, e.v) == i && std::max(e.u, e.v) == j);
      if (!present && rng.uniform() < 0.5) edges.push_back({i, j, 0.1 + 3.0 * rng.uniform()});
    }
  }
  return WeightedGraph(n, std::move(edges));
}

Outcome normalization() {
  double worst_limit = 0.0;
  for (double w : {0.25, 1.0, 4.0}) {
    const auto g = make_path(2, w);
    const auto r = integrate(
        [&](double s) {
          const std::vector<double> u{-0.5 * s, 0.5 * s};
          return std::exp(limit_log_density(g, 0, u));
        },
        -40.0, 40.0);
    worst_limit = std::max(worst_limit, std::abs(r.value - 1.0));
  }
  double worst_sigma = 0.0;
  for (double eps : {0.25, 1.0, 4.0}) {
    PinnedGraph p(WeightedGraph(1, {}), {eps});
    const auto r = integrate(
        [&](double t) {
          const std::vector<double> v{t};
          return std::exp(sigma_log_density(p, v));
        },
        -60.0, 60.0);
    worst_sigma = std::max(worst_sigma, std::abs(r.value - 1.0));
  }
  const auto cd = verify_suite("cd-normalization", json::object(), 0, 1);
  double worst_cd = 0.0;
  for (const auto& row : cd.statistics.value("results", json::array()))
    worst_cd = std::max(worst_cd, std::abs(row.at("mass").get<double>() - 1.0));
  const bool ok = worst_limit < 1e-8 && worst_sigma < 1e-8 && cd.pass() && worst_cd < 1e-6;
  return {ok, "max |mass-1|: limit " + fmt(worst_limit) + ", pinned vertex " + fmt(worst_sigma) + ", CD triangle " +
                  fmt(worst_cd)};
}

Outcome determinant_structure() {
  Stream rng(20240601, 0);
  double worst = 0.0;
  std::size_t graphs = 0;
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int draw = 0; draw < 100; ++draw, ++graphs) {
      const auto g = random_graph(n, rng);
      std::vector<double> u(n);
      for (auto& x : u) x = 4.0 * rng.uniform() - 2.0;
      project_zero_sum(u);
      double tree_sum = 0.0;
      for (const auto& tree : spanning_trees(g)) {
        double prod = 1.0;
        for (auto e : tree) prod *= g.weight(e) * std::exp(u[g.edge(e).u] + u[g.edge(e).v]);
        tree_sum += prod;
      }
      for (Vertex k = 0; k < n; ++k) {
        const double det = std::exp(log_tree_determinant(g, u, k));
        worst = std::max(worst, std::abs(det - tree_sum) / tree_sum);
      }
    }
  }
  return {worst < 1e-10, std::to_string(graphs) + " graphs, max relative gap " + fmt(worst)};
}

Outcome repeated_path_law(const std::string& suite, unsigned threads) {
  const auto r = verify_suite(suite, {{"repetitions", 100}, {"replicas", 1'000'000}}, 1, threads);
  const auto passes = r.statistics.value("passes", 0);
  return from_report(r, std::to_string(passes) + "/100 repetitions with p > 0.01");
}

Outcome limit_law(unsigned threads) {
  const auto r = verify_suite("density-vs-simulation", json::object(), 5, threads);
  std::string d;
  for (const auto& x : r.statistics.value("ks_distance", json::array())) d += (d.empty() ? "" : " ") + fmt(x.get<double>());
  return from_report(r, "horizon " + fmt(r.config.value("horizon", 0.0)) + ", KS distances " + d);
}

Outcome mixture(unsigned threads) {
  const auto r = verify_suite("mixture", json::object(), 6, threads);
  const auto& s = r.statistics;
  return from_report(r, "transitions " + std::to_string(s.value("transitions", 0)) + ", path p " +
                            fmt(s.value("path_p_value", 0.0)) + ", occupancy rel. error " +
                            fmt(s.value("occupancy_max_relative_error", 0.0)));
}

Outcome quadratic_variation(unsigned threads) {
  const auto r = verify_suite("martingale-qv", json::object(), 7, threads);
  const auto& s = r.statistics;
  return from_report(r, "horizon " + fmt(r.config.value("horizon", 0.0)) + ", variance " + fmt(s.value("variance", 0.0)) +
                            " vs " + fmt(s.value("expected", 0.0)) + ", fd error " + fmt(s.value("fd_max_error", 0.0)));
}

Outcome tree_marginal() {
  const auto r = verify_suite("inverse-gaussian", json::object(), 8, 1);
  return from_report(r, "KS p " + fmt(r.statistics.value("p_value", 0.0)));
}

Outcome constants() {
  double worst_beta = 0.0, worst_a = 0.0;
  for (int d = 2; d <= 5; ++d) {
    worst_beta = std::max(worst_beta, std::abs(bound_base_beta(d, beta_c(d)) - 1.0));
    worst_a = std::max(worst_a, std::abs(bound_base_gamma(d, a_c(d)) - 1.0));
  }
  bool monotone = true;
  double prev = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double beta = std::pow(10.0, -4.0 + 6.0 * k / 49.0);
    const double v = i_beta(beta);
    monotone = monotone && (k == 0 || v > prev);
    prev = v;
  }
  const bool infinite = std::isinf(beta_c(1)) && std::isinf(a_c(1));
  // Small-a limits: I_hat decreasing to 0 and J_hat approaching 1.
  bool limits = true;
  double prev_i = kInfinity;
  for (double a : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    const double ih = i_hat(a);
    limits = limits && ih < prev_i && ih > 0.0;
    prev_i = ih;
  }
  limits = limits && i_hat(1e-6) < 1e-4 && std::abs(j_hat(1e-6) - 1.0) < 1e-4;
  const bool ok = worst_beta < 1e-10 && worst_a < 1e-8 && monotone && infinite && limits;
  return {ok, "beta_c residual " + fmt(worst_beta) + ", a_c residual " + fmt(worst_a) + ", I_beta monotone " +
                  (monotone ? "yes" : "no") + ", I_hat(1e-6) " + fmt(i_hat(1e-6)) + ", J_hat(1e-6) " +
                  fmt(j_hat(1e-6))};
}

Outcome decay(unsigned threads) {
  DecayScanOptions o;
  o.d = 2;
  o.n = 3;
  o.beta = 0.2;
  o.seed = 10;
  o.threads = threads;
  const auto scan = decay_scan(o);
  bool below = true;
  std::string est;
  for (const auto& row : scan.rows) {
    below = below && row.estimate <= row.bound + 3.0 * row.stderr_estimate;
    est += (est.empty() ? "" : " ") + fmt(row.estimate) + "<=" + fmt(row.bound);
  }
  const double slope = fitted_log_slope(scan.rows);
  return {below && slope < 0.0, "estimates " + est + ", log-slope " + fmt(slope)};
}

Outcome resistance(unsigned threads) {
  ResistanceCheckOptions o;
  o.seed = 11;
  o.threads = threads;
  const auto r = resistance_bound_check(o);
  return {r.holds && r.flow_bound_violations == 0,
          "E[c0 R] " + fmt(r.lhs) + " +- " + fmt(r.lhs_stderr) + " vs " + fmt(r.rhs) + ", flow bound violations " +
              std::to_string(r.flow_bound_violations) + "/" + std::to_string(r.samples)};
}

}  // namespace

int main() {
  const unsigned threads = resolve_threads();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"normalization", normalization},
      {"determinant structure", determinant_structure},
      {"Rubin construction path law", [&] { return repeated_path_law("rubin", threads); }},
      {"Gamma coupling path law", [&] { return repeated_path_law("gamma-coupling", threads); }},
      {"limit law of centred local times", [&] { return limit_law(threads); }},
      {"mixture of the Z process", [&] { return mixture(threads); }},
      {"martingale quadratic variation", [&] { return quadratic_variation(threads); }},
      {"tree marginal is inverse Gaussian", tree_marginal},
      {"phase constants", constants},
      {"decay below the bound in d=2", [&] { return decay(threads); }},
      {"resistance bound in d=3", [&] { return resistance(threads); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failures;
    std::printf("criterion %zu %s: %s (%s; %.1fs)\n", i + 1, out.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
