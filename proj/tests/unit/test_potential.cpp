#include <cmath>
#include <random>

#include "doctest.h"
#include "reinforce/error.hpp"
#include "reinforce/potential.hpp"
#include "reinforce/stats.hpp"

using namespace reinforce;

namespace {

WeightedGraph random_connected(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> weight(0.3, 3.0);
  std::bernoulli_distribution extra(0.5);
  std::vector<Edge> edges;
  for (Vertex v = 1; v < n; ++v) edges.push_back({std::uniform_int_distribution<Vertex>(0, v - 1)(gen), v, weight(gen)});
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v) {
      const bool present = std::any_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.u == u && e.v == v; });
      if (!present && extra(gen)) edges.push_back({u, v, weight(gen)});
    }
  return WeightedGraph(n, edges);
}

std::vector<double> random_field(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> t(n);
  for (auto& x : t) x = d(gen);
  return t;
}

Trajectory x_run(const WeightedGraph& g, double horizon, std::uint64_t seed, std::uint64_t stream) {
  RunOptions o;
  o.kind = ProcessKind::X;
  o.horizon = horizon;
  o.seed = seed;
  o.stream = stream;
  return run_until(g, o);
}

}  // namespace

TEST_CASE("two-vertex Q in closed form") {
  const double W = 1.7;
  const auto g = make_path(2, W);
  const std::vector<double> T = {0.3, -0.8};
  const double w = W * std::exp(T[0] + T[1]);
  const auto q = solve_q(g, T).values;
  CHECK(q(0, 0) == doctest::Approx(-1 / (4 * w)).epsilon(1e-12));
  CHECK(q(0, 1) == doctest::Approx(1 / (4 * w)).epsilon(1e-12));
  CHECK(q(1, 1) == doctest::Approx(-1 / (4 * w)).epsilon(1e-12));
  const auto dq = q_derivative(g, T, q, 0);
  CHECK(dq(0, 0) == doctest::Approx(1 / (4 * w)).epsilon(1e-12));
}

TEST_CASE("Q solves the Poisson equation and is negative semidefinite") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rep % 6;
    const auto g = random_connected(gen, n);
    const auto T = rep % 2 ? random_field(gen, n) : std::vector<double>(n, 0.0);
    const auto q = solve_q(g, T);
    const auto l = generator(g, T);
    const Eigen::MatrixXd target =
        Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    CHECK((l * q.values - target).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((q.values * l - target).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(q_invariant_violation(q.values) < 1e-10);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.values);
    CHECK(eig.eigenvalues().maxCoeff() < 1e-12);
    CHECK(q.spectral_gap > 0.0);
  }
}

TEST_CASE("vanishing spectral gap is reported as disconnection") {
  const WeightedGraph g(3, {{0, 1, 1.0}, {1, 2, 1e-20}});
  const std::vector<double> T(3, 0.0);
  CHECK_THROWS_AS(solve_q(g, T), NumericalError);
  try {
    solve_q(g, T);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("disconnected") != std::string::npos);
  }
}

TEST_CASE("derivative of Q matches central finite differences") {
  std::mt19937_64 gen(17);
  const double step = 1e-5;
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 2 + rep % 5;
    const auto g = random_connected(gen, n);
    const auto T = random_field(gen, n);
    const auto q = solve_q(g, T).values;
    for (Vertex i = 0; i < n; ++i) {
      auto plus = T, minus = T;
      plus[i] += step;
      minus[i] -= step;
      const Eigen::MatrixXd fd = (solve_q(g, plus).values - solve_q(g, minus).values) / (2 * step);
      const auto dq = q_derivative(g, T, q, i);
      CHECK((fd - dq).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(dq.diagonal().minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("evolved Q tracks the direct solve on the triangle") {
  const auto g = make_complete(3);
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const auto traj = x_run(g, 4.0, 21, rep);
    MartingaleOptions o;
    o.target = rep % 3;
    const auto d = martingale_diagnostics(g, traj, o);
    CHECK(d.max_residual < 1e-6);
    CHECK(d.ode_step == 1e-3);
    CHECK(d.q_diagonal_end >= d.q_diagonal_start);
    CHECK(d.series.size() == 1);
    CHECK(d.series.back().time == traj.final_state.clock);
  }
}

TEST_CASE("martingale reconstruction agrees with direct Q evaluations") {
  const auto g = make_complete(4, 0.7);
  const auto traj = x_run(g, 3.0, 8, 1);
  MartingaleOptions o;
  o.target = 2;
  const auto d = martingale_diagnostics(g, traj, o);
  // Direct: integral term telescopes within each sojourn.
  const std::size_t n = g.n_vertices();
  std::vector<double> T(n, 0.0);
  const double q0 = solve_q(g, T).values(static_cast<Eigen::Index>(traj.start), 2);
  double drift = 0.0, t = 0.0;
  Vertex at = traj.start;
  auto advance = [&](double until) {
    const double before = solve_q(g, T).values(static_cast<Eigen::Index>(at), 2);
    T[at] += until - t;
    drift += solve_q(g, T).values(static_cast<Eigen::Index>(at), 2) - before;
    t = until;
  };
  for (const auto& j : traj.jumps) {
    advance(j.time);
    at = j.to;
  }
  advance(traj.final_state.clock);
  const double m = T[2] - t / static_cast<double>(n) - solve_q(g, T).values(static_cast<Eigen::Index>(at), 2) + q0 + drift;
  CHECK(d.series.back().value == doctest::Approx(m).epsilon(1e-6));
  CHECK(T[2] == doctest::Approx(traj.final_state.local_time[2]).epsilon(1e-12));
}

TEST_CASE("martingale has mean zero and the predicted variance on two vertices") {
  const auto g = make_path(2, 1.0);
  const double horizon = 5.0;
  const std::size_t replicas = 4'000;
  std::vector<double> checkpoints = {1.0, 2.0, 3.0, 4.0};
  std::vector<std::vector<double>> at(checkpoints.size() + 1);
  for (std::size_t r = 0; r < replicas; ++r) {
    const auto traj = x_run(g, horizon, 99, r);
    MartingaleOptions o;
    o.target = 0;
    o.checkpoints = checkpoints;
    const auto d = martingale_diagnostics(g, traj, o);
    REQUIRE(d.series.size() == at.size());
    for (std::size_t k = 0; k < at.size(); ++k) at[k].push_back(d.series[k].value);
  }
  for (const auto& xs : at) {
    const auto s = summarize(xs);
    CHECK(std::abs(s.mean) < 2.5 * s.stderr_mean);
  }
  // Predicted variance Q(T(t))_00 - Q(0)_00 with Q_00 = -e^{-t}/4.
  const auto s = summarize(at.back());
  const double predicted = 0.25 * (1 - std::exp(-horizon));
  CHECK(s.variance == doctest::Approx(predicted).epsilon(0.06));
}

TEST_CASE("martingale diagnostics reject other processes") {
  const auto g = make_path(2);
  RunOptions o;
  o.kind = ProcessKind::Vrjp;
  o.horizon = 1.0;
  const auto traj = run_until(g, o);
  CHECK_THROWS_AS(martingale_diagnostics(g, traj, {}), InvalidArgument);
}
