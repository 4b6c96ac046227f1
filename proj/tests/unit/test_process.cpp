#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "reinforce/error.hpp"
#include "reinforce/process.hpp"

using namespace reinforce;

namespace {

// One-sample KS statistic against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

// Critical value at level 0.01 for large n.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("ERRW transition probabilities") {
  WeightedGraph path(3, {{0, 1, 1.0}, {1, 2, 2.0}});
  auto s = ProcessState::fresh(path, ProcessKind::Errw, 1);
  CHECK(propose_errw(path, s, 0.3333).target == 0);
  CHECK(propose_errw(path, s, 0.3334).target == 2);

  const auto unit = make_path(3);
  auto t = ProcessState::fresh(unit, ProcessKind::Errw, 0);
  apply_move(t, propose_errw(unit, t, 0.5));
  REQUIRE(t.current == 1);
  CHECK(t.edge_count[0] == 2.0);
  CHECK(propose_errw(unit, t, 0.6666).target == 0);
  CHECK(propose_errw(unit, t, 0.6667).target == 2);

  const auto tri = make_complete(3);
  auto f = ProcessState::fresh(tri, ProcessKind::Errw, 0);
  CHECK(propose_errw(tri, f, 0.4999).target == 1);
  CHECK(propose_errw(tri, f, 0.5001).target == 2);
}

TEST_CASE("ERRW edge mass and empirical frequencies") {
  WeightedGraph path(3, {{0, 1, 1.0}, {1, 2, 2.0}});
  Stream rng(1, 0);
  int to_zero = 0;
  const int n = 60000;
  ProcessState s;
  for (int i = 0; i < n; ++i) {
    s.reset(path, ProcessKind::Errw, 1);
    if (errw_step(path, s, rng) == 0) ++to_zero;
  }
  CHECK(std::abs(to_zero / double(n) - 1.0 / 3.0) < 5.0 * std::sqrt(2.0 / 9.0 / n));

  const auto g = make_complete(4, 0.7);
  auto w = ProcessState::fresh(g, ProcessKind::Errw, 0);
  for (int k = 0; k < 500; ++k) {
    const Vertex from = w.current;
    const Vertex to = errw_step(g, w, rng);
    CHECK(g.find_edge(from, to).has_value());
  }
  CHECK(sum(w.edge_count) == doctest::Approx(6 * 0.7 + 500).epsilon(1e-14));
  CHECK(sum(w.local_time) == doctest::Approx(w.clock).epsilon(1e-14));
}

TEST_CASE("Rubin walk: first jump on a single edge is Exp(1)") {
  const auto g = make_path(2);
  Stream rng(2, 0);
  auto tl = EdgeTimelines::direct(g);
  ProcessState s;
  std::vector<double> times;
  for (int i = 0; i < 20000; ++i) {
    s.reset(g, ProcessKind::ContinuousErrw, 0);
    tl.reset();
    times.push_back(continuous_errw_step(g, s, tl, rng).time);
  }
  CHECK(ks_statistic(times, [](double x) { return 1.0 - std::exp(-x); }) < ks_critical(times.size()));
}

TEST_CASE("Rubin walk crosses the edge with the smallest residual gap") {
  const auto g = make_path(3);
  Stream rng(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto tl = EdgeTimelines::direct(g);
    auto s = ProcessState::fresh(g, ProcessKind::ContinuousErrw, 1);
    const double g0 = tl.alarm(0, 0, rng);
    const double g1 = tl.alarm(1, 0, rng);
    const auto ev = continuous_errw_step(g, s, tl, rng);
    CHECK(ev.vertex == (g0 < g1 ? 0u : 2u));
    CHECK(ev.time == std::min(g0, g1));
  }
}

TEST_CASE("Rubin walk clocks stay consistent") {
  const auto g = make_complete(4);
  Stream rng(4, 0);
  auto tl = EdgeTimelines::direct(g);
  auto s = ProcessState::fresh(g, ProcessKind::ContinuousErrw, 0);
  double last = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const auto ev = continuous_errw_step(g, s, tl, rng);
    CHECK(ev.time >= last);
    last = ev.time;
  }
  CHECK(std::abs(sum(s.local_time) - s.clock) <= 1e-9 * s.clock);
  for (EdgeId e = 0; e < g.n_edges(); ++e) {
    const double expect = s.local_time[g.edge(e).u] + s.local_time[g.edge(e).v];
    CHECK(std::abs(tl.edge_clock(e) - expect) <= 1e-9 * std::max(1.0, expect));
    CHECK(tl.consumed(e) + 1.0 == doctest::Approx(s.edge_count[e]));
    const auto alarms = tl.generated(e);
    for (std::size_t k = 1; k < alarms.size(); ++k) CHECK(alarms[k] > alarms[k - 1]);
  }
}

TEST_CASE("Gamma coupling, conditional construction") {
  const double a = 1.7;
  const auto g = make_path(2, a);
  Stream rng(5, 0);
  std::vector<double> first;
  double mw = 0, mw2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto c = sample_gamma_coupling(g, rng, TimelineConstruction::Conditional);
    first.push_back(c.timelines.alarm(0, 0, rng));
    mw += c.mixing[0];
    mw2 += c.mixing[0] * c.mixing[0];
  }
  CHECK(ks_statistic(first, [a](double x) { return 1.0 - std::exp(-a * x); }) < ks_critical(first.size()));
  mw /= n;
  const double var = mw2 / n - mw * mw;
  CHECK(std::abs(mw - a) < 5.0 * std::sqrt(a / n));
  CHECK(std::abs(var - a) < 0.1 * a);
}

TEST_CASE("conditional alarms arrive at rate W e^t") {
  // Given W, the count of alarms in [0, t] is Poisson with mean W (e^t - 1).
  const auto g = make_path(2);
  const double w = 0.8, t = 1.5;
  Stream rng(6, 0);
  auto tl = EdgeTimelines::conditional(g, {w});
  double m = 0, m2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    tl.reset();
    const double k = static_cast<double>(tl.count_until(0, t, rng));
    m += k;
    m2 += k * k;
  }
  m /= n;
  const double mean = w * std::expm1(t);
  CHECK(std::abs(m - mean) < 5.0 * std::sqrt(mean / n));
  CHECK(std::abs(m2 / n - m * m - mean) < 0.05 * mean);
}

TEST_CASE("Gamma coupling, direct Yule construction") {
  const double a = 2.0;
  const auto g = make_path(2, a);
  Stream rng(7, 0);
  double m = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) m += sample_gamma_coupling(g, rng, TimelineConstruction::Direct, 9.0).mixing[0];
  m /= n;
  CHECK(std::abs(m - a) < 5.0 * std::sqrt(a / n) + 0.01);
}

TEST_CASE("VRJP rates") {
  const auto two = make_path(2);
  auto s = ProcessState::fresh(two, ProcessKind::Vrjp, 0);
  CHECK(propose_vrjp(two, s, 0.7, 0.5).sojourn == 0.7);
  s.local_time[1] = 2.5;
  CHECK(propose_vrjp(two, s, 0.7, 0.5).sojourn == doctest::Approx(0.7 / 3.5));
  const auto tri = make_complete(3);
  auto t = ProcessState::fresh(tri, ProcessKind::Vrjp, 0);
  CHECK(propose_vrjp(tri, t, 1.0, 0.3).sojourn == 0.5);
  CHECK(propose_vrjp(tri, t, 1.0, 0.3).target == 1);
  CHECK(propose_vrjp(tri, t, 1.0, 0.7).target == 2);
}

TEST_CASE("X process sojourn inversion") {
  const auto two = make_path(2);
  auto s = ProcessState::fresh(two, ProcessKind::X, 0);
  for (double e : {0.01, 0.5, 3.0}) CHECK(propose_x(two, s, e, 0.5).sojourn == doctest::Approx(std::log1p(e)));
  const auto tri = make_complete(3);
  auto t = ProcessState::fresh(tri, ProcessKind::X, 0);
  CHECK(propose_x(tri, t, 1.0, 0.49).target == 1);
  CHECK(propose_x(tri, t, 1.0, 0.51).target == 2);
  Stream rng(8, 0);
  std::vector<double> taus;
  for (int i = 0; i < 20000; ++i) {
    auto f = ProcessState::fresh(tri, ProcessKind::X, 0);
    taus.push_back(x_process_step(tri, f, rng).sojourn);
  }
  const double c = 2.0;
  CHECK(ks_statistic(taus, [c](double x) { return 1.0 - std::exp(-c * std::expm1(x)); }) < ks_critical(taus.size()));
}

TEST_CASE("X is the VRJP in the A clock, pathwise") {
  WeightedGraph g(4, {{0, 1, 1.0}, {1, 2, 0.5}, {2, 3, 2.0}, {0, 3, 1.2}, {0, 2, 0.7}});
  Stream rng(9, 0);
  auto y = ProcessState::fresh(g, ProcessKind::Vrjp, 0);
  auto x = ProcessState::fresh(g, ProcessKind::X, 0);
  for (int k = 0; k < 300; ++k) {
    const double e = rng.exponential();
    const double u = rng.uniform();
    const Move my = propose_vrjp(g, y, e, u);
    const Move mx = propose_x(g, x, e, u);
    REQUIRE(my.target == mx.target);
    apply_move(y, my);
    apply_move(x, mx);
    for (Vertex i = 0; i < 4; ++i) CHECK(x.local_time[i] == doctest::Approx(std::log1p(y.local_time[i])).epsilon(1e-9));
    CHECK(x.clock == doctest::Approx(time_change(TimeChange::A, y.local_time)).epsilon(1e-9));
    CHECK(y.clock == doctest::Approx(time_change(TimeChange::AInv, x.local_time)).epsilon(1e-9));
  }
}

TEST_CASE("X overflow guard") {
  const auto tri = make_complete(3);
  RunOptions opts;
  opts.kind = ProcessKind::X;
  opts.horizon = 100.0;
  opts.overflow_bound = 3.0;
  opts.seed = 1;
  const auto traj = run_until(tri, opts);
  CHECK(traj.aborted);
  CHECK(traj.incomplete);
  CHECK(traj.diagnostic.find("overflow") != std::string::npos);
}

TEST_CASE("Z process rates and detailed balance") {
  const auto two = make_path(2);
  const std::vector<double> zero{0.0, 0.0};
  auto s = ProcessState::fresh(two, ProcessKind::Z, 0);
  CHECK(propose_z(two, zero, s, 1.0, 0.5).sojourn == 2.0);
  WeightedGraph g(3, {{0, 1, 1.3}, {1, 2, 0.4}, {0, 2, 2.2}});
  const std::vector<double> u{0.3, -0.9, 0.6};
  for (const auto& e : g.edges()) {
    const double lhs = std::exp(2 * u[e.u]) * 0.5 * e.weight * std::exp(u[e.v] - u[e.u]);
    const double rhs = std::exp(2 * u[e.v]) * 0.5 * e.weight * std::exp(u[e.u] - u[e.v]);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
  }
}

TEST_CASE("Z occupation converges to exp(2U) weights") {
  const auto tri = make_complete(3);
  const std::vector<double> u{0.4, -0.3, -0.1};
  RunOptions opts;
  opts.kind = ProcessKind::Z;
  opts.field = u;
  opts.max_steps = 10'000'000;
  opts.seed = 10;
  opts.record_jumps = false;
  const auto traj = run_until(tri, opts);
  double z = 0;
  for (double x : u) z += std::exp(2 * x);
  for (Vertex i = 0; i < 3; ++i) {
    const double frac = traj.final_state.local_time[i] / traj.final_state.clock;
    CHECK(std::abs(frac / (std::exp(2 * u[i]) / z) - 1.0) < 0.01);
  }
}

TEST_CASE("time changes") {
  const std::vector<double> zero(4, 0.0);
  for (auto k : {TimeChange::A, TimeChange::AInv, TimeChange::B, TimeChange::C, TimeChange::D})
    CHECK(time_change(k, zero) == 0.0);
  const std::vector<double> t{1.0, 0.0, 0.0};
  CHECK(time_change(TimeChange::AInv, t) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
  Stream rng(11, 0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> l(5);
    for (auto& x : l) x = 10.0 * rng.uniform();
    std::vector<double> a(5);
    for (std::size_t i = 0; i < 5; ++i) a[i] = std::log1p(l[i]);
    CHECK(time_change(TimeChange::C, a) == doctest::Approx(time_change(TimeChange::D, l)).epsilon(1e-12));
  }
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(time_change(TimeChange::A, neg), InvalidArgument);
}

TEST_CASE("run_until basics") {
  const auto tri = make_complete(3);
  RunOptions opts;
  opts.kind = ProcessKind::Vrjp;
  opts.max_steps = 0;
  auto empty = run_until(tri, opts);
  CHECK(empty.jumps.empty());
  CHECK(empty.final_state.current == 0);
  CHECK(empty.final_state.clock == 0.0);

  opts.max_steps = 200;
  opts.seed = 77;
  const auto a = run_until(tri, opts);
  const auto b = run_until(tri, opts);
  REQUIRE(a.jumps.size() == 200);
  for (std::size_t i = 0; i < a.jumps.size(); ++i) {
    CHECK(a.jumps[i].time == b.jumps[i].time);
    CHECK(a.jumps[i].to == b.jumps[i].to);
    if (i > 0) {
      CHECK(a.jumps[i].time > a.jumps[i - 1].time);
      CHECK(a.jumps[i].from == a.jumps[i - 1].to);
    }
  }

  opts.horizon = 1e9;
  opts.max_steps = 10;
  CHECK(run_until(tri, opts).incomplete);

  RunOptions none;
  CHECK_THROWS_AS(run_until(tri, none), InvalidArgument);
}

TEST_CASE("checkpoints and exports") {
  const auto tri = make_complete(3);
  RunOptions opts;
  opts.kind = ProcessKind::X;
  opts.horizon = 3.0;
  opts.checkpoints = {0.0, 0.5, 1.0, 2.0, 3.0};
  opts.seed = 3;
  const auto traj = run_until(tri, opts);
  REQUIRE(traj.checkpoints.size() == 5);
  CHECK_FALSE(traj.incomplete);
  for (const auto& c : traj.checkpoints) {
    CHECK(sum(c.local_time) == doctest::Approx(c.time).epsilon(1e-12));
    CHECK(std::abs(sum(c.centred)) < 1e-12);
    for (Vertex i = 0; i < 3; ++i) CHECK(c.centred[i] == doctest::Approx(c.local_time[i] - c.time / 3.0));
  }
  CHECK(traj.final_state.clock == 3.0);
  std::ostringstream jl, csv;
  write_jumps_jsonl(jl, traj);
  write_checkpoints_csv(csv, traj);
  CHECK(jl.str().rfind("{\"t\":", 0) == 0);
  CHECK(csv.str().rfind("t,T_0,T_1,T_2\n", 0) == 0);
}

TEST_CASE("centred X occupation settles on the triangle") {
  const auto tri = make_complete(3);
  const double horizon = 20.0;
  std::vector<double> checkpoints;
  for (int k = 0; k <= 200; ++k) checkpoints.push_back(0.1 * k);
  int settled = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    RunOptions opts;
    opts.kind = ProcessKind::X;
    opts.horizon = horizon;
    opts.checkpoints = checkpoints;
    opts.seed = 2025;
    opts.stream = rep;
    opts.record_jumps = false;
    const auto traj = run_until(tri, opts);
    REQUIRE_FALSE(traj.incomplete);
    double worst = 0.0;
    for (Vertex i = 0; i < 3; ++i) {
      double lo = 1e300, hi = -1e300;
      for (const auto& c : traj.checkpoints) {
        if (c.time < 0.9 * horizon) continue;
        lo = std::min(lo, c.centred[i]);
        hi = std::max(hi, c.centred[i]);
      }
      worst = std::max(worst, hi - lo);
    }
    if (worst < 0.05) ++settled;
  }
  CHECK(settled >= 95);
}
