#include "reinforce/verify.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "reinforce/error.hpp"
#include "reinforce/graph_io.hpp"
#include "reinforce/mcmc.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/parallel.hpp"
#include "reinforce/potential.hpp"
#include "reinforce/process.hpp"
#include "reinforce/quadrature.hpp"
#include "reinforce/stats.hpp"

namespace reinforce {

using nlohmann::json;

std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::Rubin: return "rubin";
    case Suite::GammaCoupling: return "gamma-coupling";
    case Suite::Mixture: return "mixture";
    case Suite::InverseGaussian: return "inverse-gaussian";
    case Suite::MartingaleQv: return "martingale-qv";
    case Suite::CdNormalization: return "cd-normalization";
    case Suite::DensityVsSimulation: return "density-vs-simulation";
  }
  return "?";
}

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> suites = {Suite::Rubin,           Suite::GammaCoupling,   Suite::Mixture,
                                            Suite::InverseGaussian, Suite::MartingaleQv,    Suite::CdNormalization,
                                            Suite::DensityVsSimulation};
  return suites;
}

Suite parse_suite(std::string_view name) {
  for (Suite s : all_suites())
    if (to_string(s) == name) return s;
  throw ConfigError("unknown verify suite '" + std::string(name) + "'");
}

std::string_view to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::Pass: return "pass";
    case VerifyStatus::Reject: return "reject";
    case VerifyStatus::Error: return "error";
  }
  return "?";
}

json default_config(Suite s) {
  switch (s) {
    case Suite::Rubin:
      return {{"graph", nullptr}, {"start", 0},       {"steps", 4},          {"replicas", 1'000'000},
              {"repetitions", 1}, {"alpha", 0.01},    {"min_pass_fraction", 0.95}};
    case Suite::GammaCoupling:
      return {{"graph", nullptr}, {"start", 0},       {"steps", 4},          {"replicas", 1'000'000},
              {"repetitions", 1}, {"alpha", 0.01},    {"min_pass_fraction", 0.95}};
    case Suite::Mixture:
      return {{"graph", nullptr},           {"start", 0},        {"steps", 4},
              {"replicas", 25'000},         {"alpha", 0.01},     {"occupancy_events", 10'000'000},
              {"occupancy_tolerance", 0.01}, {"burn_in", 10'000}};
    case Suite::InverseGaussian:
      return {{"W", 1.0}, {"samples", 10'000}, {"alpha", 0.01}, {"autocorrelation_target", 0.05}};
    case Suite::MartingaleQv:
      return {{"W", 1.0},
              {"horizon", 8.0},
              {"replicas", 100'000},
              {"target", 0},
              {"ode_step", 1e-3},
              {"checkpoints", {1.0, 2.0, 4.0, 6.0}},
              {"relative_tolerance", 0.05},
              {"fd_step", 1e-5},
              {"fd_tolerance", 1e-6},
              {"fd_trials", 20}};
    case Suite::CdNormalization:
      return {{"a", {0.5, 1.0}}, {"root", 0}, {"window", 120.0}, {"tolerance", 1e-6}};
    case Suite::DensityVsSimulation:
      return {{"graph", nullptr}, {"start", 0}, {"horizon", 15.0}, {"replicas", 10'000},
              {"samples", 10'000}, {"ks_threshold", 0.05}};
  }
  return json::object();
}

namespace {

bool same_kind(const json& def, const json& value) {
  if (def.is_null()) return true;
  if (def.is_number()) return value.is_number();
  return def.type() == value.type();
}

json merge_config(Suite s, const json& overrides) {
  json cfg = default_config(s);
  if (overrides.is_null()) return cfg;
  if (!overrides.is_object()) throw ConfigError("verify config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!cfg.contains(key))
      throw ConfigError("unknown key '" + key + "' for suite " + std::string(to_string(s)));
    if (!same_kind(cfg[key], value)) throw ConfigError("key '" + key + "' has the wrong type");
    cfg[key] = value;
  }
  return cfg;
}

WeightedGraph graph_from(const json& cfg) {
  const auto& g = cfg.at("graph");
  if (g.is_null()) return make_complete(3, 1.0);
  if (g.is_string()) return parse_graph(lattice_shorthand(g.get<std::string>())).graph;
  return parse_graph(g).graph;
}

std::size_t count_of(const json& cfg, const char* key) {
  const auto v = cfg.at(key).get<double>();
  if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(std::string(key) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

// Path -> position in a PathLaw, keyed by base-N digits.
class PathIndex {
 public:
  PathIndex(const PathLaw& law, std::size_t n_vertices) : base_(n_vertices) {
    for (std::size_t i = 0; i < law.size(); ++i) {
      std::uint64_t k = 0;
      for (Vertex v : law.paths[i]) k = extend(k, v);
      index_.emplace(k, i);
    }
  }
  std::uint64_t extend(std::uint64_t key, Vertex v) const { return key * base_ + v; }
  std::size_t at(std::uint64_t key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) throw InvariantViolation("simulated path is missing from the exact law");
    return it->second;
  }

 private:
  std::uint64_t base_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

using PathSampler = std::function<std::uint64_t(Stream&)>;

// Repeated goodness-of-fit of simulated path counts against the exact law.
json repeated_gof(const json& cfg, std::uint64_t seed, unsigned threads, const PathLaw& law, const PathIndex& index,
                  const std::function<PathSampler()>& make_sampler, bool& pass) {
  const std::size_t reps = count_of(cfg, "repetitions");
  const std::size_t replicas = count_of(cfg, "replicas");
  const double alpha = cfg.at("alpha").get<double>();
  std::vector<ChiSquareResult> results(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    Stream rng(seed, r);
    auto sample = make_sampler();
    std::vector<double> counts(law.size(), 0.0);
    for (std::size_t i = 0; i < replicas; ++i) counts[index.at(sample(rng))] += 1.0;
    results[r] = chi_square_gof(counts, law.probabilities);
  });
  json stats;
  std::vector<double> ps;
  std::size_t passes = 0;
  for (const auto& r : results) {
    ps.push_back(r.p_value);
    if (r.p_value > alpha) ++passes;
  }
  stats["p_values"] = ps;
  stats["passes"] = passes;
  stats["repetitions"] = reps;
  stats["replicas"] = replicas;
  stats["paths"] = law.size();
  if (reps == 1) {
    stats["statistic"] = results[0].statistic;
    stats["dof"] = results[0].dof;
    stats["p_value"] = results[0].p_value;
    pass = results[0].p_value > alpha;
  } else {
    pass = static_cast<double>(passes) >= cfg.at("min_pass_fraction").get<double>() * static_cast<double>(reps);
  }
  return stats;
}

json run_rubin(const json& cfg, std::uint64_t seed, unsigned threads, bool& pass) {
  const auto g = graph_from(cfg);
  const auto start = cfg.at("start").get<Vertex>();
  const auto steps = count_of(cfg, "steps");
  const auto law = enumerate_path_law(g, start, steps);
  const PathIndex index(law, g.n_vertices());
  return repeated_gof(cfg, seed, threads, law, index, [&]() -> PathSampler {
    auto state = std::make_shared<ProcessState>(ProcessState::fresh(g, ProcessKind::ContinuousErrw, start));
    auto lines = std::make_shared<EdgeTimelines>(EdgeTimelines::direct(g));
    return [&, state, lines](Stream& rng) {
      state->reset(g, ProcessKind::ContinuousErrw, start);
      lines->reset();
      std::uint64_t key = index.extend(0, start);
      for (std::size_t k = 0; k < steps; ++k) key = index.extend(key, continuous_errw_step(g, *state, *lines, rng).vertex);
      return key;
    };
  }, pass);
}

json run_gamma_coupling(const json& cfg, std::uint64_t seed, unsigned threads, bool& pass) {
  const auto g = graph_from(cfg);
  const auto start = cfg.at("start").get<Vertex>();
  const auto steps = count_of(cfg, "steps");
  const auto law = enumerate_path_law(g, start, steps);
  const PathIndex index(law, g.n_vertices());
  return repeated_gof(cfg, seed, threads, law, index, [&]() -> PathSampler {
    auto state = std::make_shared<ProcessState>(ProcessState::fresh(g, ProcessKind::X, start));
    auto mixing = std::make_shared<std::vector<double>>(g.n_edges());
    return [&, state, mixing](Stream& rng) {
      for (EdgeId e = 0; e < g.n_edges(); ++e) (*mixing)[e] = std::max(rng.gamma(g.weight(e)), std::numeric_limits<double>::min());
      state->reset(g, ProcessKind::X, start);
      std::uint64_t key = index.extend(0, start);
      for (std::size_t k = 0; k < steps; ++k) {
        const double e = rng.exponential();
        const double u = rng.uniform();
        const auto move = propose_x(g, *mixing, *state, e, u);
        apply_move(*state, move);
        key = index.extend(key, move.target);
      }
      return key;
    };
  }, pass);
}

McmcOutput sample_limit_density(const WeightedGraph& g, Vertex root, std::size_t samples, std::uint64_t seed,
                                std::size_t burn_in, double autocorrelation_target = 0.5) {
  McmcSettings s;
  s.burn_in = burn_in;
  s.autocorrelation_target = autocorrelation_target;
  return adapt_and_sample(MeasureParams::rooted(g, root), samples, s, seed);
}

json run_mixture(const json& cfg, std::uint64_t seed, unsigned threads, bool& pass) {
  const auto g = graph_from(cfg);
  const auto start = cfg.at("start").get<Vertex>();
  const auto steps = count_of(cfg, "steps");
  const auto replicas = count_of(cfg, "replicas");
  const double alpha = cfg.at("alpha").get<double>();
  const auto law = enumerate_path_law(g, start, steps);
  const PathIndex index(law, g.n_vertices());
  const auto fields = sample_limit_density(g, start, replicas, seed ^ 0x9e3779b97f4a7c15ULL, count_of(cfg, "burn_in"));

  // VRJP side: jump chain, and the Z clock reached through the D time change.
  std::vector<std::size_t> vrjp_path(replicas), z_path(replicas);
  std::vector<double> vrjp_clock(replicas), z_clock(replicas);
  parallel_for(replicas, threads, [&](std::size_t i) {
    Stream rng(seed, 2 * i);
    auto s = ProcessState::fresh(g, ProcessKind::Vrjp, start);
    std::uint64_t key = index.extend(0, start);
    for (std::size_t k = 0; k < steps; ++k) key = index.extend(key, vrjp_step(g, s, rng).vertex);
    vrjp_path[i] = index.at(key);
    vrjp_clock[i] = time_change(TimeChange::D, s.local_time);

    Stream zrng(seed, 2 * i + 1);
    std::vector<double> u(g.n_vertices());
    for (std::size_t v = 0; v < u.size(); ++v) u[v] = fields.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v));
    auto z = ProcessState::fresh(g, ProcessKind::Z, start);
    key = index.extend(0, start);
    for (std::size_t k = 0; k < steps; ++k) key = index.extend(key, z_process_step(g, u, z, zrng).vertex);
    z_path[i] = index.at(key);
    z_clock[i] = z.clock;
  });
  std::vector<double> a(law.size(), 0.0), b(law.size(), 0.0);
  for (std::size_t i = 0; i < replicas; ++i) {
    a[vrjp_path[i]] += 1.0;
    b[z_path[i]] += 1.0;
  }
  const auto chi = chi_square_homogeneity(a, b);
  const auto ks = ks_two_sample(vrjp_clock, z_clock);

  // Stationary occupation of Z in one sampled field.
  RunOptions run;
  run.kind = ProcessKind::Z;
  run.start = start;
  run.max_steps = count_of(cfg, "occupancy_events");
  run.seed = seed;
  run.stream = 1ULL << 40;
  run.record_jumps = false;
  run.field.resize(g.n_vertices());
  for (std::size_t v = 0; v < g.n_vertices(); ++v) run.field[v] = fields.samples(0, static_cast<Eigen::Index>(v));
  const auto traj = run_until(g, run);
  double norm = 0.0;
  for (double x : run.field) norm += std::exp(2 * x);
  double worst = 0.0;
  std::vector<double> occupancy, expected;
  for (std::size_t v = 0; v < g.n_vertices(); ++v) {
    occupancy.push_back(traj.final_state.local_time[v] / traj.final_state.clock);
    expected.push_back(std::exp(2 * run.field[v]) / norm);
    worst = std::max(worst, std::abs(occupancy.back() / expected.back() - 1.0));
  }
  const double tol = cfg.at("occupancy_tolerance").get<double>();
  pass = chi.p_value > alpha && ks.p_value > alpha && worst < tol;
  return {{"transitions", replicas * steps},
          {"path_chi_square", chi.statistic},
          {"path_dof", chi.dof},
          {"path_p_value", chi.p_value},
          {"z_clock_ks", ks.statistic},
          {"z_clock_p_value", ks.p_value},
          {"occupancy", occupancy},
          {"occupancy_expected", expected},
          {"occupancy_max_relative_error", worst},
          {"mcmc", diagnostics_json(fields.diagnostics)}};
}

json run_inverse_gaussian(const json& cfg, std::uint64_t seed, bool& pass) {
  const double w = cfg.at("W").get<double>();
  const auto g = make_path(2, w);
  const auto out = sample_limit_density(g, 0, count_of(cfg, "samples"), seed, 10'000,
                                        cfg.at("autocorrelation_target").get<double>());
  // Edge oriented away from the start vertex: U_1 - U_0.
  std::vector<double> v(static_cast<std::size_t>(out.samples.rows()));
  for (Eigen::Index i = 0; i < out.samples.rows(); ++i) v[static_cast<std::size_t>(i)] = std::exp(out.samples(i, 1) - out.samples(i, 0));
  const auto fit = fit_inverse_gaussian(v);
  const auto ks = ks_one_sample(v, [&](double x) { return inverse_gaussian_cdf(x, fit.mu, fit.shape); });
  pass = ks.p_value > cfg.at("alpha").get<double>();
  return {{"fitted_mean", fit.mu},   {"fitted_shape", fit.shape},  {"ks_statistic", ks.statistic},
          {"p_value", ks.p_value},   {"samples", v.size()},        {"mcmc", diagnostics_json(out.diagnostics)}};
}

json run_martingale_qv(const json& cfg, std::uint64_t seed, unsigned threads, bool& pass) {
  const double w = cfg.at("W").get<double>();
  const auto g = make_path(2, w);
  const auto target = cfg.at("target").get<Vertex>();
  if (target >= 2) throw ConfigError("target must be 0 or 1");
  const double horizon = cfg.at("horizon").get<double>();
  const auto replicas = count_of(cfg, "replicas");
  MartingaleOptions mo;
  mo.target = target;
  mo.ode_step = cfg.at("ode_step").get<double>();
  mo.checkpoints = cfg.at("checkpoints").get<std::vector<double>>();
  std::erase_if(mo.checkpoints, [&](double t) { return !(t > 0.0 && t < horizon); });
  std::sort(mo.checkpoints.begin(), mo.checkpoints.end());

  std::vector<std::vector<double>> series(replicas);
  std::vector<double> qv(replicas), residual(replicas);
  std::vector<int> aborted(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t r) {
    RunOptions run;
    run.kind = ProcessKind::X;
    run.horizon = horizon;
    run.seed = seed;
    run.stream = r;
    const auto traj = run_until(g, run);
    if (traj.aborted) {
      aborted[r] = 1;
      return;
    }
    const auto d = martingale_diagnostics(g, traj, mo);
    for (const auto& p : d.series) series[r].push_back(p.value);
    qv[r] = d.quadratic_variation;
    residual[r] = d.max_residual;
  });
  const auto n_aborted = static_cast<std::size_t>(std::count(aborted.begin(), aborted.end(), 1));
  if (n_aborted) throw OverflowError(std::to_string(n_aborted) + " replicas overflowed the X clock");

  const std::vector<double> zero(2, 0.0);
  const double expected = -solve_q(g, zero).values(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(target));
  std::vector<double> times = mo.checkpoints;
  times.push_back(horizon);
  json per_checkpoint = json::array();
  double variance = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> xs(replicas);
    for (std::size_t r = 0; r < replicas; ++r) xs[r] = series[r][k];
    const auto s = summarize(xs);
    per_checkpoint.push_back({{"t", times[k]},
                              {"mean", s.mean},
                              {"stderr", s.stderr_mean},
                              {"within_2se", std::abs(s.mean) <= 2 * s.stderr_mean},
                              {"variance", s.variance}});
    variance = s.variance;
  }
  const double relative_error = std::abs(variance / expected - 1.0);

  // Derivative of Q against central differences at random fields.
  Stream rng(seed, 1ULL << 41);
  const double h = cfg.at("fd_step").get<double>();
  double fd_error = 0.0;
  const auto fd_graph = make_complete(3, w);
  for (std::size_t trial = 0; trial < count_of(cfg, "fd_trials"); ++trial) {
    const auto& gg = trial % 2 ? fd_graph : g;
    std::vector<double> t(gg.n_vertices());
    for (auto& x : t) x = 2 * rng.uniform() - 1;
    const auto q = solve_q(gg, t).values;
    for (Vertex i = 0; i < gg.n_vertices(); ++i) {
      auto plus = t, minus = t;
      plus[i] += h;
      minus[i] -= h;
      const Eigen::MatrixXd fd = (solve_q(gg, plus).values - solve_q(gg, minus).values) / (2 * h);
      fd_error = std::max(fd_error, (fd - q_derivative(gg, t, q, i)).cwiseAbs().maxCoeff());
    }
  }
  pass = relative_error < cfg.at("relative_tolerance").get<double>() && fd_error < cfg.at("fd_tolerance").get<double>();
  return {{"variance", variance},
          {"expected", expected},
          {"relative_error", relative_error},
          {"mean_quadratic_variation", summarize(qv).mean},
          {"max_q_residual", *std::max_element(residual.begin(), residual.end())},
          {"checkpoints", per_checkpoint},
          {"fd_max_error", fd_error}};
}

json run_cd_normalization(const json& cfg, bool& pass) {
  const auto root = cfg.at("root").get<Vertex>();
  const double window = cfg.at("window").get<double>();
  const double tol = cfg.at("tolerance").get<double>();
  json rows = json::array();
  pass = true;
  for (double a : cfg.at("a").get<std::vector<double>>()) {
    const auto g = make_complete(3, a);
    // Free conductances y_1, y_2 in log coordinates, y_0 = 1.
    const auto r = integrate_2d(
        [&](double s1, double s2) {
          const std::vector<double> y{1.0, std::exp(s1), std::exp(s2)};
          return std::exp(cd_log_density(g, root, 0, y) + s1 + s2);
        },
        -window, window, -window, window, {1e-9, 40});
    const bool ok = std::abs(r.value - 1.0) < tol;
    pass = pass && ok;
    rows.push_back({{"a", a}, {"mass", r.value}, {"error_estimate", r.error}, {"log_constant", cd_log_constant(g, root)},
                    {"pass", ok}});
  }
  return {{"graph", "triangle"}, {"results", rows}};
}

json run_density_vs_simulation(const json& cfg, std::uint64_t seed, unsigned threads, bool& pass) {
  const auto g = graph_from(cfg);
  const auto start = cfg.at("start").get<Vertex>();
  const double horizon = cfg.at("horizon").get<double>();
  const auto replicas = count_of(cfg, "replicas");
  const std::size_t n = g.n_vertices();
  std::vector<std::vector<double>> simulated(n, std::vector<double>(replicas));
  std::vector<int> aborted(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t r) {
    RunOptions run;
    run.kind = ProcessKind::X;
    run.start = start;
    run.horizon = horizon;
    run.seed = seed;
    run.stream = r;
    run.record_jumps = false;
    const auto traj = run_until(g, run);
    if (traj.aborted) aborted[r] = 1;
    const auto u = centred_occupation(ProcessKind::X, traj.final_state.local_time);
    for (std::size_t v = 0; v < n; ++v) simulated[v][r] = u[v];
  });
  const auto n_aborted = static_cast<std::size_t>(std::count(aborted.begin(), aborted.end(), 1));
  if (n_aborted) throw OverflowError(std::to_string(n_aborted) + " replicas overflowed the X clock");
  const auto out = sample_limit_density(g, start, count_of(cfg, "samples"), seed ^ 0x5851f42d4c957f2dULL, 10'000);
  const double threshold = cfg.at("ks_threshold").get<double>();
  std::vector<double> distance, p;
  pass = true;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<double> sampled(static_cast<std::size_t>(out.samples.rows()));
    for (Eigen::Index i = 0; i < out.samples.rows(); ++i) sampled[static_cast<std::size_t>(i)] = out.samples(i, static_cast<Eigen::Index>(v));
    const auto ks = ks_two_sample(simulated[v], sampled);
    distance.push_back(ks.statistic);
    p.push_back(ks.p_value);
    pass = pass && ks.statistic < threshold;
  }
  return {{"ks_distance", distance}, {"ks_p_value", p}, {"replicas", replicas},
          {"mcmc", diagnostics_json(out.diagnostics)}};
}

}  // namespace

VerifyReport verify_suite(std::string_view name, const json& overrides, std::uint64_t seed, unsigned threads) {
  VerifyReport report;
  report.suite = std::string(name);
  report.seed = seed;
  report.config = overrides;
  try {
    const Suite suite = parse_suite(name);
    report.config = merge_config(suite, overrides);
    const auto& cfg = report.config;
    bool pass = false;
    switch (suite) {
      case Suite::Rubin: report.statistics = run_rubin(cfg, seed, threads, pass); break;
      case Suite::GammaCoupling: report.statistics = run_gamma_coupling(cfg, seed, threads, pass); break;
      case Suite::Mixture: report.statistics = run_mixture(cfg, seed, threads, pass); break;
      case Suite::InverseGaussian: report.statistics = run_inverse_gaussian(cfg, seed, pass); break;
      case Suite::MartingaleQv: report.statistics = run_martingale_qv(cfg, seed, threads, pass); break;
      case Suite::CdNormalization: report.statistics = run_cd_normalization(cfg, pass); break;
      case Suite::DensityVsSimulation: report.statistics = run_density_vs_simulation(cfg, seed, threads, pass); break;
    }
    report.status = pass ? VerifyStatus::Pass : VerifyStatus::Reject;
  } catch (const Error& e) {
    report.status = VerifyStatus::Error;
    report.error = e.what();
  } catch (const json::exception& e) {
    report.status = VerifyStatus::Error;
    report.error = std::string("config: ") + e.what();
  }
  return report;
}

json to_json(const VerifyReport& r) {
  json j{{"suite", r.suite},
         {"config", r.config},
         {"seed", r.seed},
         {"statistics", r.statistics},
         {"pass", r.pass()},
         {"status", std::string(to_string(r.status))}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

}  // namespace reinforce
