#include "reinforce/phase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "reinforce/error.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/parallel.hpp"
#include "reinforce/quadrature.hpp"
#include "reinforce/stats.hpp"

namespace reinforce {
namespace {

constexpr double kUnderflowExponent = 800.0;

// Integral at rel_tol and rel_tol / 2; the two must agree to rel_tol.
double checked_integral(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  const auto coarse = integrate(f, a, b, {rel_tol, 15});
  const auto fine = integrate(f, a, b, {rel_tol / 2, 15});
  if (std::abs(coarse.value - fine.value) > rel_tol * std::max(1.0, std::abs(fine.value))) {
    std::ostringstream msg;
    msg << "quadrature disagreement " << std::abs(coarse.value - fine.value) << " at tolerance " << rel_tol;
    throw NumericalError(msg.str());
  }
  return fine.value;
}

void require_dimension(int d) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument(std::string(what) + " must be positive and finite");
}

// Root of an increasing function by bracket doubling then bisection.
double increasing_root(const std::function<double(double)>& f, double residual, const char* what) {
  double lo = 1.0, hi = 1.0;
  if (f(1.0) < 0.0) {
    while (f(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) throw NumericalError(std::string(what) + ": no sign change below 1e12");
    }
  } else {
    while (f(lo) >= 0.0) {
      hi = lo;
      lo /= 2.0;
      if (lo < 1e-12) throw NumericalError(std::string(what) + ": no sign change above 1e-12");
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(v) < residual) return mid;
    (v < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  const double v = f(mid);
  if (std::abs(v) >= residual) {
    std::ostringstream msg;
    msg << what << ": bisection stalled in [" << lo << ", " << hi << "] with residual " << v;
    throw NumericalError(msg.str());
  }
  return mid;
}

}  // namespace

double i_beta(double beta) {
  require_positive(beta, "beta");
  const double window = std::acosh(1.0 + kUnderflowExponent / beta);
  const auto f = [beta](double t) {
    const double s = std::sinh(t / 2);
    return std::exp(-2.0 * beta * s * s);
  };
  const double half = checked_integral(f, 0.0, window, 1e-12);
  return std::sqrt(beta) * 2.0 * half / std::sqrt(2.0 * std::numbers::pi);
}

double bound_base_beta(int d, double beta) {
  require_dimension(d);
  return i_beta(beta) * std::exp(beta * (2.0 * d - 2.0)) * (2.0 * d - 1.0);
}

double beta_c(int d) {
  require_dimension(d);
  if (d == 1) return kInfinity;
  return increasing_root([d](double b) { return bound_base_beta(d, b) - 1.0; }, 1e-10, "beta_c");
}

double i_hat(double a) {
  require_positive(a, "a");
  const double p = a + 0.5;
  const auto f = [p](double t) {
    const double log_cosh = t + std::log1p(std::exp(-2.0 * t)) - std::numbers::ln2;
    return std::exp(-p * log_cosh);
  };
  const double half = checked_integral(f, 0.0, kInfinity, 1e-11);
  return std::exp(std::lgamma(a + 0.5) - std::lgamma(a)) * 2.0 * half / std::sqrt(2.0 * std::numbers::pi);
}

double i_hat_by_mixture(double a) {
  require_positive(a, "a");
  // beta = e^v keeps the Gamma density integrable for a < 1.
  const double log_norm = std::lgamma(a);
  const auto f = [a, log_norm](double v) {
    const double beta = std::exp(v);
    if (beta > kUnderflowExponent) return 0.0;
    return i_beta(beta) * std::exp(a * v - beta - log_norm);
  };
  return integrate(f, -200.0, std::log(kUnderflowExponent), {1e-11, 15}).value;
}

double j_hat(double a) {
  require_positive(a, "a");
  // beta < 1: substitute s = beta^a, so beta^{a-1} dbeta = ds / a.
  const auto below = [a](double s) {
    const double beta = std::pow(s, 1.0 / a);
    return std::exp(beta) * std::exp(-beta);
  };
  const double lower = checked_integral(below, 0.0, 1.0, 1e-10) / std::tgamma(a + 1.0);
  const double log_norm = std::lgamma(a);
  const auto above = [a, log_norm](double beta) {
    return beta * std::numbers::e * std::exp((a - 1.0) * std::log(beta) - beta - log_norm);
  };
  const double upper = checked_integral(above, 1.0, kInfinity, 1e-10);
  return lower + upper;
}

double bound_base_gamma(int d, double a) {
  require_dimension(d);
  return i_hat(a) * std::pow(j_hat(a), 2.0 * d - 2.0) * (2.0 * d - 1.0);
}

double a_c(int d) {
  require_dimension(d);
  if (d == 1) return kInfinity;
  return increasing_root([d](double a) { return bound_base_gamma(d, a) - 1.0; }, 1e-8, "a_c");
}

double decay_prefactor(int d) {
  require_dimension(d);
  return 2.0 * d / (2.0 * d - 1.0);
}

PhasePoint PhasePoint::fixed(int d, double beta) {
  PhasePoint p;
  p.d = d;
  p.parameter = beta;
  p.i_value = i_beta(beta);
  p.bound_base = p.i_value * std::exp(beta * (2.0 * d - 2.0)) * (2.0 * d - 1.0);
  return p;
}

PhasePoint PhasePoint::gamma_mixed(int d, double a) {
  PhasePoint p;
  p.d = d;
  p.parameter = a;
  p.gamma = true;
  p.i_value = i_hat(a);
  p.j_value = j_hat(a);
  p.bound_base = p.i_value * std::pow(p.j_value, 2.0 * d - 2.0) * (2.0 * d - 1.0);
  return p;
}

namespace {

nlohmann::json number_or_inf(double x) {
  if (std::isinf(x)) return "inf";
  return x;
}

}  // namespace

nlohmann::json constants_json(int d, std::optional<double> beta, std::optional<double> a) {
  nlohmann::json j;
  j["d"] = d;
  const double bc = beta_c(d);
  j["beta_c"] = number_or_inf(bc);
  if (std::isfinite(bc)) j["beta_c_residual"] = bound_base_beta(d, bc) - 1.0;
  const double ac = a_c(d);
  j["a_c"] = number_or_inf(ac);
  if (std::isfinite(ac)) j["a_c_residual"] = bound_base_gamma(d, ac) - 1.0;
  j["decay_prefactor"] = decay_prefactor(d);
  if (beta) {
    const auto p = PhasePoint::fixed(d, *beta);
    j["beta"] = *beta;
    j["i_beta"] = p.i_value;
    j["bound_base"] = p.bound_base;
  }
  if (a) {
    const auto p = PhasePoint::gamma_mixed(d, *a);
    j["a"] = *a;
    j["i_hat"] = p.i_value;
    j["j_hat"] = p.j_value;
    j["bound_base_gamma"] = p.bound_base;
  }
  return j;
}

namespace {

struct FieldAverages {
  std::vector<double> estimate;   // per representative
  std::vector<double> stderr_mc;
  std::vector<double> mean_field;
  bool flagged = false;
  std::vector<std::string> messages;
};

FieldAverages half_exponential_moments(const PinnedGraph& pinned, std::span<const Vertex> reps, std::size_t samples,
                                       const McmcSettings& mcmc, std::uint64_t seed) {
  const auto params = MeasureParams::pinned(pinned);
  const auto out = adapt_and_sample(params, samples, mcmc, seed);
  FieldAverages avg;
  avg.flagged = out.diagnostics.flagged;
  avg.messages = out.diagnostics.messages;
  for (Vertex x : reps) {
    std::vector<double> values(static_cast<std::size_t>(out.samples.rows()));
    double field = 0.0;
    for (Eigen::Index i = 0; i < out.samples.rows(); ++i) {
      const double t = out.samples(i, static_cast<Eigen::Index>(x));
      values[static_cast<std::size_t>(i)] = std::exp(t / 2);
      field += t;
    }
    const auto s = summarize(values);
    const double ess = std::max(1.0, effective_sample_size(values));
    avg.estimate.push_back(s.mean);
    avg.stderr_mc.push_back(std::sqrt(s.variance / ess));
    avg.mean_field.push_back(field / static_cast<double>(values.size()));
  }
  return avg;
}

std::vector<double> pinning_at(const LatticeBox& box, double eta) {
  std::vector<double> eps(box.graph.n_vertices(), 0.0);
  eps[box.origin] = eta;
  return eps;
}

}  // namespace

DecayScan decay_scan(const DecayScanOptions& opts) {
  if (opts.beta.has_value() == opts.a.has_value()) throw InvalidArgument("decay scan needs exactly one of beta or a");
  require_positive(opts.eta, "eta");
  if (opts.n < 0) throw InvalidArgument("box radius must be >= 0");
  const bool gamma = opts.a.has_value();
  DecayScan scan;
  scan.options = opts;
  scan.point = gamma ? PhasePoint::gamma_mixed(opts.d, *opts.a) : PhasePoint::fixed(opts.d, *opts.beta);
  scan.pinning_constant = i_beta(opts.eta);
  const auto box = build_lattice_box(opts.d, opts.n, gamma ? 1.0 : *opts.beta);
  // Representatives along the first axis.
  std::vector<Vertex> reps;
  std::vector<int> coord(static_cast<std::size_t>(opts.d), 0);
  for (int k = 0; k <= opts.n; ++k) {
    coord[0] = k;
    reps.push_back(box.index_of(coord));
  }
  const auto eps = pinning_at(box, opts.eta);
  McmcSettings mcmc = opts.mcmc;
  mcmc.threads = 1;

  std::vector<FieldAverages> runs;
  if (!gamma) {
    runs.push_back(half_exponential_moments(PinnedGraph(box.graph, eps), reps, opts.samples, mcmc, opts.seed));
  } else {
    const std::size_t draws = std::max<std::size_t>(1, opts.conductance_draws);
    runs.resize(draws);
    parallel_for(draws, opts.threads, [&](std::size_t k) {
      Stream rng(opts.seed, 1'000'000 + k);
      std::vector<double> weights(box.graph.n_edges());
      for (auto& w : weights) w = rng.gamma(*opts.a);
      for (auto& w : weights) w = std::max(w, std::numeric_limits<double>::min());
      PinnedGraph pinned(box.graph.with_weights(weights), eps);
      runs[k] = half_exponential_moments(pinned, reps, opts.samples, mcmc, opts.seed + 7919 * (k + 1));
    });
  }

  for (std::size_t r = 0; r < reps.size(); ++r) {
    DecayRow row;
    row.distance = static_cast<int>(r);
    row.vertex = reps[r];
    row.bound = decay_prefactor(opts.d) * scan.pinning_constant * std::pow(scan.point.bound_base, row.distance);
    if (runs.size() == 1) {
      row.estimate = runs[0].estimate[r];
      row.stderr_estimate = runs[0].stderr_mc[r];
      row.jensen_floor = std::exp(runs[0].mean_field[r] / 2);
    } else {
      std::vector<double> per_draw, fields;
      for (const auto& run : runs) {
        per_draw.push_back(run.estimate[r]);
        fields.push_back(run.mean_field[r]);
      }
      const auto s = summarize(per_draw);
      row.estimate = s.mean;
      row.stderr_estimate = s.stderr_mean;
      row.jensen_floor = std::exp(summarize(fields).mean / 2);
    }
    for (const auto& run : runs) row.flagged = row.flagged || run.flagged;
    scan.rows.push_back(row);
  }
  for (const auto& run : runs) scan.messages.insert(scan.messages.end(), run.messages.begin(), run.messages.end());
  return scan;
}

double fitted_log_slope(const std::vector<DecayRow>& rows) {
  if (rows.size() < 2) throw InvalidArgument("slope fit needs at least two rows");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    if (!(r.estimate > 0.0)) throw NumericalError("non-positive estimate in slope fit");
    const double x = r.distance, y = std::log(r.estimate);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_decay_csv(std::ostream& out, const DecayScan& scan) {
  out << "d,n," << (scan.point.gamma ? "a" : "beta") << ",distance,estimate,stderr,bound,flagged\n";
  char buf[256];
  for (const auto& r : scan.rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d,%.17g,%.17g,%.17g,%d\n", scan.options.d, scan.options.n,
                  scan.point.parameter, r.distance, r.estimate, r.stderr_estimate, r.bound, r.flagged ? 1 : 0);
    out << buf;
  }
}

ResistanceCheck resistance_bound_check(const ResistanceCheckOptions& opts) {
  require_positive(opts.beta, "beta");
  if (opts.n < 1) throw InvalidArgument("box radius must be >= 1 for a nonempty boundary");
  const auto box = build_lattice_box(opts.d, opts.n, opts.beta);
  const auto& g = box.graph;
  ResistanceCheck check;

  const std::vector<double> unit(g.n_edges(), 1.0);
  const auto unit_solution = effective_resistance(g, unit, box.origin, box.boundary);
  check.unit_resistance = unit_solution.resistance;
  check.rhs = 16.0 * opts.d * unit_solution.resistance;
  check.flow_energy_residual = std::abs(flow_energy(g, unit_solution.flow, unit) - unit_solution.resistance);

  std::vector<double> eps(g.n_vertices(), 0.0);
  eps[box.origin] = 1.0;
  const auto params = MeasureParams::pinned(PinnedGraph(g, eps));
  McmcSettings mcmc = opts.mcmc;
  mcmc.threads = opts.threads;
  const auto out = adapt_and_sample(params, opts.samples, mcmc, opts.seed);
  check.mcmc_flagged = out.diagnostics.flagged;
  check.messages = out.diagnostics.messages;

  const auto rows = static_cast<std::size_t>(out.samples.rows());
  std::vector<double> values(rows);
  std::vector<std::size_t> violations(rows, 0);
  parallel_for(rows, opts.threads, [&](std::size_t i) {
    std::vector<double> c(g.n_edges());
    for (EdgeId e = 0; e < g.n_edges(); ++e) {
      const auto& edge = g.edge(e);
      c[e] = opts.beta * std::exp(out.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(edge.u)) +
                                  out.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(edge.v)));
    }
    double c0 = 0.0;
    for (const auto& inc : g.neighbors(box.origin)) c0 += c[inc.edge];
    const double r = effective_resistance(g, c, box.origin, box.boundary).resistance;
    values[i] = c0 * r;
    const double flow_bound = c0 * flow_energy(g, unit_solution.flow, c);
    if (flow_bound < values[i] * (1.0 - 1e-12)) violations[i] = 1;
  });
  for (auto v : violations) check.flow_bound_violations += v;
  const auto s = summarize(values);
  check.samples = rows;
  check.lhs = s.mean;
  check.lhs_stderr = std::sqrt(s.variance / std::max(1.0, effective_sample_size(values)));
  check.holds = check.lhs <= check.rhs + 3.0 * check.lhs_stderr;
  return check;
}

nlohmann::json to_json(const ResistanceCheck& r) {
  return {{"lhs", r.lhs},
          {"lhs_stderr", r.lhs_stderr},
          {"rhs", r.rhs},
          {"unit_resistance", r.unit_resistance},
          {"flow_energy_residual", r.flow_energy_residual},
          {"samples", r.samples},
          {"flow_bound_violations", r.flow_bound_violations},
          {"holds", r.holds},
          {"mcmc_flagged", r.mcmc_flagged},
          {"messages", r.messages}};
}

}  // namespace reinforce
