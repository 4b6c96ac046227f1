#include "reinforce/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "reinforce/error.hpp"
#include "reinforce/parallel.hpp"

namespace reinforce {
namespace {

Eigen::MatrixXd square_root_factor(const Eigen::MatrixXd& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("proposal covariance eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

void record_visit(McmcChain& c) {
  ++c.visits;
  const double n = static_cast<double>(c.visits);
  for (std::size_t i = 0; i < c.position.size(); ++i) {
    const double delta = c.position[i] - c.mean[i];
    c.mean[i] += delta / n;
    c.m2[i] += delta * (c.position[i] - c.mean[i]);
  }
}

}  // namespace

McmcChain McmcChain::start(std::vector<double> position, Gauge gauge, double scale, const LogDensity& target) {
  if (!(scale > 0.0)) throw InvalidArgument("proposal scale must be positive");
  McmcChain c;
  c.position = std::move(position);
  c.gauge = gauge;
  if (gauge == Gauge::ZeroSum) project_zero_sum(c.position);
  c.proposal_scale = scale;
  c.log_density = target(c.position);
  if (!std::isfinite(c.log_density)) throw NumericalError("MCMC start point has non-finite log density");
  c.mean.assign(c.position.size(), 0.0);
  c.m2.assign(c.position.size(), 0.0);
  return c;
}

void McmcChain::reset_counters() {
  proposed = accepted = rejected_nonfinite = visits = 0;
  std::fill(mean.begin(), mean.end(), 0.0);
  std::fill(m2.begin(), m2.end(), 0.0);
}

double metropolis_acceptance(double log_current, double log_proposed) {
  if (!std::isfinite(log_proposed)) return 0.0;
  const double delta = log_proposed - log_current;
  return delta >= 0.0 ? 1.0 : std::exp(delta);
}

bool metropolis_step(McmcChain& chain, const LogDensity& target, Stream& rng) {
  const std::size_t d = chain.position.size();
  Eigen::VectorXd xi(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) xi(static_cast<Eigen::Index>(i)) = rng.normal();
  Eigen::VectorXd step = chain.factor.size() ? Eigen::VectorXd(chain.factor * xi) : xi;
  step *= chain.proposal_scale;
  std::vector<double> proposal(d);
  for (std::size_t i = 0; i < d; ++i) proposal[i] = chain.position[i] + step(static_cast<Eigen::Index>(i));
  if (chain.gauge == Gauge::ZeroSum) project_zero_sum(proposal);
  const double u = rng.uniform();
  ++chain.proposed;
  double log_p = -std::numeric_limits<double>::infinity();
  try {
    log_p = target(proposal);
  } catch (const NumericalError&) {
    log_p = std::numeric_limits<double>::quiet_NaN();
  }
  bool accept = false;
  if (!std::isfinite(log_p)) {
    ++chain.rejected_nonfinite;
  } else {
    accept = std::log(u) < log_p - chain.log_density;
  }
  if (accept) {
    chain.position = std::move(proposal);
    chain.log_density = log_p;
    ++chain.accepted;
  }
  record_visit(chain);
  return accept;
}

double autocorrelation(std::span<const double> xs, std::size_t lag) {
  const std::size_t n = xs.size();
  if (lag >= n) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double c0 = 0.0, ck = 0.0;
  for (std::size_t i = 0; i < n; ++i) c0 += (xs[i] - mean) * (xs[i] - mean);
  for (std::size_t i = 0; i + lag < n; ++i) ck += (xs[i] - mean) * (xs[i + lag] - mean);
  return c0 > 0.0 ? ck / c0 : 0.0;
}

double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = xs[i] - mean;
  double c0 = 0.0;
  for (double x : centred) c0 += x * x;
  if (c0 <= 0.0) return static_cast<double>(n);
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centred[i] * centred[i + lag];
    return s / c0;
  };
  // Sum of consecutive pairs while positive and monotone.
  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    tau += 2.0 * pair;
    previous_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n) + 10.0));
  return static_cast<double>(n) / tau;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw InvalidArgument("R-hat needs at least 4 draws per chain");
    halves.emplace_back(c.data(), h);
    halves.emplace_back(c.data() + (c.size() - h), h);
  }
  const double m = static_cast<double>(halves.size());
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double within = 0.0;
  for (auto h : halves) {
    double mu = 0.0;
    for (double x : h) mu += x;
    mu /= n;
    means.push_back(mu);
    double s = 0.0;
    for (double x : h) s += (x - mu) * (x - mu);
    within += s / (n - 1.0);
  }
  within /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);
  if (within <= 0.0) return 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

Eigen::MatrixXd origin_covariance(const MeasureParams& params) {
  const auto& g = params.graph();
  const auto n = static_cast<Eigen::Index>(g.n_vertices());
  Eigen::MatrixXd precision = laplacian(g);
  if (params.is_rooted()) {
    // Pseudo-inverse on the zero-sum hyperplane.
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd inv = (precision + ones).inverse();
    return inv - ones;
  }
  const auto eps = params.as_pinned().pinned.eps();
  for (Eigen::Index i = 0; i < n; ++i) precision(i, i) += eps[static_cast<std::size_t>(i)];
  return precision.inverse();
}

namespace {

struct ChainRun {
  std::vector<std::vector<double>> draws;  // retained samples
  double acceptance = 0.0;
  double scale = 0.0;
  std::size_t thinning = 1;
  std::uint64_t rejected_nonfinite = 0;
};

Eigen::MatrixXd empirical_covariance(const std::vector<std::vector<double>>& xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto d = static_cast<Eigen::Index>(xs.front().size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const Eigen::RowVectorXd mu = m.colwise().mean();
  m.rowwise() -= mu;
  return m.transpose() * m / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
}

ChainRun run_chain(const LogDensity& target, std::size_t dim, Gauge gauge, std::size_t n_samples,
                   const McmcSettings& s, std::uint64_t seed, std::uint64_t chain_id, const Eigen::MatrixXd& cov0) {
  Stream rng(seed, chain_id);
  const std::size_t free_dims = gauge == Gauge::ZeroSum ? dim - 1 : dim;
  if (free_dims == 0) throw InvalidArgument("target has no free coordinates");
  const double target_acc = s.target_acceptance > 0.0 ? s.target_acceptance : (free_dims == 1 ? 0.44 : 0.234);
  const double default_scale = 2.38 / std::sqrt(static_cast<double>(free_dims));
  const double scale0 = s.initial_scale > 0.0 ? s.initial_scale : default_scale;
  auto chain = McmcChain::start(std::vector<double>(dim, 0.0), gauge, scale0, target);
  if (cov0.size()) chain.factor = square_root_factor(cov0);

  // Burn-in: Robbins-Monro on log(scale); covariance refreshed at the end
  // of each of the first three quarters from that quarter's draws.
  double log_scale = std::log(scale0);
  std::vector<std::vector<double>> window;
  const std::size_t quarter = s.burn_in / 4;
  std::size_t k_adapt = 0;
  for (std::size_t it = 0; it < s.burn_in; ++it) {
    const double acc = metropolis_step(chain, target, rng) ? 1.0 : 0.0;
    ++k_adapt;
    log_scale += std::pow(static_cast<double>(k_adapt), -0.6) * (acc - target_acc);
    log_scale = std::clamp(log_scale, -30.0, 10.0);
    chain.proposal_scale = std::exp(log_scale);
    if (s.adapt_covariance && quarter >= 50 * dim && free_dims > 1) {
      window.push_back(chain.position);
      if ((it + 1) % quarter == 0 && (it + 1) / quarter <= 3) {
        Eigen::MatrixXd cov = empirical_covariance(window);
        const double jitter = 1e-8 * std::max(cov.diagonal().mean(), 1e-300);
        cov.diagonal().array() += jitter;
        if (gauge == Gauge::ZeroSum) {
          const auto n = static_cast<Eigen::Index>(dim);
          const Eigen::MatrixXd proj =
              Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
          cov = proj * cov * proj;
        }
        chain.factor = square_root_factor(cov);
        log_scale = std::log(default_scale);
        chain.proposal_scale = default_scale;
        k_adapt = 0;
        window.clear();
      }
    }
  }
  const double frozen_scale = chain.proposal_scale;

  ChainRun run;
  run.thinning = s.thinning;
  if (run.thinning == 0) {
    std::vector<std::vector<double>> trace(dim);
    for (std::size_t it = 0; it < s.pilot; ++it) {
      metropolis_step(chain, target, rng);
      for (std::size_t i = 0; i < dim; ++i) trace[i].push_back(chain.position[i]);
    }
    // Smallest k for which every coordinate's lag-k autocorrelation is below target.
    run.thinning = s.max_thinning;
    for (std::size_t k = 1; k <= s.max_thinning; ++k) {
      bool ok = true;
      for (std::size_t i = 0; i < dim && ok; ++i) ok = autocorrelation(trace[i], k) < s.autocorrelation_target;
      if (ok) {
        run.thinning = k;
        break;
      }
    }
  }
  chain.reset_counters();
  run.draws.reserve(n_samples);
  for (std::size_t kept = 0; kept < n_samples; ++kept) {
    for (std::size_t t = 0; t < run.thinning; ++t) metropolis_step(chain, target, rng);
    run.draws.push_back(chain.position);
  }
  if (chain.proposal_scale != frozen_scale) throw InvariantViolation("proposal scale changed after burn-in");
  run.acceptance = chain.acceptance_rate();
  run.scale = frozen_scale;
  run.rejected_nonfinite = chain.rejected_nonfinite;
  return run;
}

}  // namespace

McmcOutput adapt_and_sample(const LogDensity& target, std::size_t dim, Gauge gauge, std::size_t n_samples,
                            const McmcSettings& settings, std::uint64_t seed, const Eigen::MatrixXd& initial_covariance) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  if (dim < 1) throw InvalidArgument("dimension must be >= 1");
  const std::size_t n_chains = std::max<std::size_t>(1, settings.chains);
  std::vector<std::size_t> share(n_chains, n_samples / n_chains);
  for (std::size_t c = 0; c < n_samples % n_chains; ++c) ++share[c];
  std::vector<ChainRun> runs(n_chains);
  parallel_for(n_chains, settings.threads, [&](std::size_t c) {
    runs[c] = run_chain(target, dim, gauge, share[c], settings, seed, c, initial_covariance);
  });

  McmcOutput out;
  out.samples.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dim));
  Eigen::Index row = 0;
  for (const auto& r : runs) {
    for (const auto& x : r.draws) {
      for (std::size_t j = 0; j < dim; ++j) out.samples(row, static_cast<Eigen::Index>(j)) = x[j];
      ++row;
    }
  }
  auto& d = out.diagnostics;
  double acc = 0.0, scale = 0.0;
  for (const auto& r : runs) {
    acc += r.acceptance;
    scale += r.scale;
    d.rejected_nonfinite += r.rejected_nonfinite;
    d.thinning = std::max(d.thinning, r.thinning);
  }
  d.acceptance = acc / static_cast<double>(n_chains);
  d.scale = scale / static_cast<double>(n_chains);
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<std::vector<double>> per_chain;
    double ess = 0.0;
    for (const auto& r : runs) {
      std::vector<double> col;
      col.reserve(r.draws.size());
      for (const auto& x : r.draws) col.push_back(x[j]);
      ess += effective_sample_size(col);
      per_chain.push_back(std::move(col));
    }
    d.ess.push_back(ess);
    bool enough = true;
    for (const auto& c : per_chain) enough = enough && c.size() >= 4;
    d.rhat.push_back(enough ? split_rhat(per_chain) : std::numeric_limits<double>::quiet_NaN());
    if (enough && d.rhat.back() > settings.rhat_threshold) {
      d.flagged = true;
      std::ostringstream msg;
      msg << "coordinate " << j << ": R-hat " << d.rhat.back() << " exceeds " << settings.rhat_threshold;
      d.messages.push_back(msg.str());
    }
  }
  if (d.thinning >= settings.max_thinning && settings.thinning == 0) {
    d.flagged = true;
    d.messages.push_back("thinning hit its cap before lag autocorrelation fell below target");
  }
  return out;
}

McmcOutput adapt_and_sample(const MeasureParams& params, std::size_t n_samples, const McmcSettings& settings,
                            std::uint64_t seed) {
  const LogDensity target = [&params](std::span<const double> x) { return params.log_density(x); };
  const Eigen::MatrixXd cov = settings.precondition ? origin_covariance(params) : Eigen::MatrixXd{};
  return adapt_and_sample(target, params.dimension(), params.gauge(), n_samples, settings, seed, cov);
}

void write_samples_csv(std::ostream& out, const Eigen::MatrixXd& samples, const std::string& prefix) {
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out << (j ? "," : "") << prefix << "_" << j;
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", samples(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

nlohmann::json diagnostics_json(const McmcDiagnostics& d) {
  nlohmann::json j;
  j["ess"] = d.ess;
  nlohmann::json rhat = nlohmann::json::array();
  for (double r : d.rhat) rhat.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr));
  j["rhat"] = rhat;
  j["acceptance"] = d.acceptance;
  j["scale"] = d.scale;
  j["thinning"] = d.thinning;
  j["rejected_nonfinite"] = d.rejected_nonfinite;
  j["flagged"] = d.flagged;
  j["messages"] = d.messages;
  return j;
}

}  // namespace reinforce
