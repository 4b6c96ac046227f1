#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "reinforce/measure.hpp"
#include "reinforce/rng.hpp"

namespace reinforce {

using LogDensity = std::function<double(std::span<const double>)>;

// Random-walk Metropolis state. Proposals are position + scale * factor * xi
// with xi standard normal; in the zero-sum gauge the increment is projected
// back onto the hyperplane.
struct McmcChain {
  std::vector<double> position;
  Gauge gauge = Gauge::Free;
  double proposal_scale = 1.0;
  Eigen::MatrixXd factor;  // proposal covariance square root; empty = identity
  double log_density = 0.0;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected_nonfinite = 0;
  // Running per-coordinate moments over every visited state.
  std::uint64_t visits = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  static McmcChain start(std::vector<double> position, Gauge gauge, double scale, const LogDensity& target);
  double acceptance_rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
  void reset_counters();
};

// min(1, exp(log_proposed - log_current)); non-finite proposals give 0.
double metropolis_acceptance(double log_current, double log_proposed);

// One proposal and accept/reject. Returns whether the move was accepted.
bool metropolis_step(McmcChain& chain, const LogDensity& target, Stream& rng);

struct McmcSettings {
  std::size_t burn_in = 10'000;
  std::size_t thinning = 0;            // 0 = choose from the pilot run
  double autocorrelation_target = 0.5; // automatic thinning: lag autocorrelation below this
  std::size_t pilot = 2'000;           // steps used to choose the thinning
  std::size_t max_thinning = 1'000;
  double target_acceptance = 0.0;      // 0 = 0.44 in one dimension, 0.234 otherwise
  double initial_scale = 0.0;          // 0 = 2.38 / sqrt(dim)
  bool precondition = true;            // Gaussian approximation at the origin
  bool adapt_covariance = true;        // empirical covariance during burn-in
  std::size_t chains = 1;
  unsigned threads = 1;
  double rhat_threshold = 1.05;
};

struct McmcDiagnostics {
  std::vector<double> ess;
  std::vector<double> rhat;
  double acceptance = 0.0;
  double scale = 0.0;
  std::size_t thinning = 1;
  std::uint64_t rejected_nonfinite = 0;
  bool flagged = false;
  std::vector<std::string> messages;
};

struct McmcOutput {
  Eigen::MatrixXd samples;  // one row per retained sample
  McmcDiagnostics diagnostics;
};

// Burn-in with Robbins-Monro scale adaptation (and covariance refinement),
// then sampling with the proposal frozen. Deterministic given the seed.
McmcOutput adapt_and_sample(const LogDensity& target, std::size_t dim, Gauge gauge, std::size_t n_samples,
                            const McmcSettings& settings, std::uint64_t seed,
                            const Eigen::MatrixXd& initial_covariance = {});
McmcOutput adapt_and_sample(const MeasureParams& params, std::size_t n_samples, const McmcSettings& settings,
                            std::uint64_t seed);

// Gaussian approximation of the target at the origin: pseudo-inverse of the
// W-Laplacian (rooted form) or inverse of beta-Laplacian + diag(eps).
Eigen::MatrixXd origin_covariance(const MeasureParams& params);

// Geyer initial positive sequence estimate.
double effective_sample_size(std::span<const double> xs);
// Split potential scale reduction across the given chains (each split in two).
double split_rhat(const std::vector<std::vector<double>>& chains);
double autocorrelation(std::span<const double> xs, std::size_t lag);

void write_samples_csv(std::ostream& out, const Eigen::MatrixXd& samples, const std::string& prefix = "x");
nlohmann::json diagnostics_json(const McmcDiagnostics& d);

}  // namespace reinforce
