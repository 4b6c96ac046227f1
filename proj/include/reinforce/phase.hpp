#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "json.hpp"
#include "reinforce/mcmc.hpp"

namespace reinforce {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// sqrt(beta) * integral of exp(-beta (cosh t - 1)) dt / sqrt(2 pi).
double i_beta(double beta);
// I_beta e^{beta(2d-2)} (2d-1).
double bound_base_beta(int d, double beta);
// Root of bound_base_beta(d, .) == 1; infinity for d == 1.
double beta_c(int d);

// Mean of I_beta under beta ~ Gamma(a, 1), through the cosh-power integral.
double i_hat(double a);
// Same quantity by integrating I_beta against the Gamma density.
double i_hat_by_mixture(double a);
// Mean of max(beta, 1) e^{min(beta, 1)} under beta ~ Gamma(a, 1).
double j_hat(double a);
// I_hat_a J_hat_a^{2d-2} (2d-1).
double bound_base_gamma(int d, double a);
// Root of bound_base_gamma(d, .) == 1; infinity for d == 1, where the
// product stays below 1 for every a.
double a_c(int d);

// 2d / (2d - 1).
double decay_prefactor(int d);

struct PhasePoint {
  int d = 1;
  double parameter = 0.0;  // beta, or a in the Gamma case
  bool gamma = false;
  double i_value = 0.0;     // I_beta or I_hat_a
  double j_value = 0.0;     // J_hat_a (Gamma case only)
  double bound_base = 0.0;

  static PhasePoint fixed(int d, double beta);
  static PhasePoint gamma_mixed(int d, double a);
};

nlohmann::json constants_json(int d, std::optional<double> beta, std::optional<double> a);

struct DecayScanOptions {
  int d = 2;
  int n = 3;
  std::optional<double> beta;  // constant conductances
  std::optional<double> a;     // or i.i.d. Gamma(a, 1) conductances
  double eta = 1.0;            // pinning at the origin
  std::size_t samples = 20'000;
  std::size_t conductance_draws = 8;  // Gamma case
  McmcSettings mcmc;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct DecayRow {
  int distance = 0;
  Vertex vertex = 0;
  double estimate = 0.0;
  double stderr_estimate = 0.0;
  double bound = 0.0;
  double jensen_floor = 0.0;  // exp(mean(t_x) / 2)
  bool flagged = false;
};

struct DecayScan {
  DecayScanOptions options;
  PhasePoint point;
  double pinning_constant = 0.0;  // I_eta
  std::vector<DecayRow> rows;
  std::vector<std::string> messages;
};

DecayScan decay_scan(const DecayScanOptions& opts);
// Least-squares slope of log(estimate) against distance.
double fitted_log_slope(const std::vector<DecayRow>& rows);
// Columns d, n, beta|a, distance, estimate, stderr, bound, flagged.
void write_decay_csv(std::ostream& out, const DecayScan& scan);

struct ResistanceCheckOptions {
  int d = 3;
  int n = 2;
  double beta = 100.0;
  std::size_t samples = 2'000;
  McmcSettings mcmc;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ResistanceCheck {
  double lhs = 0.0;          // mean of c_0 R(0, boundary, c)
  double lhs_stderr = 0.0;
  double rhs = 0.0;          // 16 d R(0, boundary)
  double unit_resistance = 0.0;
  double flow_energy_residual = 0.0;  // |sum theta^2 - R| for unit conductances
  std::size_t samples = 0;
  std::size_t flow_bound_violations = 0;
  bool holds = false;        // lhs <= rhs + 3 stderr
  bool mcmc_flagged = false;
  std::vector<std::string> messages;
};

ResistanceCheck resistance_bound_check(const ResistanceCheckOptions& opts);
nlohmann::json to_json(const ResistanceCheck& r);

}  // namespace reinforce
