#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "reinforce/graph.hpp"
#include "reinforce/process.hpp"

namespace reinforce {

// Symmetric solution of the Poisson equation L(T) Q = Q L(T) = I - 11^T/N
// for the generator with off-diagonal rates W_ij exp(T_i + T_j).
struct QMatrix {
  Eigen::MatrixXd values;
  double spectral_gap = 0.0;  // smallest nonzero |eigenvalue| of L(T)
};

inline constexpr double kSpectralGapFloor = 1e-13;

// Generator L(T): off-diagonal W_ij e^{T_i+T_j}, zero row sums.
Eigen::MatrixXd generator(const WeightedGraph& g, std::span<const double> T);

QMatrix solve_q(const WeightedGraph& g, std::span<const double> T);

// Largest violation of: symmetry, zero row sums, nonpositive diagonal.
double q_invariant_violation(const Eigen::MatrixXd& q);

// d Q / d T_i.
Eigen::MatrixXd q_derivative(const WeightedGraph& g, std::span<const double> T, const Eigen::MatrixXd& q, Vertex i);

struct MartingaleOptions {
  Vertex target = 0;
  double ode_step = 1e-3;
  double residual_tolerance = 1e-4;
  unsigned max_halvings = 4;
  std::vector<double> checkpoints;  // times at which M is reported; the final time is always added
};

struct MartingalePoint {
  double time;
  double value;
};

struct MartingaleDiagnostics {
  std::vector<MartingalePoint> series;
  double quadratic_variation = 0.0;  // sum of squared jumps of M
  double max_residual = 0.0;         // evolved Q against solve_q, over all jumps
  double ode_step = 0.0;             // step actually used
  double q_diagonal_start = 0.0;     // Q(T(0))_{ll}
  double q_diagonal_end = 0.0;       // Q(T(t))_{ll}
};

// Evolves Q along an X-process trajectory (RK4 within sojourns) and
// reconstructs the martingale part of T_l(t) - t/N. Retries with halved
// ode_step while the consistency residual exceeds its tolerance.
MartingaleDiagnostics martingale_diagnostics(const WeightedGraph& g, const Trajectory& traj,
                                             const MartingaleOptions& opts);

}  // namespace reinforce
