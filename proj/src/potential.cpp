#include "reinforce/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "reinforce/error.hpp"

namespace reinforce {

Eigen::MatrixXd generator(const WeightedGraph& g, std::span<const double> T) {
  if (T.size() != g.n_vertices()) throw SizeError("T has wrong length");
  const auto n = static_cast<Eigen::Index>(g.n_vertices());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    const double rate = e.weight * std::exp(T[e.u] + T[e.v]);
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    l(u, v) += rate;
    l(v, u) += rate;
    l(u, u) -= rate;
    l(v, v) -= rate;
  }
  return l;
}

QMatrix solve_q(const WeightedGraph& g, std::span<const double> T) {
  const Eigen::MatrixXd l = generator(g, T);
  const auto n = l.rows();
  QMatrix q;
  q.values = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) return q;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l);
  if (eig.info() != Eigen::Success) throw NumericalError("generator eigendecomposition failed");
  // Eigenvalues ascend; the last one is the zero mode.
  const auto& lambda = eig.eigenvalues();
  q.spectral_gap = std::abs(lambda(n - 2));
  if (!(q.spectral_gap >= kSpectralGapFloor)) {
    std::ostringstream msg;
    msg << "spectral gap " << q.spectral_gap << " below " << kSpectralGapFloor
        << ": the weighted graph is numerically disconnected at this T";
    throw NumericalError(msg.str());
  }
  const auto& v = eig.eigenvectors();
  for (Eigen::Index k = 0; k + 1 < n; ++k) q.values.noalias() += (1.0 / lambda(k)) * v.col(k) * v.col(k).transpose();
  return q;
}

double q_invariant_violation(const Eigen::MatrixXd& q) {
  double worst = (q - q.transpose()).cwiseAbs().maxCoeff();
  worst = std::max(worst, q.rowwise().sum().cwiseAbs().maxCoeff());
  worst = std::max(worst, q.diagonal().maxCoeff());
  return std::max(worst, 0.0);
}

namespace {

// Workspace for derivative evaluations along a sojourn.
struct Flow {
  const WeightedGraph& g;
  std::vector<double> t;
  Eigen::VectorXd grad;

  void derivative(const Eigen::MatrixXd& q, Vertex i, Eigen::MatrixXd& out) {
    out.setZero();
    const auto ii = static_cast<Eigen::Index>(i);
    for (const auto& inc : g.neighbors(i)) {
      const auto jj = static_cast<Eigen::Index>(inc.neighbor);
      const double rate = g.weight(inc.edge) * std::exp(t[i] + t[inc.neighbor]);
      grad = q.col(jj) - q.col(ii);
      out.noalias() += rate * grad * grad.transpose();
    }
  }
};

}  // namespace

Eigen::MatrixXd q_derivative(const WeightedGraph& g, std::span<const double> T, const Eigen::MatrixXd& q, Vertex i) {
  if (T.size() != g.n_vertices()) throw SizeError("T has wrong length");
  Flow flow{g, std::vector<double>(T.begin(), T.end()), {}};
  Eigen::MatrixXd out(q.rows(), q.cols());
  flow.derivative(q, i, out);
  return out;
}

namespace {

struct Segment {
  double start;
  double end;
  Vertex at;
};

std::vector<Segment> sojourns(const Trajectory& traj) {
  std::vector<Segment> out;
  double t = 0.0;
  Vertex at = traj.start;
  for (const auto& j : traj.jumps) {
    if (j.from != at) throw InvalidArgument("trajectory jumps are not contiguous");
    out.push_back({t, j.time, at});
    t = j.time;
    at = j.to;
  }
  out.push_back({t, traj.final_state.clock, at});
  return out;
}

struct ResidualTooLarge {
  double residual;
  double time;
};

MartingaleDiagnostics run_once(const WeightedGraph& g, const Trajectory& traj, const MartingaleOptions& opts,
                               double h) {
  const std::size_t n = g.n_vertices();
  const auto l = static_cast<Eigen::Index>(opts.target);
  const auto segments = sojourns(traj);
  Flow flow{g, std::vector<double>(n, 0.0), {}};
  Eigen::MatrixXd q = solve_q(g, flow.t).values;
  const auto dims = q.rows();
  Eigen::MatrixXd k1(dims, dims), k2(dims, dims), k3(dims, dims), k4(dims, dims), stage(dims, dims);
  Eigen::MatrixXd q_at_last_jump = q;

  MartingaleDiagnostics out;
  out.ode_step = h;
  out.q_diagonal_start = q(l, l);
  const double q0 = q(static_cast<Eigen::Index>(traj.start), l);
  double integral = 0.0;  // accumulated drift correction
  double jumps_of_m = 0.0;

  std::vector<double> marks = opts.checkpoints;
  marks.push_back(traj.final_state.clock);
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;

  auto m_value = [&](double time, Vertex at, const Eigen::MatrixXd& qq) {
    return flow.t[opts.target] - time / static_cast<double>(n) - qq(static_cast<Eigen::Index>(at), l) + q0 + integral;
  };

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    const auto at = static_cast<Eigen::Index>(seg.at);
    double time = seg.start;
    while (true) {
      const bool at_mark = next_mark < marks.size() && marks[next_mark] <= seg.end;
      const double stop = at_mark ? std::max(marks[next_mark], time) : seg.end;
      while (time < stop) {
        const double dt = std::min(h, stop - time);
        const double base = flow.t[seg.at];
        flow.derivative(q, seg.at, k1);
        flow.t[seg.at] = base + dt / 2;
        stage = q + (dt / 2) * k1;
        flow.derivative(stage, seg.at, k2);
        stage = q + (dt / 2) * k2;
        flow.derivative(stage, seg.at, k3);
        flow.t[seg.at] = base + dt;
        stage = q + dt * k3;
        flow.derivative(stage, seg.at, k4);
        const double before = q(at, l);
        q += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        integral += q(at, l) - before;
        time += dt;
      }
      if (!at_mark) break;
      out.series.push_back({marks[next_mark], m_value(time, seg.at, q)});
      ++next_mark;
    }
    if (s + 1 == segments.size()) break;

    // Jump seg.at -> next vertex: consistency, monotonicity, Cauchy-Schwarz.
    const QMatrix direct = solve_q(g, flow.t);
    const double residual = (direct.values - q).cwiseAbs().maxCoeff();
    out.max_residual = std::max(out.max_residual, residual);
    if (residual > opts.residual_tolerance) throw ResidualTooLarge{residual, seg.end};
    const Eigen::MatrixXd delta = q - q_at_last_jump;
    const double slack = 1e-9 * std::max(1.0, q.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < dims; ++i) {
      if (delta(i, i) < -slack) throw InvariantViolation("diagonal of Q decreased along the trajectory");
      for (Eigen::Index k = 0; k < dims; ++k) {
        const double bound = std::sqrt(std::max(delta(i, i), 0.0) * std::max(delta(k, k), 0.0));
        if (std::abs(delta(i, k)) > bound + slack)
          throw InvariantViolation("Q increments violate the Cauchy-Schwarz bound");
      }
    }
    q_at_last_jump = q;
    const Vertex next = segments[s + 1].at;
    const double jump = -(q(static_cast<Eigen::Index>(next), l) - q(at, l));
    jumps_of_m += jump * jump;
  }
  out.quadratic_variation = jumps_of_m;
  out.q_diagonal_end = q(l, l);
  return out;
}

}  // namespace

MartingaleDiagnostics martingale_diagnostics(const WeightedGraph& g, const Trajectory& traj,
                                             const MartingaleOptions& opts) {
  if (traj.kind != ProcessKind::X) throw InvalidArgument("martingale diagnostics need an X-process trajectory");
  if (opts.target >= g.n_vertices()) throw InvalidArgument("target vertex out of range");
  if (!(opts.ode_step > 0.0)) throw InvalidArgument("ode_step must be positive");
  if (traj.final_state.clock > 0.0 && traj.jumps.empty() && traj.final_state.step_count > 0)
    throw InvalidArgument("trajectory was recorded without jumps");
  double h = opts.ode_step;
  ResidualTooLarge last{0.0, 0.0};
  for (unsigned attempt = 0; attempt <= opts.max_halvings; ++attempt, h /= 2) {
    try {
      return run_once(g, traj, opts, h);
    } catch (const ResidualTooLarge& r) {
      last = r;
    }
  }
  std::ostringstream msg;
  msg << "evolved Q drifted from the direct solve by " << last.residual << " at t=" << last.time
      << " even with ode_step " << h * 2 << "; use a smaller ode_step";
  throw NumericalError(msg.str());
}

}  // namespace reinforce
