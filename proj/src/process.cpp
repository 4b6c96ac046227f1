#include "reinforce/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "reinforce/error.hpp"

namespace reinforce {
namespace {

constexpr std::size_t kMaxDegreeOnStack = 64;

void require_neighbors(const WeightedGraph& g, Vertex v) {
  if (g.degree(v) == 0) throw InvalidArgument("current vertex has no neighbours");
}

// Scratch buffer for per-neighbour weights; heap only for large degrees.
class WeightBuffer {
 public:
  explicit WeightBuffer(std::size_t n) : size_(n) {
    if (n > kMaxDegreeOnStack) heap_.resize(n);
  }
  double* data() { return heap_.empty() ? stack_ : heap_.data(); }
  std::span<const double> span() { return {data(), size_}; }

 private:
  double stack_[kMaxDegreeOnStack];
  std::vector<double> heap_;
  std::size_t size_;
};

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string_view to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::Errw: return "errw";
    case ProcessKind::ContinuousErrw: return "errw-ct";
    case ProcessKind::Vrjp: return "vrjp";
    case ProcessKind::X: return "xproc";
    case ProcessKind::Z: return "z";
  }
  return "unknown";
}

ProcessKind parse_process_kind(std::string_view name) {
  if (name == "errw") return ProcessKind::Errw;
  if (name == "errw-ct") return ProcessKind::ContinuousErrw;
  if (name == "vrjp") return ProcessKind::Vrjp;
  if (name == "xproc" || name == "x") return ProcessKind::X;
  if (name == "z") return ProcessKind::Z;
  throw InvalidArgument("unknown process '" + std::string(name) + "'");
}

ProcessState ProcessState::fresh(const WeightedGraph& g, ProcessKind kind, Vertex start) {
  ProcessState s;
  s.reset(g, kind, start);
  return s;
}

void ProcessState::reset(const WeightedGraph& g, ProcessKind kind, Vertex start) {
  if (start >= g.n_vertices()) throw InvalidArgument("start vertex out of range");
  current = start;
  clock = 0.0;
  step_count = 0;
  local_time.assign(g.n_vertices(), 0.0);
  if (kind == ProcessKind::Errw || kind == ProcessKind::ContinuousErrw) {
    edge_count.resize(g.n_edges());
    for (EdgeId e = 0; e < g.n_edges(); ++e) edge_count[e] = g.weight(e);
  } else {
    edge_count.clear();
  }
}

std::size_t pick_by_weight(std::span<const double> weights, double uniform) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double threshold = uniform * total;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cumulative += weights[k];
    if (threshold < cumulative) return k;
  }
  return weights.size() - 1;
}

Move propose_errw(const WeightedGraph& g, const ProcessState& s, double uniform) {
  require_neighbors(g, s.current);
  const auto nbrs = g.neighbors(s.current);
  WeightBuffer w(nbrs.size());
  for (std::size_t k = 0; k < nbrs.size(); ++k) w.data()[k] = s.edge_count[nbrs[k].edge];
  const auto pick = nbrs[pick_by_weight(w.span(), uniform)];
  return {1.0, pick.neighbor, pick.edge};
}

Vertex errw_step(const WeightedGraph& g, ProcessState& s, Stream& rng) {
  const Move m = propose_errw(g, s, rng.uniform());
  apply_move(s, m);
  return m.target;
}

Move propose_vrjp(const WeightedGraph& g, const ProcessState& s, double exponential, double uniform) {
  require_neighbors(g, s.current);
  const auto nbrs = g.neighbors(s.current);
  WeightBuffer w(nbrs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    const double rate = g.weight(nbrs[k].edge) * (1.0 + s.local_time[nbrs[k].neighbor]);
    w.data()[k] = rate;
    total += rate;
  }
  const auto pick = nbrs[pick_by_weight(w.span(), uniform)];
  return {exponential / total, pick.neighbor, pick.edge};
}

namespace {

template <typename WeightOf>
Move propose_x_with(const WeightedGraph& g, WeightOf weight_of, const ProcessState& s, double exponential,
                    double uniform, double overflow_bound) {
  require_neighbors(g, s.current);
  const auto nbrs = g.neighbors(s.current);
  WeightBuffer w(nbrs.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    const double lw = std::log(weight_of(nbrs[k].edge)) + s.local_time[nbrs[k].neighbor];
    w.data()[k] = lw;
    peak = std::max(peak, lw);
  }
  double scaled_total = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    w.data()[k] = std::exp(w.data()[k] - peak);
    scaled_total += w.data()[k];
  }
  // Total rate at elapsed u is c e^u with log c below; inverting
  // c (e^tau - 1) = E gives the sojourn.
  const double log_c = s.local_time[s.current] + peak + std::log(scaled_total);
  const double sojourn = std::log1p(std::exp(std::log(exponential) - log_c));
  if (s.local_time[s.current] + sojourn > overflow_bound) {
    std::ostringstream msg;
    msg << "X clock overflow: T[" << s.current << "] would exceed " << overflow_bound << " (T = [";
    for (std::size_t i = 0; i < s.local_time.size(); ++i) msg << (i ? ", " : "") << s.local_time[i];
    msg << "], clock " << s.clock << ", step " << s.step_count << ")";
    throw OverflowError(msg.str());
  }
  const auto pick = nbrs[pick_by_weight(w.span(), uniform)];
  return {sojourn, pick.neighbor, pick.edge};
}

}  // namespace

Move propose_x(const WeightedGraph& g, const ProcessState& s, double exponential, double uniform,
               double overflow_bound) {
  return propose_x_with(g, [&g](EdgeId e) { return g.weight(e); }, s, exponential, uniform, overflow_bound);
}

Move propose_x(const WeightedGraph& g, std::span<const double> weights, const ProcessState& s, double exponential,
               double uniform, double overflow_bound) {
  if (weights.size() != g.n_edges()) throw InvalidArgument("weights size does not match edge count");
  return propose_x_with(g, [weights](EdgeId e) { return weights[e]; }, s, exponential, uniform, overflow_bound);
}

Move propose_z(const WeightedGraph& g, std::span<const double> field, const ProcessState& s,
               double exponential, double uniform) {
  require_neighbors(g, s.current);
  if (field.size() != g.n_vertices()) throw InvalidArgument("field size does not match vertex count");
  const auto nbrs = g.neighbors(s.current);
  WeightBuffer w(nbrs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    const double rate = 0.5 * g.weight(nbrs[k].edge) * std::exp(field[nbrs[k].neighbor] - field[s.current]);
    w.data()[k] = rate;
    total += rate;
  }
  const auto pick = nbrs[pick_by_weight(w.span(), uniform)];
  return {exponential / total, pick.neighbor, pick.edge};
}

void apply_move(ProcessState& s, const Move& move) {
  s.local_time[s.current] += move.sojourn;
  s.clock += move.sojourn;
  s.current = move.target;
  ++s.step_count;
  if (!s.edge_count.empty()) s.edge_count[move.edge] += 1.0;
}

StepResult vrjp_step(const WeightedGraph& g, ProcessState& s, Stream& rng) {
  const double e = rng.exponential();
  const Move m = propose_vrjp(g, s, e, rng.uniform());
  apply_move(s, m);
  return {m.sojourn, m.target};
}

StepResult x_process_step(const WeightedGraph& g, ProcessState& s, Stream& rng, double overflow_bound) {
  const double e = rng.exponential();
  const Move m = propose_x(g, s, e, rng.uniform(), overflow_bound);
  apply_move(s, m);
  return {m.sojourn, m.target};
}

StepResult z_process_step(const WeightedGraph& g, std::span<const double> field, ProcessState& s, Stream& rng) {
  const double e = rng.exponential();
  const Move m = propose_z(g, field, s, e, rng.uniform());
  apply_move(s, m);
  return {m.sojourn, m.target};
}

// --- timelines ---------------------------------------------------------------

EdgeTimelines EdgeTimelines::direct(const WeightedGraph& a) {
  EdgeTimelines t;
  t.construction_ = TimelineConstruction::Direct;
  t.edges_.resize(a.n_edges());
  for (EdgeId e = 0; e < a.n_edges(); ++e) t.edges_[e].a = a.weight(e);
  return t;
}

EdgeTimelines EdgeTimelines::conditional(const WeightedGraph& a, std::vector<double> mixing) {
  if (mixing.size() != a.n_edges()) throw InvalidArgument("mixing vector size does not match edge count");
  EdgeTimelines t;
  t.construction_ = TimelineConstruction::Conditional;
  t.edges_.resize(a.n_edges());
  for (EdgeId e = 0; e < a.n_edges(); ++e) {
    if (!(mixing[e] > 0.0)) throw InvalidArgument("mixing variables must be positive");
    t.edges_[e].a = a.weight(e);
    t.edges_[e].mixing = mixing[e];
  }
  return t;
}

double EdgeTimelines::alarm(EdgeId e, std::size_t k, Stream& rng) {
  auto& line = edges_[e];
  while (line.alarms.size() <= k) {
    const double tau = rng.exponential();
    if (construction_ == TimelineConstruction::Direct) {
      line.partial += tau / (line.a + static_cast<double>(line.alarms.size()));
      line.alarms.push_back(line.partial);
    } else {
      line.partial += tau;
      line.alarms.push_back(std::log1p(line.partial / line.mixing));
    }
  }
  return line.alarms[k];
}

void EdgeTimelines::advance(const WeightedGraph& g, Vertex at, double dt) {
  for (const auto& inc : g.neighbors(at)) edges_[inc.edge].clock += dt;
}

void EdgeTimelines::reset() {
  for (auto& line : edges_) {
    line.partial = 0.0;
    line.alarms.clear();
    line.consumed = 0;
    line.clock = 0.0;
  }
}

void EdgeTimelines::reset_conditional(std::span<const double> mixing) {
  if (construction_ != TimelineConstruction::Conditional || mixing.size() != edges_.size()) {
    throw InvalidArgument("reset_conditional needs a conditional construction of matching size");
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) edges_[e].mixing = mixing[e];
  reset();
}

std::size_t EdgeTimelines::count_until(EdgeId e, double t, Stream& rng) {
  std::size_t k = 0;
  while (alarm(e, k, rng) <= t) ++k;
  return k;
}

Move propose_continuous_errw(const WeightedGraph& g, const ProcessState& s, EdgeTimelines& timelines,
                             Stream& rng) {
  require_neighbors(g, s.current);
  Move best{std::numeric_limits<double>::infinity(), s.current, 0};
  // Incidence lists are in increasing edge order, so strict comparison
  // resolves ties toward the lowest edge index.
  for (const auto& inc : g.neighbors(s.current)) {
    const double gap = timelines.next_alarm(inc.edge, rng) - timelines.edge_clock(inc.edge);
    if (gap < best.sojourn) best = {gap, inc.neighbor, inc.edge};
  }
  best.sojourn = std::max(best.sojourn, 0.0);
  return best;
}

void apply_continuous_errw(const WeightedGraph& g, ProcessState& s, EdgeTimelines& timelines, const Move& move) {
  timelines.advance(g, s.current, move.sojourn);
  timelines.consume(move.edge);
  apply_move(s, move);
}

JumpEvent continuous_errw_step(const WeightedGraph& g, ProcessState& s, EdgeTimelines& timelines, Stream& rng) {
  const Move m = propose_continuous_errw(g, s, timelines, rng);
  apply_continuous_errw(g, s, timelines, m);
  return {s.clock, m.target};
}

GammaCoupling sample_gamma_coupling(const WeightedGraph& a, Stream& rng, TimelineConstruction construction,
                                    double yule_horizon) {
  GammaCoupling out;
  out.mixing.resize(a.n_edges());
  if (construction == TimelineConstruction::Conditional) {
    for (EdgeId e = 0; e < a.n_edges(); ++e) out.mixing[e] = rng.gamma(a.weight(e));
    out.timelines = EdgeTimelines::conditional(a, out.mixing);
    return out;
  }
  if (!(yule_horizon > 0.0) || !std::isfinite(yule_horizon)) {
    throw InvalidArgument("Yule horizon must be positive and finite");
  }
  out.timelines = EdgeTimelines::direct(a);
  for (EdgeId e = 0; e < a.n_edges(); ++e) {
    const double births = static_cast<double>(out.timelines.count_until(e, yule_horizon, rng));
    out.mixing[e] = (a.weight(e) + births) * std::exp(-yule_horizon);
  }
  return out;
}

// --- time changes ---------------------------------------------------------------

TimeChange parse_time_change(std::string_view name) {
  if (name == "A") return TimeChange::A;
  if (name == "A_inv" || name == "AInv") return TimeChange::AInv;
  if (name == "B") return TimeChange::B;
  if (name == "C") return TimeChange::C;
  if (name == "D") return TimeChange::D;
  throw InvalidArgument("unknown time change '" + std::string(name) + "'");
}

double time_change(TimeChange kind, std::span<const double> local_times) {
  double total = 0.0;
  for (double x : local_times) {
    if (!(x >= 0.0)) throw InvalidArgument("local times must be nonnegative");
    switch (kind) {
      case TimeChange::A: total += std::log1p(x); break;
      case TimeChange::AInv: total += std::expm1(x); break;
      case TimeChange::B: total += std::sqrt(1.0 + x) - 1.0; break;
      case TimeChange::C: total += std::expm1(2.0 * x); break;
      case TimeChange::D: total += x * (2.0 + x); break;
    }
  }
  return total;
}

// --- trajectories ------------------------------------------------------------------

std::vector<double> centred_occupation(ProcessKind kind, std::span<const double> local_time) {
  std::vector<double> out(local_time.begin(), local_time.end());
  if (kind == ProcessKind::Vrjp) {
    for (double& x : out) x = std::log1p(x);
  } else if (kind != ProcessKind::X) {
    throw InvalidArgument("centred occupation is defined for the VRJP and X processes");
  }
  double mean = 0.0;
  for (double x : out) mean += x;
  mean /= static_cast<double>(out.size());
  for (double& x : out) x -= mean;
  return out;
}

namespace {

class CheckpointRecorder {
 public:
  CheckpointRecorder(ProcessKind kind, std::span<const double> times, Trajectory& traj)
      : kind_(kind), times_(times), traj_(traj) {
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw InvalidArgument("checkpoint times must be strictly increasing");
    }
  }

  // Records every pending checkpoint t <= limit, assuming the walker sits
  // at s.current from s.clock onward.
  void record_until(const ProcessState& s, double limit) {
    while (next_ < times_.size() && times_[next_] <= limit) {
      const double t = times_[next_++];
      if (t < s.clock) continue;  // before the start
      Checkpoint c{t, s.local_time, {}};
      c.local_time[s.current] += t - s.clock;
      if (kind_ == ProcessKind::Vrjp || kind_ == ProcessKind::X) c.centred = centred_occupation(kind_, c.local_time);
      traj_.checkpoints.push_back(std::move(c));
    }
  }

 private:
  ProcessKind kind_;
  std::span<const double> times_;
  Trajectory& traj_;
  std::size_t next_ = 0;
};

}  // namespace

Trajectory run_until(const WeightedGraph& g, const RunOptions& opts) {
  const bool finite_horizon = std::isfinite(opts.horizon);
  if (!finite_horizon && opts.max_steps == std::numeric_limits<std::uint64_t>::max()) {
    throw InvalidArgument("run_until needs a finite horizon or a step budget");
  }
  if (opts.kind == ProcessKind::Z && opts.field.size() != g.n_vertices()) {
    throw InvalidArgument("the Z process needs a field with one value per vertex");
  }
  if (finite_horizon && opts.horizon < 0.0) throw InvalidArgument("horizon must be nonnegative");

  Trajectory traj;
  traj.kind = opts.kind;
  traj.start = opts.start;
  ProcessState s = ProcessState::fresh(g, opts.kind, opts.start);
  Stream rng(opts.seed, opts.stream);
  EdgeTimelines timelines;
  if (opts.kind == ProcessKind::ContinuousErrw) timelines = EdgeTimelines::direct(g);
  CheckpointRecorder recorder(opts.kind, opts.checkpoints, traj);

  try {
    while (true) {
      if (finite_horizon && s.clock >= opts.horizon) break;
      if (s.step_count >= opts.max_steps) {
        traj.incomplete = finite_horizon;
        break;
      }
      Move m{};
      switch (opts.kind) {
        case ProcessKind::Errw: m = propose_errw(g, s, rng.uniform()); break;
        case ProcessKind::ContinuousErrw: m = propose_continuous_errw(g, s, timelines, rng); break;
        case ProcessKind::Vrjp: {
          const double e = rng.exponential();
          m = propose_vrjp(g, s, e, rng.uniform());
          break;
        }
        case ProcessKind::X: {
          const double e = rng.exponential();
          m = propose_x(g, s, e, rng.uniform(), opts.overflow_bound);
          break;
        }
        case ProcessKind::Z: {
          const double e = rng.exponential();
          m = propose_z(g, opts.field, s, e, rng.uniform());
          break;
        }
      }
      if (finite_horizon && s.clock + m.sojourn > opts.horizon) {
        recorder.record_until(s, opts.horizon);
        const double rest = opts.horizon - s.clock;
        s.local_time[s.current] += rest;
        s.clock = opts.horizon;
        break;
      }
      recorder.record_until(s, s.clock + m.sojourn);
      const Vertex from = s.current;
      if (opts.kind == ProcessKind::ContinuousErrw) {
        apply_continuous_errw(g, s, timelines, m);
      } else {
        apply_move(s, m);
      }
      if (opts.record_jumps) traj.jumps.push_back({s.clock, from, s.current});
    }
    if (!traj.incomplete) recorder.record_until(s, s.clock);
  } catch (const OverflowError& e) {
    traj.aborted = true;
    traj.incomplete = true;
    traj.diagnostic = e.what();
  }
  traj.final_state = std::move(s);
  return traj;
}

void write_jumps_jsonl(std::ostream& out, const Trajectory& traj) {
  for (const auto& j : traj.jumps) {
    out << "{\"t\":" << format_double(j.time) << ",\"from\":" << j.from << ",\"to\":" << j.to << "}\n";
  }
}

void write_checkpoints_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t n = traj.final_state.local_time.size();
  out << "t";
  for (std::size_t i = 0; i < n; ++i) out << ",T_" << i;
  out << "\n";
  for (const auto& c : traj.checkpoints) {
    out << format_double(c.time);
    for (double x : c.local_time) out << "," << format_double(x);
    out << "\n";
  }
}

}  // namespace reinforce
