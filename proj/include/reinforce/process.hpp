#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reinforce/graph.hpp"
#include "reinforce/rng.hpp"

namespace reinforce {

enum class ProcessKind {
  Errw,            // discrete edge-reinforced walk, weights = initial edge counts
  ContinuousErrw,  // Rubin construction on per-edge alarm timelines
  Vrjp,            // vertex-reinforced jump process, weights = conductances
  X,               // VRJP in the exponential clock
  Z,               // Markov jump process in a fixed field U
};

std::string_view to_string(ProcessKind kind);
ProcessKind parse_process_kind(std::string_view name);

inline constexpr double kDefaultOverflowBound = 500.0;

// Walker position plus per-vertex elapsed local times. The VRJP's L_i is
// 1 + local_time[i]; for X the entries are T_i, for Z they are l_i. For the
// discrete walk every step accrues one unit at the departed vertex.
struct ProcessState {
  Vertex current = 0;
  double clock = 0.0;
  std::vector<double> local_time;
  std::vector<double> edge_count;  // discrete and Rubin ERRW only
  std::uint64_t step_count = 0;

  static ProcessState fresh(const WeightedGraph& g, ProcessKind kind, Vertex start = 0);
  // Restart in place, keeping allocations.
  void reset(const WeightedGraph& g, ProcessKind kind, Vertex start = 0);
};

// A proposed jump: how long the walker stays and where it goes.
struct Move {
  double sojourn;
  Vertex target;
  EdgeId edge;
};

struct StepResult {
  double sojourn;
  Vertex vertex;
};

struct JumpEvent {
  double time;
  Vertex vertex;
};

// Picks the neighbour of `from` whose cumulative weight first exceeds
// uniform * total. `weights` is indexed like g.neighbors(from).
std::size_t pick_by_weight(std::span<const double> weights, double uniform);

// --- discrete ERRW ---------------------------------------------------------

Move propose_errw(const WeightedGraph& g, const ProcessState& s, double uniform);
Vertex errw_step(const WeightedGraph& g, ProcessState& s, Stream& rng);

// --- VRJP, X, Z ------------------------------------------------------------

// `exponential` is the unit-rate variate driving the sojourn, `uniform`
// picks the target. Sharing both between processes gives pathwise couplings.
Move propose_vrjp(const WeightedGraph& g, const ProcessState& s, double exponential, double uniform);
Move propose_x(const WeightedGraph& g, const ProcessState& s, double exponential, double uniform,
               double overflow_bound = kDefaultOverflowBound);
// Same with explicit edge-indexed conductances in place of the graph weights.
Move propose_x(const WeightedGraph& g, std::span<const double> weights, const ProcessState& s, double exponential,
               double uniform, double overflow_bound = kDefaultOverflowBound);
Move propose_z(const WeightedGraph& g, std::span<const double> field, const ProcessState& s,
               double exponential, double uniform);

StepResult vrjp_step(const WeightedGraph& g, ProcessState& s, Stream& rng);
StepResult x_process_step(const WeightedGraph& g, ProcessState& s, Stream& rng,
                          double overflow_bound = kDefaultOverflowBound);
StepResult z_process_step(const WeightedGraph& g, std::span<const double> field, ProcessState& s, Stream& rng);

// Accrues the sojourn at the current vertex, then crosses move.edge.
void apply_move(ProcessState& s, const Move& move);

// --- Rubin timelines and the Gamma/Yule coupling ----------------------------

enum class TimelineConstruction {
  Direct,       // V_k = sum_{l<k} tau_l / (a + l)
  Conditional,  // given W ~ Gamma(a, 1): V_k = log(1 + p_k / W), p_k unit Poisson arrivals
};

// Per-edge alarm sequences, extended lazily on demand. Edge clocks advance
// only while the walker sits at an endpoint.
class EdgeTimelines {
 public:
  EdgeTimelines() = default;
  // Direct construction with initial weights a (the graph weights).
  static EdgeTimelines direct(const WeightedGraph& a);
  // Conditional construction with given mixing variables W.
  static EdgeTimelines conditional(const WeightedGraph& a, std::vector<double> mixing);

  TimelineConstruction construction() const { return construction_; }
  std::size_t n_edges() const { return edges_.size(); }

  // k-th alarm (0-based) of edge e, generating as needed.
  double alarm(EdgeId e, std::size_t k, Stream& rng);
  // Alarms already generated (never regenerated).
  std::span<const double> generated(EdgeId e) const { return edges_[e].alarms; }
  std::size_t consumed(EdgeId e) const { return edges_[e].consumed; }
  double next_alarm(EdgeId e, Stream& rng) { return alarm(e, edges_[e].consumed, rng); }
  double edge_clock(EdgeId e) const { return edges_[e].clock; }

  void advance(const WeightedGraph& g, Vertex at, double dt);
  void consume(EdgeId e) { ++edges_[e].consumed; }

  // Drops generated alarms and clocks, keeping the construction and weights.
  void reset();
  // Replace the mixing variables of a conditional construction and reset.
  void reset_conditional(std::span<const double> mixing);

  // Number of alarms at or before clock value t (generates up to t).
  std::size_t count_until(EdgeId e, double t, Stream& rng);

 private:
  struct Line {
    double a = 1.0;
    double mixing = 0.0;  // W_e in the conditional construction
    double partial = 0.0; // running exponential sum
    std::vector<double> alarms;
    std::size_t consumed = 0;
    double clock = 0.0;
  };
  TimelineConstruction construction_ = TimelineConstruction::Direct;
  std::vector<Line> edges_;
};

Move propose_continuous_errw(const WeightedGraph& g, const ProcessState& s, EdgeTimelines& timelines,
                             Stream& rng);
// Applies a Rubin move: advances the adjacent edge clocks, consumes the
// ringing alarm and crosses.
void apply_continuous_errw(const WeightedGraph& g, ProcessState& s, EdgeTimelines& timelines, const Move& move);
JumpEvent continuous_errw_step(const WeightedGraph& g, ProcessState& s, EdgeTimelines& timelines, Stream& rng);

struct GammaCoupling {
  std::vector<double> mixing;  // W_e (exact for Conditional, Yule estimate for Direct)
  EdgeTimelines timelines;
};

inline constexpr double kDefaultYuleHorizon = 12.0;

// Direct: runs each edge's Yule process to `yule_horizon` and estimates
// W_e = N_t e^{-t}. Conditional: draws W_e ~ Gamma(a_e, 1) exactly.
GammaCoupling sample_gamma_coupling(const WeightedGraph& a, Stream& rng, TimelineConstruction construction,
                                    double yule_horizon = kDefaultYuleHorizon);

// --- time changes ------------------------------------------------------------

enum class TimeChange { A, AInv, B, C, D };

TimeChange parse_time_change(std::string_view name);

// A = sum log(1 + l), AInv = sum (e^T - 1), B = sum (sqrt(1 + l) - 1),
// C = sum (e^{2T} - 1), D = sum ((1 + l)^2 - 1), all on elapsed local times.
double time_change(TimeChange kind, std::span<const double> local_times);

// --- trajectories --------------------------------------------------------------

struct JumpRecord {
  double time;
  Vertex from;
  Vertex to;
};

struct Checkpoint {
  double time;
  std::vector<double> local_time;
  std::vector<double> centred;  // VRJP and X only: T_i - t/N in the X clock
};

struct Trajectory {
  ProcessKind kind = ProcessKind::Errw;
  Vertex start = 0;
  std::vector<JumpRecord> jumps;
  std::vector<Checkpoint> checkpoints;
  ProcessState final_state;
  bool incomplete = false;
  bool aborted = false;
  std::string diagnostic;
};

struct RunOptions {
  ProcessKind kind = ProcessKind::Errw;
  Vertex start = 0;
  // Continuous processes stop at `horizon` in their own clock; the
  // discrete walk counts steps. Either bound may be left open.
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max();
  std::vector<double> checkpoints;  // increasing times
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> field;        // U for the Z process
  double overflow_bound = kDefaultOverflowBound;
  bool record_jumps = true;
};

// Deterministic given (options, seed, stream). Stopping on the step budget
// before a finite horizon marks the trajectory incomplete; an overflow of
// the X clock marks it aborted with the offending state in `diagnostic`.
Trajectory run_until(const WeightedGraph& g, const RunOptions& opts);

// X-clock centred occupation T_i - t/N for the given local times.
std::vector<double> centred_occupation(ProcessKind kind, std::span<const double> local_time);

// One {"t":..,"from":..,"to":..} object per line.
void write_jumps_jsonl(std::ostream& out, const Trajectory& traj);
// Columns t, T_0..T_{N-1}.
void write_checkpoints_csv(std::ostream& out, const Trajectory& traj);

}  // namespace reinforce
