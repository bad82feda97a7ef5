#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etmpc/costmodel.hpp"
#include "etmpc/netio.hpp"
#include "etmpc/problem.hpp"

namespace etmpc {

struct SimConfig {
  Vector x0;
  int max_steps = 400;
  Variant variant = Variant::A1;
  BackendKind backend = BackendKind::lu_pivoted;
  RealCodec codec = RealCodec::binary64;
  /// Stop once ||x||_inf <= stop_eps for stop_steps consecutive steps; 0 disables.
  double stop_eps = 1e-4;
  int stop_steps = 5;
  /// Added to A x + B u after each step; empty means none.
  std::function<Vector(int k, const Vector& x)> disturbance;
  /// Replies slower than this many seconds are counted in Trajectory::slow_replies; 0 disables.
  double sample_period = 0.0;
  /// Receiver-side recomputation check of Phi for A2.
  bool verify_phi = false;
  QpOptions qp_options;
};

struct StepRecord {
  int k = 0;
  Vector x, u;
  /// A new law was installed for this step, built from a request at x(k)
  /// (predicted one step earlier, or x0 for k = 0).
  bool event = false;
  std::int64_t q_a = -1;  ///< size of the new active set; -1 without an event or for A4
  std::int64_t bits = 0;  ///< semantic bits received for the event
  std::int64_t frame_bytes = 0;
  FlopCounter instrumented;  ///< naive backend only
  std::int64_t analytic_inv = 0, analytic_mat = 0, analytic_flops = 0;
  bool fallback = false;  ///< u came from a local QP solve because the event was degenerate
};

struct Trajectory {
  std::vector<StepRecord> steps;
  Vector x_final;  ///< state after the last recorded step
  bool converged = false;
  int events = 0;
  int fallbacks = 0;
  int slow_replies = 0;
  std::uint64_t frames_sent = 0, frames_received = 0;
  /// Set when the run ended early on an error; steps hold the partial trajectory.
  std::optional<std::string> aborted;
  std::vector<std::string> log;
};

/// Event-triggered loop. The first law comes from a forced request at x0; after
/// that a request is sent only when the predicted next state leaves the
/// current polytope. `client` may be null, in which case an in-process central
/// node with a loopback transport is used.
Trajectory simulate_event_triggered(const MpcProblem& problem, const CondensedQp& qp, const SimConfig& config,
                                    net::LocalClient* client = nullptr);

/// Solves the QP at every step; the reference loop. Infeasibility ends the run
/// with `aborted` set.
Trajectory simulate_classical(const MpcProblem& problem, const CondensedQp& qp, const SimConfig& config);

/// max_k ||a.x(k) - b.x(k)||_inf over the common prefix, plus the final states.
/// Infinity if the lengths differ.
double max_state_deviation(const Trajectory& a, const Trajectory& b);

/// Uniform rejection sampling over the state box, keeping states where the
/// QP is feasible. Deterministic in `seed`. Throws Error(invalid_argument) after
/// 10^6 rejections for a single sample.
std::vector<Vector> sample_feasible_states(const MpcProblem& problem, const CondensedQp& qp, int count,
                                           std::uint64_t seed);

struct VariantAggregate {
  Variant variant = Variant::A1;
  int runs = 0;
  std::int64_t steps = 0;
  std::int64_t events = 0;  ///< including the initial event of each run
  std::int64_t fallbacks = 0;
  std::int64_t total_bits = 0;
  std::int64_t analytic_inv = 0, analytic_mat = 0;
  std::int64_t instrumented_inv = 0, instrumented_mat = 0;
  std::map<std::int64_t, std::int64_t> q_a_histogram;
  double max_deviation = 0.0;  ///< against the classical loop
  std::vector<std::string> failures;

  double event_rate() const { return steps ? static_cast<double>(events) / static_cast<double>(steps) : 0.0; }
};

struct BatchReport {
  std::vector<Vector> initial_states;
  std::vector<VariantAggregate> variants;
};

/// Runs every variant from the same sampled initial states and compares each
/// run against the classical loop. Runs are spread over `threads` workers
/// (0 = hardware concurrency); results do not depend on the thread count.
BatchReport run_batch(const MpcProblem& problem, const CondensedQp& qp, int count, std::uint64_t seed,
                      const std::vector<Variant>& variants, const SimConfig& base, unsigned threads = 0);

/// k,x0..,u0..,e,q_A,bits,flops_inv,flops_mat
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// variant,runs,steps,events,event_rate,bits,flops_inv,flops_mat,instrumented_inv,instrumented_mat,fallbacks,max_deviation
void write_batch_csv(std::ostream& out, const BatchReport& report);
/// variant,q_A,count
void write_histogram_csv(std::ostream& out, const BatchReport& report);

}  // namespace etmpc
