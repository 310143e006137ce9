#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "delayopt/allocation.hpp"
#include "delayopt/config.hpp"

namespace delayopt {

/// eps_k = a / (b + k)^exponent.
double stepsize(const StepsizeSchedule& schedule, long k);

/// Per-state sums over one regenerative period: reward, next-state
/// potential and visit count, plus the values seen at the first visit.
struct RegenAccumulators {
  std::vector<double> s_g;
  std::vector<double> s_v;
  std::vector<long> l;
  std::vector<double> first_g;
  std::vector<double> first_v;
  std::size_t visited = 0;

  explicit RegenAccumulators(std::size_t states = 0) { reset(states); }

  std::size_t size() const { return l.size(); }
  void reset(std::size_t states);
  void reset() { reset(size()); }
  void accumulate(std::size_t state, double reward, double next_potential);
  /// True once every tracked state has been visited in this period.
  bool complete() const { return visited == l.size(); }
};

/// Applies V(i) += eps * Y(i) to `table` (state 0 is the reference) and
/// returns max_i |eps * Y(i)|. Throws std::logic_error if a state is unvisited.
double potential_update(std::span<double> table, const RegenAccumulators& acc, double eps, Estimator estimator);

/// Y(i) for every state without touching the table.
std::vector<double> update_direction(std::span<const double> table, const RegenAccumulators& acc,
                                     Estimator estimator);

struct TraceRow {
  long period_index = 0;
  int user = -1;  // -1 for the joint learner
  long slots_elapsed = 0;
  double epsilon = 0.0;
  double table_delta_maxnorm = 0.0;
  double running_avg_reward = 0.0;
  double running_avg_power = 0.0;
  double running_weighted_delay = 0.0;  // running average of sum_k beta_k Q_k / lambda_k
  double mean_potential = 0.0;          // mean over all table entries
  std::vector<double> snapshot;  // filled when snapshots are requested
};

struct TrainOptions {
  SolverSettings settings;
  std::uint64_t seed = 1;
  bool snapshots = false;
  /// Starting potentials; empty means settings.initial_potential decides.
  std::vector<double> initial_table;
};

struct TrainResult {
  PotentialTable table = PotentialTable::decomposed(1, 1);
  std::vector<TraceRow> trace;
  bool converged = false;
  std::string stop_reason;  // "delta_v", "max_periods", "train_slots", "period_cap"
  std::string diagnostic;
  long slots = 0;
  std::vector<long> periods;  // completed periods per learner
  std::vector<long> visits;   // total visits per tracked state (coverage)
};

/// Online value iteration on the joint queue state with the queue-aware rule.
TrainResult train_joint(const SystemConfig& config, const TrainOptions& options);

/// K per-user learners sharing one system, CSI-only assignment with per-user powers.
TrainResult train_decomposed(const SystemConfig& config, const TrainOptions& options);

}  // namespace delayopt
