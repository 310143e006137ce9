#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delayopt/allocation.hpp"
#include "delayopt/baselines.hpp"
#include "delayopt/calibration.hpp"
#include "delayopt/config.hpp"
#include "delayopt/learner.hpp"
#include "delayopt/oracle.hpp"
#include "delayopt/types.hpp"

namespace delayopt {

/// What a scheduler sees at the start of a slot.
struct SlotView {
  const SystemConfig& config;
  const ChannelState& channel;
  const QueueState& queue;
  std::span<const long> hol_delay;  // slots waited by each head-of-line packet, 0 if empty
  long slot;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual Action decide(const SlotView& view) = 0;
};

/// Greedy policy of a frozen potential table.
class TableScheduler : public Scheduler {
 public:
  TableScheduler(PotentialTable table, SubcarrierRule rule) : table_(std::move(table)), rule_(rule) {}
  Action decide(const SlotView& view) override;
  const PotentialTable& table() const { return table_; }

 private:
  PotentialTable table_;
  SubcarrierRule rule_;
};

class BaselineScheduler : public Scheduler {
 public:
  explicit BaselineScheduler(BaselineKind kind) : kind_(kind) {}
  Action decide(const SlotView& view) override;

 private:
  BaselineKind kind_;
};

/// Serves user k on subband k at exactly rate_bps[k] whenever it is
/// backlogged (needs N_F >= K). Used for queueing sanity checks.
class FixedRateScheduler : public Scheduler {
 public:
  explicit FixedRateScheduler(std::vector<double> rate_bps) : rate_(std::move(rate_bps)) {}
  Action decide(const SlotView& view) override;

 private:
  std::vector<double> rate_;
};

struct Metrics {
  std::vector<double> avg_queue;
  std::vector<double> avg_delay_littles;  // seconds
  std::vector<double> avg_delay_sojourn;  // seconds
  std::vector<double> drop_rate;
  std::vector<long> departures;
  double weighted_delay = 0.0;  // sum_k beta_k * avg_delay_littles[k]
  double avg_power = 0.0;
  long slots = 0;
  std::uint64_t crn_checksum = 0;
  std::vector<std::string> warnings;
};

/// Simulates warmup + measurement slots from empty queues; statistics cover
/// the measurement window only. Every action is validated before use.
Metrics run_replication(const SystemConfig& config, Scheduler& scheduler, std::uint64_t seed, long warmup_slots,
                        long measure_slots);

enum class PolicyKind { Decomposed, Joint, MLWDF, RoundRobin };

std::string to_string(PolicyKind kind);
/// Accepts decomposed|joint|mlwdf|round_robin.
PolicyKind parse_policy(const std::string& name);

/// A policy ready to simulate: a calibrated power price and, for the learning
/// policies, the potential table trained at that price.
struct PreparedPolicy {
  PolicyKind kind = PolicyKind::Decomposed;
  double gamma = 1.0;
  std::optional<PotentialTable> table;
  std::optional<TrainResult> training;
  std::optional<CalibrationResult> calibration;

  std::unique_ptr<Scheduler> scheduler() const;
};

/// Seed used for training, derived from a replication seed so that training
/// and evaluation draw different sample paths.
std::uint64_t training_seed(std::uint64_t seed);

/// Trains (learning policies) and, when `calibrate` is set, bisects gamma so
/// the measured average power matches config.P_0. The measurement for each
/// trial gamma uses `seed` and the settings' warmup/measure windows.
PreparedPolicy prepare_policy(PolicyKind kind, const SystemConfig& config, const SolverSettings& settings,
                              std::uint64_t seed, bool calibrate);

struct ExperimentSpec {
  SystemConfig config;
  SolverSettings settings;
  std::vector<PolicyKind> policies;
  std::vector<double> snr_db;
  std::vector<std::uint64_t> seeds;
  bool calibrate = true;
};

struct SweepRow {
  PolicyKind policy = PolicyKind::Decomposed;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  Metrics metrics;
  std::string error;  // nonempty when the cell failed
};

/// Every (policy, snr, seed) cell; policies are prepared once per (policy,
/// snr) on the first seed and evaluated on every seed with common random
/// numbers. Rows come back ordered by (policy, snr, seed) whatever `jobs` is.
std::vector<SweepRow> sweep(const ExperimentSpec& spec, int jobs = 1);

/// The fields of a sweep row that paired comparisons need.
struct SweepRecord {
  std::string policy;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double weighted_delay = 0.0;
};

std::vector<SweepRecord> to_records(const std::vector<SweepRow>& rows);

/// P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p_value(int wins, int n);

struct Comparison {
  std::string policy_a;
  std::string policy_b;
  double snr_db = 0.0;
  std::vector<std::pair<std::uint64_t, double>> deltas;  // (seed, delay_b - delay_a)
  int n = 0;       // nonzero deltas
  int wins_a = 0;  // seeds where a has the lower delay
  double mean_delta = 0.0;
  double stderr_delta = 0.0;
  double p_value = 1.0;  // one-sided: a better than b
};

/// Paired per-seed comparison of every policy pair at every SNR.
std::vector<Comparison> compare(const std::vector<SweepRecord>& records);

/// Fraction of subbands where the queue-aware rule and the CSI-only rule pick
/// the same user, over slots of the CSI-only policy driven by `table`.
/// Only subbands on which the queue-aware rule transmits are counted.
struct AgreementStats {
  double rate = 0.0;
  double stderr = 0.0;
  long subbands = 0;
  long draws = 0;
};

AgreementStats assignment_agreement(const SystemConfig& config, const PotentialTable& table, long warmup_slots,
                                    long draws, std::uint64_t seed);

}  // namespace delayopt
