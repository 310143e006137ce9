#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "delayopt/config.hpp"
#include "delayopt/types.hpp"

namespace delayopt {

/// Finite CSI alphabet: equal-probability bins of the unit-mean exponential,
/// each represented by its conditional mean.
struct CsiAlphabet {
  std::vector<double> levels;
  std::vector<double> probs;

  std::size_t size() const { return levels.size(); }
  double mean() const;
};

CsiAlphabet build_csi_alphabet(int m_levels);

enum class Stream : std::uint32_t { Fading = 1, Arrivals = 2, PacketBits = 3, Events = 4 };

/// Independent random streams, one per (user, process) pair, derived from
/// one seed. Two runs with the same seed see the same fades, the same
/// arrivals and the same packet sizes whatever the policy does.
class RngStreams {
 public:
  RngStreams(std::uint64_t seed, int users);

  std::mt19937_64& stream(Stream type, int user);
  std::mt19937_64& events() { return events_; }
  int users() const { return static_cast<int>(fading_.size()); }

 private:
  std::vector<std::mt19937_64> fading_;
  std::vector<std::mt19937_64> arrivals_;
  std::vector<std::mt19937_64> bits_;
  std::mt19937_64 events_;
};

ChannelState sample_csi(const SystemConfig& config, RngStreams& rng);
/// Quantized fading: each gain drawn from the alphabet's levels.
ChannelState sample_csi(const SystemConfig& config, const CsiAlphabet& alphabet, RngStreams& rng);

std::vector<int> sample_arrivals(const SystemConfig& config, RngStreams& rng);

double sample_packet_bits(const SystemConfig& config, int k, RngStreams& rng);

/// R_k in bits/second: W_s * sum_n s_{k,n} log2(1 + p_{k,n} |H_{k,n}|^2).
double instantaneous_rate(const SystemConfig& config, const ChannelState& channel,
                          const Action& action, int k);
std::vector<double> instantaneous_rates(const SystemConfig& config, const ChannelState& channel,
                                        const Action& action);

/// Bit-exact realisation of the queue recursion: every queue drains
/// rates[k]*tau bits from its head-of-line packet (several packets may
/// complete), arrivals join afterwards and are tail-dropped above N_Q.
std::pair<QueueState, SlotOutcome> queue_step(const QueueState& queue, std::span<const double> rates,
                                              std::span<const int> arrivals,
                                              const SystemConfig& config, RngStreams& rng);

/// One-event-per-slot kernel: user k gains a packet with probability
/// lambda_k*tau and loses one with probability rates[k]*tau/Nbar_k; at most
/// one event happens per slot. Throws RegimeError if the probabilities sum
/// above one.
std::pair<QueueState, SlotOutcome> queue_step_birth_death(const QueueState& queue,
                                                          std::span<const double> rates,
                                                          const SystemConfig& config,
                                                          RngStreams& rng);

/// g = sum_k beta_k Q_k / lambda_k + gamma * sum_{k,n} p_{k,n}.
double per_stage_reward(const QueueState& queue, const Action& action, const SystemConfig& config);
double per_stage_reward(std::span<const int> q, double total_power, const SystemConfig& config);

/// The physical system: channel draws, queue evolution and the random
/// streams behind them. One slot is observe() then apply().
class Plant {
 public:
  Plant(const SystemConfig& config, std::uint64_t seed);

  const SystemConfig& config() const { return config_; }
  const QueueState& queue() const { return queue_; }
  long slot() const { return slot_; }

  /// H(t) for the current slot; drawn once per slot.
  const ChannelState& observe();

  /// Applies the action for the current slot and advances to the next.
  /// Throws ConfigError for a malformed action (bad owner, negative or
  /// non-finite power, wrong subband count).
  SlotOutcome apply(const Action& action);

  /// FNV-1a digest of every channel gain and arrival count so far. Equal
  /// digests across policies certify common random numbers.
  std::uint64_t crn_checksum() const { return checksum_; }

 private:
  SystemConfig config_;
  CsiAlphabet alphabet_;
  RngStreams rng_;
  QueueState queue_;
  ChannelState channel_;
  bool observed_ = false;
  long slot_ = 0;
  std::uint64_t checksum_ = 14695981039346656037ull;
};

}  // namespace delayopt
