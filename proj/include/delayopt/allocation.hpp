#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "delayopt/config.hpp"
#include "delayopt/types.hpp"

namespace delayopt {

/// Estimated potentials, either over the joint queue state (N_Q+1)^K or as
/// K per-user tables of N_Q+1 entries. Joint index: user 0 is the most
/// significant digit, so with K=2, N_Q=1 the states 00,01,10,11 map to 0..3.
class PotentialTable {
 public:
  enum class Kind { Joint, Decomposed };

  static PotentialTable joint(int users, int n_q);
  static PotentialTable decomposed(int users, int n_q);

  Kind kind() const { return kind_; }
  int users() const { return users_; }
  int n_q() const { return n_q_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Joint table only.
  std::size_t index(std::span<const int> q) const;
  std::vector<int> state(std::size_t index) const;

  /// Per-user table k (decomposed only).
  std::span<double> user(int k);
  std::span<const double> user(int k) const;

  /// V(Q): the joint entry, or sum_k V_k(Q_k).
  double value(std::span<const int> q) const;

 private:
  PotentialTable(Kind kind, int users, int n_q, std::size_t size);

  Kind kind_;
  int users_;
  int n_q_;
  std::vector<double> values_;
};

/// Delta_k V(Q) = V(Q) - V(Q with Q_k -> max(Q_k - 1, 0)). For a decomposed
/// table this is V_k(Q_k) - V_k(Q_k - 1).
double potential_increment(const PotentialTable& table, std::span<const int> q, int k);

/// (level - 1/gain)^+, zero when gain <= 0.
double waterfill_power(double gain, double water_level);

/// Surplus X = c ln(1 + gain p*) - gamma p* at p* = waterfill_power(gain, c/gamma),
/// where c is the scaled increment (tau/Nbar_k) Delta_k V in natural-log units.
double subcarrier_metric(double gain, double delta_v_scaled, double gamma);

/// c_k = Delta_k V(Q) * W_s tau / (Nbar_k ln 2) for every user.
std::vector<double> scaled_increments(const PotentialTable& table, std::span<const int> q,
                                      const SystemConfig& config);

/// Queue-aware rule: each subband goes to the user with the largest
/// surplus X_{k,n} (ties to the lowest index) at its water-filling power.
/// When every surplus is zero the subband goes to that argmax with zero power.
Action allocate_optimal(const ChannelState& channel, std::span<const int> q, const PotentialTable& table,
                        const SystemConfig& config);
Action allocate_optimal(const ChannelState& channel, std::span<const double> scaled, double gamma);

/// CSI-only rule: each subband goes to the user with the largest gain (ties
/// to the lowest index), powered from that user's own increment.
Action allocate_csi_only(const ChannelState& channel, std::span<const int> q, const PotentialTable& table,
                         const SystemConfig& config);
Action allocate_csi_only(const ChannelState& channel, std::span<const double> scaled, double gamma);

/// Per-channel-realisation part of the Bellman minimand:
/// gamma * sum p - sum_k c_k sum_n s_{k,n} ln(1 + p_{k,n} |H_{k,n}|^2).
double allocation_objective(const ChannelState& channel, const Action& action,
                            std::span<const double> scaled, double gamma);

}  // namespace delayopt
