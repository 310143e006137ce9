#pragma once

#include <cstddef>
#include <vector>

namespace delayopt {

/// Per-user, per-subband power gains |H_{k,n}|^2, row-major K x N_F.
struct ChannelState {
  int K = 0;
  int N_F = 0;
  std::vector<double> gain;

  ChannelState() = default;
  ChannelState(int users, int subbands, double fill = 0.0)
      : K(users), N_F(subbands), gain(static_cast<std::size_t>(users) * subbands, fill) {}

  double& operator()(int k, int n) { return gain[static_cast<std::size_t>(k) * N_F + n]; }
  double operator()(int k, int n) const { return gain[static_cast<std::size_t>(k) * N_F + n]; }
};

struct QueueState {
  std::vector<int> q;
  std::vector<double> hol_residual_bits;

  QueueState() = default;
  explicit QueueState(int users) : q(users, 0), hol_residual_bits(users, 0.0) {}

  int users() const { return static_cast<int>(q.size()); }
};

/// Power and subcarrier allocation. Every subband has exactly one owner,
/// so the assignment constraint sum_k s_{k,n} = 1 holds by construction;
/// `power[n]` is the owner's power on subband n.
struct Action {
  std::vector<int> owner;
  std::vector<double> power;

  Action() = default;
  explicit Action(int subbands) : owner(subbands, 0), power(subbands, 0.0) {}

  int subbands() const { return static_cast<int>(owner.size()); }
  int s(int k, int n) const { return owner[n] == k ? 1 : 0; }
  double p(int k, int n) const { return owner[n] == k ? power[n] : 0.0; }
  double total_power() const;
  double user_power(int k) const;

  /// True when every owner is a valid user index and every power is finite and >= 0.
  bool valid(int users) const;

  bool operator==(const Action&) const = default;
};

struct SlotOutcome {
  std::vector<int> served_packets;
  std::vector<int> arrivals;
  std::vector<int> dropped;
  double power_spent = 0.0;
  std::vector<double> rate;  // bits/second
};

}  // namespace delayopt
