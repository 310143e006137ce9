#include "delayopt/allocation.hpp"

#include <cmath>

#include "delayopt/errors.hpp"

namespace delayopt {

PotentialTable::PotentialTable(Kind kind, int users, int n_q, std::size_t size)
    : kind_(kind), users_(users), n_q_(n_q), values_(size, 0.0) {}

PotentialTable PotentialTable::joint(int users, int n_q) {
  if (users < 1 || n_q < 1) throw ConfigError("potential table needs K >= 1 and N_Q >= 1");
  std::size_t size = 1;
  for (int k = 0; k < users; ++k) {
    size *= static_cast<std::size_t>(n_q + 1);
    if (size > (std::size_t{1} << 32)) throw ConfigError("joint potential table too large");
  }
  return PotentialTable(Kind::Joint, users, n_q, size);
}

PotentialTable PotentialTable::decomposed(int users, int n_q) {
  if (users < 1 || n_q < 1) throw ConfigError("potential table needs K >= 1 and N_Q >= 1");
  return PotentialTable(Kind::Decomposed, users, n_q, static_cast<std::size_t>(users) * (n_q + 1));
}

std::size_t PotentialTable::index(std::span<const int> q) const {
  std::size_t idx = 0;
  for (int k = 0; k < users_; ++k) idx = idx * (n_q_ + 1) + static_cast<std::size_t>(q[k]);
  return idx;
}

std::vector<int> PotentialTable::state(std::size_t index) const {
  std::vector<int> q(users_, 0);
  for (int k = users_ - 1; k >= 0; --k) {
    q[k] = static_cast<int>(index % (n_q_ + 1));
    index /= (n_q_ + 1);
  }
  return q;
}

std::span<double> PotentialTable::user(int k) {
  return std::span<double>(values_).subspan(static_cast<std::size_t>(k) * (n_q_ + 1), n_q_ + 1);
}

std::span<const double> PotentialTable::user(int k) const {
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(k) * (n_q_ + 1), n_q_ + 1);
}

double PotentialTable::value(std::span<const int> q) const {
  if (kind_ == Kind::Joint) return values_[index(q)];
  double v = 0.0;
  for (int k = 0; k < users_; ++k) v += user(k)[q[k]];
  return v;
}

double potential_increment(const PotentialTable& table, std::span<const int> q, int k) {
  if (q[k] == 0) return 0.0;
  if (table.kind() == PotentialTable::Kind::Decomposed) {
    const auto v = table.user(k);
    return v[q[k]] - v[q[k] - 1];
  }
  const std::size_t here = table.index(q);
  // Lowering digit k by one moves the index down by (N_Q+1)^(K-1-k).
  std::size_t stride = 1;
  for (int j = table.users() - 1; j > k; --j) stride *= static_cast<std::size_t>(table.n_q() + 1);
  const auto v = table.values();
  return v[here] - v[here - stride];
}

double waterfill_power(double gain, double water_level) {
  if (!(gain > 0.0) || !(water_level > 0.0)) return 0.0;
  const double p = water_level - 1.0 / gain;
  return p > 0.0 ? p : 0.0;
}

double subcarrier_metric(double gain, double delta_v_scaled, double gamma) {
  const double p = waterfill_power(gain, delta_v_scaled / gamma);
  if (p <= 0.0) return 0.0;
  return delta_v_scaled * std::log1p(gain * p) - gamma * p;
}

std::vector<double> scaled_increments(const PotentialTable& table, std::span<const int> q,
                                      const SystemConfig& config) {
  std::vector<double> c(config.K);
  for (int k = 0; k < config.K; ++k) c[k] = potential_increment(table, q, k) * config.service_coefficient(k);
  return c;
}

Action allocate_optimal(const ChannelState& channel, std::span<const double> scaled, double gamma) {
  Action a(channel.N_F);
  for (int n = 0; n < channel.N_F; ++n) {
    int best = 0;
    double best_x = -1.0;
    for (int k = 0; k < channel.K; ++k) {
      const double x = subcarrier_metric(channel(k, n), scaled[k], gamma);
      if (x > best_x) {
        best_x = x;
        best = k;
      }
    }
    a.owner[n] = best;
    a.power[n] = best_x > 0.0 ? waterfill_power(channel(best, n), scaled[best] / gamma) : 0.0;
  }
  return a;
}

Action allocate_optimal(const ChannelState& channel, std::span<const int> q, const PotentialTable& table,
                        const SystemConfig& config) {
  return allocate_optimal(channel, scaled_increments(table, q, config), config.gamma);
}

Action allocate_csi_only(const ChannelState& channel, std::span<const double> scaled, double gamma) {
  Action a(channel.N_F);
  for (int n = 0; n < channel.N_F; ++n) {
    int best = 0;
    for (int k = 1; k < channel.K; ++k)
      if (channel(k, n) > channel(best, n)) best = k;
    a.owner[n] = best;
    a.power[n] = waterfill_power(channel(best, n), scaled[best] / gamma);
  }
  return a;
}

Action allocate_csi_only(const ChannelState& channel, std::span<const int> q, const PotentialTable& table,
                         const SystemConfig& config) {
  return allocate_csi_only(channel, scaled_increments(table, q, config), config.gamma);
}

double allocation_objective(const ChannelState& channel, const Action& action, std::span<const double> scaled,
                            double gamma) {
  double obj = 0.0;
  for (int n = 0; n < action.subbands(); ++n) {
    const int k = action.owner[n];
    const double p = action.power[n];
    obj += gamma * p - scaled[k] * std::log1p(p * channel(k, n));
  }
  return obj;
}

}  // namespace delayopt
