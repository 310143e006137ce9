#include "delayopt/baselines.hpp"

#include <cmath>

#include "delayopt/allocation.hpp"

namespace delayopt {

std::string to_string(BaselineKind kind) { return kind == BaselineKind::MLWDF ? "mlwdf" : "round_robin"; }

Action mlwdf_allocate(const ChannelState& channel, const QueueState& queue, std::span<const long> hol_delay,
                      const SystemConfig& config) {
  Action a(channel.N_F);
  const double ref_power = config.P_0 / config.N_F;
  const double level = 1.0 / config.gamma;
  for (int n = 0; n < channel.N_F; ++n) {
    int best = -1;
    double best_metric = -1.0;
    for (int k = 0; k < channel.K; ++k) {
      if (queue.q[k] == 0) continue;
      const double metric =
          config.beta[k] * static_cast<double>(hol_delay[k]) * std::log2(1.0 + ref_power * channel(k, n));
      if (metric > best_metric) {
        best_metric = metric;
        best = k;
      }
    }
    if (best < 0) continue;
    a.owner[n] = best;
    a.power[n] = waterfill_power(channel(best, n), level);
  }
  return a;
}

Action round_robin_allocate(long slot, const ChannelState& channel, const QueueState& queue,
                            const SystemConfig& config) {
  Action a(channel.N_F);
  const int k = static_cast<int>(slot % channel.K);
  for (int n = 0; n < channel.N_F; ++n) {
    a.owner[n] = k;
    if (queue.q[k] > 0) a.power[n] = waterfill_power(channel(k, n), 1.0 / config.gamma);
  }
  return a;
}

}  // namespace delayopt
