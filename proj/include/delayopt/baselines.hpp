#pragma once

#include <span>
#include <string>

#include "delayopt/config.hpp"
#include "delayopt/types.hpp"

namespace delayopt {

enum class BaselineKind { MLWDF, RoundRobin };

std::string to_string(BaselineKind kind);

/// Modified largest weighted delay first. Each subband goes to the
/// backlogged user maximising beta_k * hol_delay_k * log2(1 + (P_0/N_F) g_kn),
/// ties to the lowest index; the winner water-fills its subbands at level
/// 1/gamma. hol_delay_k is in slots and ignored for empty queues.
Action mlwdf_allocate(const ChannelState& channel, const QueueState& queue, std::span<const long> hol_delay,
                      const SystemConfig& config);

/// User (slot mod K) takes every subband and water-fills at level 1/gamma;
/// nothing is sent when that user's queue is empty.
Action round_robin_allocate(long slot, const ChannelState& channel, const QueueState& queue,
                            const SystemConfig& config);

}  // namespace delayopt
