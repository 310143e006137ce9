#pragma once

// Small configurations shared by the tests.

#include <cmath>

#include "delayopt/config.hpp"
#include "delayopt/oracle.hpp"

namespace fixture {

inline delayopt::SystemConfig users(int K, int N_F, int N_Q) {
  delayopt::SystemConfig c;
  c.K = K;
  c.N_F = N_F;
  c.N_Q = N_Q;
  c.tau = 0.005;
  c.lambda.assign(K, 20.0);
  c.mean_packet_bits.assign(K, 125000.0);
  c.beta.assign(K, 1.0);
  c.P_0 = 10.0;
  c.gamma = 0.0063;
  c.subband_bandwidth = 2.5e6;
  return c;
}

/// One user, one subband, one-packet buffer on the quantized alphabet with
/// the one-event-per-slot kernel: lambda*tau = 0.1, optimal service near 0.2.
inline delayopt::SystemConfig single_user() {
  auto c = users(1, 1, 1);
  c.fading = delayopt::FadingModel::Quantized;
  c.dynamics = delayopt::Dynamics::BirthDeath;
  c.csi_levels = 2;
  return c;
}

/// Two users, two-packet buffers, two-level alphabet: the smallest case where
/// per-user and joint potentials can be compared.
inline delayopt::SystemConfig two_users() {
  auto c = users(2, 2, 2);
  c.fading = delayopt::FadingModel::Quantized;
  c.dynamics = delayopt::Dynamics::BirthDeath;
  c.csi_levels = 2;
  c.mean_packet_bits.assign(2, 250000.0);
  return c;
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace fixture
