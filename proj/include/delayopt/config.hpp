#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace delayopt {

enum class FadingModel { Rayleigh, Quantized };
enum class Dynamics { Packet, BirthDeath };
enum class Estimator { FirstVisit, EveryVisit };

/// Starting potentials of the online learners. Zero starts from the
/// zero-power policy; Myopic starts from one exact value-iteration step from
/// zero, V(Q) = sum_k beta_k/lambda_k * Q_k.
enum class InitialPotential { Zero, Myopic };

/// Physical system, traffic and the power price.
///
/// Units: tau in seconds, lambda in packets/second, mean_packet_bits in bits,
/// subband_bandwidth in Hz, powers normalised to unit noise power.
struct SystemConfig {
  int K = 1;
  int N_F = 1;
  int N_Q = 1;
  double tau = 0.005;
  std::vector<double> lambda{20.0};
  std::vector<double> mean_packet_bits{1.0};
  std::vector<double> beta{1.0};
  double P_0 = 1.0;
  double gamma = 1.0;
  double subband_bandwidth = 2.5e6;
  std::uint64_t rng_seed = 1;
  int csi_levels = 4;

  FadingModel fading = FadingModel::Rayleigh;
  Dynamics dynamics = Dynamics::Packet;

  /// Throws ConfigError on a violated invariant. Returns soft warnings
  /// (e.g. lambda*tau above the small-slot regime).
  std::vector<std::string> validate() const;

  std::size_t joint_state_count() const;

  /// Packets per slot delivered per bit/s/Hz of spectral efficiency: W_s*tau/Nbar_k.
  double rate_scale(int k) const { return subband_bandwidth * tau / mean_packet_bits[k]; }

  /// Coefficient that turns a potential increment into the natural-log
  /// weight used by the water-filling allocator: W_s*tau/(Nbar_k*ln 2).
  double service_coefficient(int k) const;

  /// beta_k / lambda_k, or 0 for a user that never receives traffic.
  double delay_weight(int k) const { return lambda[k] > 0.0 ? beta[k] / lambda[k] : 0.0; }

  /// Per-subband SNR in dB implied by P_0 (noise power 1 per subband).
  double snr_db() const;
  void set_snr_db(double snr_db);
};

struct StepsizeSchedule {
  double a = 1.0;
  double b = 1.0;
  double exponent = 0.85;

  void validate() const;
};

/// Knobs of the offline solvers, the online learners and the experiment runner.
struct SolverSettings {
  StepsizeSchedule stepsize;
  double delta_v = 1e-3;
  long max_periods = 100000;
  long max_period_slots = 1000000;
  long train_slots = 0;  // 0: no slot budget, stop on delta_v or max_periods
  Estimator estimator = Estimator::FirstVisit;
  InitialPotential initial_potential = InitialPotential::Myopic;
  std::size_t joint_state_cap = 4096;

  double vi_epsilon = 1e-8;
  long vi_max_iters = 1000000;

  long warmup_slots = 100000;
  long measure_slots = 1000000;

  double calibration_tolerance = 0.02;
  double gamma_min = 1e-9;
  double gamma_max = 1e3;
  int calibration_max_iters = 30;

  void validate() const;
};

struct LoadedConfig {
  SystemConfig system;
  SolverSettings solver;
};

/// Reads an INI-style file with sections [system], [traffic], [solver].
/// Unknown sections or keys raise ConfigError. Per-user keys (lambda,
/// mean_packet_bits, beta) take a comma list or a single value applied to
/// every user.
LoadedConfig load_config(const std::string& path);
LoadedConfig parse_config(const std::string& text);

std::string to_string(FadingModel m);
std::string to_string(Dynamics d);
std::string to_string(Estimator e);
std::string to_string(InitialPotential p);

}  // namespace delayopt
