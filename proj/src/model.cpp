#include "delayopt/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "delayopt/errors.hpp"

namespace delayopt {

double Action::total_power() const {
  double sum = 0.0;
  for (double p : power) sum += p;
  return sum;
}

double Action::user_power(int k) const {
  double sum = 0.0;
  for (std::size_t n = 0; n < owner.size(); ++n)
    if (owner[n] == k) sum += power[n];
  return sum;
}

bool Action::valid(int users) const {
  if (owner.size() != power.size()) return false;
  for (std::size_t n = 0; n < owner.size(); ++n) {
    if (owner[n] < 0 || owner[n] >= users) return false;
    if (!(power[n] >= 0.0) || !std::isfinite(power[n])) return false;
  }
  return true;
}

double CsiAlphabet::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) m += levels[i] * probs[i];
  return m;
}

CsiAlphabet build_csi_alphabet(int m_levels) {
  if (m_levels < 1) throw ConfigError("csi alphabet needs at least one level");
  CsiAlphabet a;
  const double m = m_levels;
  // Bin j covers [x_j, x_{j+1}) with exp(-x_j) = 1 - j/m; the conditional mean
  // of x e^{-x} over the bin is m * [(1+x_j) e^{-x_j} - (1+x_{j+1}) e^{-x_{j+1}}].
  auto tail = [&](int j) {
    if (j >= m_levels) return 0.0;
    const double surv = 1.0 - j / m;
    const double x = j == 0 ? 0.0 : -std::log(surv);
    return (1.0 + x) * surv;
  };
  for (int j = 0; j < m_levels; ++j) {
    a.levels.push_back(m * (tail(j) - tail(j + 1)));
    a.probs.push_back(1.0 / m);
  }
  return a;
}

RngStreams::RngStreams(std::uint64_t seed, int users) {
  const auto lo = static_cast<std::uint32_t>(seed & 0xffffffffu);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  auto make = [&](Stream type, int user) {
    std::seed_seq seq{lo, hi, static_cast<std::uint32_t>(type), static_cast<std::uint32_t>(user)};
    return std::mt19937_64(seq);
  };
  for (int k = 0; k < users; ++k) {
    fading_.push_back(make(Stream::Fading, k));
    arrivals_.push_back(make(Stream::Arrivals, k));
    bits_.push_back(make(Stream::PacketBits, k));
  }
  events_ = make(Stream::Events, 0);
}

std::mt19937_64& RngStreams::stream(Stream type, int user) {
  switch (type) {
    case Stream::Fading: return fading_.at(user);
    case Stream::Arrivals: return arrivals_.at(user);
    case Stream::PacketBits: return bits_.at(user);
    case Stream::Events: return events_;
  }
  return events_;
}

ChannelState sample_csi(const SystemConfig& config, RngStreams& rng) {
  ChannelState h(config.K, config.N_F);
  std::exponential_distribution<double> unit(1.0);
  for (int k = 0; k < config.K; ++k) {
    auto& gen = rng.stream(Stream::Fading, k);
    for (int n = 0; n < config.N_F; ++n) h(k, n) = unit(gen);
  }
  return h;
}

ChannelState sample_csi(const SystemConfig& config, const CsiAlphabet& alphabet, RngStreams& rng) {
  ChannelState h(config.K, config.N_F);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < config.K; ++k) {
    auto& gen = rng.stream(Stream::Fading, k);
    for (int n = 0; n < config.N_F; ++n) {
      double x = u(gen);
      std::size_t j = 0;
      while (j + 1 < alphabet.size() && x >= alphabet.probs[j]) x -= alphabet.probs[j++];
      h(k, n) = alphabet.levels[j];
    }
  }
  return h;
}

std::vector<int> sample_arrivals(const SystemConfig& config, RngStreams& rng) {
  std::vector<int> a(config.K, 0);
  for (int k = 0; k < config.K; ++k) {
    const double mean = config.lambda[k] * config.tau;
    auto& gen = rng.stream(Stream::Arrivals, k);
    if (mean > 0.0) {
      std::poisson_distribution<int> pois(mean);
      a[k] = pois(gen);
    } else {
      gen.discard(1);
    }
  }
  return a;
}

double sample_packet_bits(const SystemConfig& config, int k, RngStreams& rng) {
  std::exponential_distribution<double> size(1.0 / config.mean_packet_bits[k]);
  double bits = 0.0;
  auto& gen = rng.stream(Stream::PacketBits, k);
  while (!(bits > 0.0)) bits = size(gen);
  return bits;
}

double instantaneous_rate(const SystemConfig& config, const ChannelState& channel, const Action& action,
                          int k) {
  double spectral = 0.0;
  for (int n = 0; n < action.subbands(); ++n)
    if (action.owner[n] == k && action.power[n] > 0.0)
      spectral += std::log2(1.0 + action.power[n] * channel(k, n));
  return config.subband_bandwidth * spectral;
}

std::vector<double> instantaneous_rates(const SystemConfig& config, const ChannelState& channel,
                                        const Action& action) {
  std::vector<double> r(config.K, 0.0);
  for (int n = 0; n < action.subbands(); ++n) {
    const int k = action.owner[n];
    if (action.power[n] > 0.0) r[k] += std::log2(1.0 + action.power[n] * channel(k, n));
  }
  for (double& x : r) x *= config.subband_bandwidth;
  return r;
}

std::pair<QueueState, SlotOutcome> queue_step(const QueueState& queue, std::span<const double> rates,
                                              std::span<const int> arrivals, const SystemConfig& config,
                                              RngStreams& rng) {
  QueueState next = queue;
  SlotOutcome out;
  out.served_packets.assign(config.K, 0);
  out.arrivals.assign(arrivals.begin(), arrivals.end());
  out.dropped.assign(config.K, 0);
  out.rate.assign(rates.begin(), rates.end());

  for (int k = 0; k < config.K; ++k) {
    int& q = next.q[k];
    double& residual = next.hol_residual_bits[k];
    double budget = rates[k] * config.tau;
    while (q > 0 && budget > 0.0) {
      if (budget >= residual) {
        budget -= residual;
        --q;
        ++out.served_packets[k];
        residual = q > 0 ? sample_packet_bits(config, k, rng) : 0.0;
      } else {
        residual -= budget;
        budget = 0.0;
      }
    }
    const int admitted = std::min(arrivals[k], config.N_Q - q);
    out.dropped[k] = arrivals[k] - admitted;
    if (q == 0 && admitted > 0) residual = sample_packet_bits(config, k, rng);
    q += admitted;
  }
  return {std::move(next), std::move(out)};
}

std::pair<QueueState, SlotOutcome> queue_step_birth_death(const QueueState& queue,
                                                          std::span<const double> rates,
                                                          const SystemConfig& config, RngStreams& rng) {
  QueueState next = queue;
  SlotOutcome out;
  out.served_packets.assign(config.K, 0);
  out.arrivals.assign(config.K, 0);
  out.dropped.assign(config.K, 0);
  out.rate.assign(rates.begin(), rates.end());

  std::vector<double> birth(config.K), death(config.K);
  double total = 0.0;
  for (int k = 0; k < config.K; ++k) {
    birth[k] = config.lambda[k] * config.tau;
    death[k] = queue.q[k] > 0 ? rates[k] * config.tau / config.mean_packet_bits[k] : 0.0;
    total += birth[k] + death[k];
  }
  if (total > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "birth-death slot probabilities sum to " << total << " > 1";
    throw RegimeError(os.str());
  }

  // Births are laid out first so which user receives an arrival depends on
  // the uniform draw alone, not on the policy's service rates.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng.events());
  for (int k = 0; k < config.K; ++k) {
    if (u < birth[k]) {
      out.arrivals[k] = 1;
      if (next.q[k] < config.N_Q) {
        if (next.q[k] == 0) next.hol_residual_bits[k] = config.mean_packet_bits[k];
        ++next.q[k];
      } else {
        out.dropped[k] = 1;
      }
      return {std::move(next), std::move(out)};
    }
    u -= birth[k];
  }
  for (int k = 0; k < config.K; ++k) {
    if (u < death[k]) {
      --next.q[k];
      out.served_packets[k] = 1;
      if (next.q[k] == 0) next.hol_residual_bits[k] = 0.0;
      return {std::move(next), std::move(out)};
    }
    u -= death[k];
  }
  return {std::move(next), std::move(out)};
}

double per_stage_reward(std::span<const int> q, double total_power, const SystemConfig& config) {
  double g = 0.0;
  for (int k = 0; k < config.K; ++k) g += config.delay_weight(k) * q[k];
  return g + config.gamma * total_power;
}

double per_stage_reward(const QueueState& queue, const Action& action, const SystemConfig& config) {
  return per_stage_reward(queue.q, action.total_power(), config);
}

Plant::Plant(const SystemConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed, config.K), queue_(config.K) {
  if (config_.fading == FadingModel::Quantized) alphabet_ = build_csi_alphabet(config_.csi_levels);
}

const ChannelState& Plant::observe() {
  if (!observed_) {
    channel_ = config_.fading == FadingModel::Quantized ? sample_csi(config_, alphabet_, rng_)
                                                        : sample_csi(config_, rng_);
    observed_ = true;
  }
  return channel_;
}

SlotOutcome Plant::apply(const Action& action) {
  observe();
  if (action.subbands() != config_.N_F || !action.valid(config_.K)) {
    std::ostringstream os;
    os << "invalid action in slot " << slot_ << ": every subband needs one owner in [0, K) and a finite power >= 0";
    throw ConfigError(os.str());
  }
  const auto rates = instantaneous_rates(config_, channel_, action);
  std::pair<QueueState, SlotOutcome> step;
  if (config_.dynamics == Dynamics::BirthDeath) {
    step = queue_step_birth_death(queue_, rates, config_, rng_);
  } else {
    const auto arrivals = sample_arrivals(config_, rng_);
    step = queue_step(queue_, rates, arrivals, config_, rng_);
  }
  step.second.power_spent = action.total_power();
  auto mix = [&](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      checksum_ ^= (x >> (8 * b)) & 0xffu;
      checksum_ *= 1099511628211ull;
    }
  };
  for (double g : channel_.gain) mix(std::bit_cast<std::uint64_t>(g));
  for (int a : step.second.arrivals) mix(static_cast<std::uint64_t>(a));
  queue_ = std::move(step.first);
  observed_ = false;
  ++slot_;
  return std::move(step.second);
}

}  // namespace delayopt
