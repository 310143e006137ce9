#include "delayopt/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/math/distributions/binomial.hpp>

#include "delayopt/errors.hpp"
#include "delayopt/model.hpp"

namespace delayopt {

Action TableScheduler::decide(const SlotView& view) {
  if (rule_ == SubcarrierRule::Optimal) return allocate_optimal(view.channel, view.queue.q, table_, view.config);
  return allocate_csi_only(view.channel, view.queue.q, table_, view.config);
}

Action BaselineScheduler::decide(const SlotView& view) {
  if (kind_ == BaselineKind::MLWDF) return mlwdf_allocate(view.channel, view.queue, view.hol_delay, view.config);
  return round_robin_allocate(view.slot, view.channel, view.queue, view.config);
}

Action FixedRateScheduler::decide(const SlotView& view) {
  const auto& cfg = view.config;
  if (cfg.N_F < cfg.K || static_cast<int>(rate_.size()) != cfg.K)
    throw ConfigError("fixed-rate scheduler needs N_F >= K and one rate per user");
  Action a(cfg.N_F);
  for (int k = 0; k < cfg.K; ++k) {
    a.owner[k] = k;
    if (view.queue.q[k] > 0 && rate_[k] > 0.0)
      a.power[k] = std::expm1(rate_[k] / cfg.subband_bandwidth * std::log(2.0)) / view.channel(k, k);
  }
  return a;
}

Metrics run_replication(const SystemConfig& config, Scheduler& scheduler, std::uint64_t seed, long warmup_slots,
                        long measure_slots) {
  config.validate();
  if (warmup_slots < 0 || measure_slots <= 0) throw ConfigError("need warmup >= 0 and measure > 0 slots");
  const int K = config.K;
  Plant plant(config, seed);
  std::vector<std::deque<long>> stamps(K);  // arrival slot of every queued packet, FIFO
  std::vector<long> hol(K, 0);

  std::vector<double> queue_sum(K, 0.0), sojourn_sum(K, 0.0);
  std::vector<long> offered(K, 0), dropped(K, 0), departed(K, 0);
  double power_sum = 0.0;
  const long total = warmup_slots + measure_slots;

  for (long t = 0; t < total; ++t) {
    const QueueState& queue = plant.queue();
    for (int k = 0; k < K; ++k) hol[k] = queue.q[k] > 0 ? t - stamps[k].front() : 0;
    const SlotView view{config, plant.observe(), queue, hol, t};
    const bool measuring = t >= warmup_slots;
    const Action action = scheduler.decide(view);
    if (measuring)
      for (int k = 0; k < K; ++k) queue_sum[k] += queue.q[k];
    const SlotOutcome out = plant.apply(action);

    for (int k = 0; k < K; ++k) {
      for (int s = 0; s < out.served_packets[k]; ++s) {
        if (measuring) {
          sojourn_sum[k] += static_cast<double>(t - stamps[k].front());
          ++departed[k];
        }
        stamps[k].pop_front();
      }
      for (int s = 0; s < out.arrivals[k] - out.dropped[k]; ++s) stamps[k].push_back(t);
      if (static_cast<int>(stamps[k].size()) != plant.queue().q[k])
        throw std::logic_error("packet bookkeeping out of step with the queue");
      if (measuring) {
        offered[k] += out.arrivals[k];
        dropped[k] += out.dropped[k];
      }
    }
    if (measuring) power_sum += out.power_spent;
  }

  Metrics m;
  const double T = static_cast<double>(measure_slots);
  m.slots = measure_slots;
  m.avg_power = power_sum / T;
  m.crn_checksum = plant.crn_checksum();
  m.departures = departed;
  for (int k = 0; k < K; ++k) {
    const double avg_q = queue_sum[k] / T;
    const double lambda_eff = static_cast<double>(offered[k] - dropped[k]) / (T * config.tau);
    m.avg_queue.push_back(avg_q);
    // A queue that holds packets but admits none has unbounded delay.
    m.avg_delay_littles.push_back(lambda_eff > 0.0 ? avg_q / lambda_eff : (avg_q > 0.0 ? INFINITY : 0.0));
    m.avg_delay_sojourn.push_back(departed[k] > 0 ? sojourn_sum[k] / departed[k] * config.tau : 0.0);
    m.drop_rate.push_back(offered[k] > 0 ? static_cast<double>(dropped[k]) / offered[k] : 0.0);
    if (avg_q > 0.9 * config.N_Q) {
      std::ostringstream os;
      os << "user " << k << " average queue " << avg_q << " exceeds 0.9*N_Q; the queue looks unstable";
      m.warnings.push_back(os.str());
    }
  }
  for (int k = 0; k < K; ++k) m.weighted_delay += config.beta[k] * m.avg_delay_littles[k];
  return m;
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Decomposed: return "decomposed";
    case PolicyKind::Joint: return "joint";
    case PolicyKind::MLWDF: return "mlwdf";
    case PolicyKind::RoundRobin: return "round_robin";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "decomposed") return PolicyKind::Decomposed;
  if (name == "joint") return PolicyKind::Joint;
  if (name == "mlwdf") return PolicyKind::MLWDF;
  if (name == "round_robin") return PolicyKind::RoundRobin;
  throw ConfigError("unknown policy '" + name + "' (expected decomposed, joint, mlwdf or round_robin)");
}

std::unique_ptr<Scheduler> PreparedPolicy::scheduler() const {
  switch (kind) {
    case PolicyKind::Decomposed: return std::make_unique<TableScheduler>(*table, SubcarrierRule::CsiOnly);
    case PolicyKind::Joint: return std::make_unique<TableScheduler>(*table, SubcarrierRule::Optimal);
    case PolicyKind::MLWDF: return std::make_unique<BaselineScheduler>(BaselineKind::MLWDF);
    case PolicyKind::RoundRobin: return std::make_unique<BaselineScheduler>(BaselineKind::RoundRobin);
  }
  return nullptr;
}

std::uint64_t training_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ull; }

PreparedPolicy prepare_policy(PolicyKind kind, const SystemConfig& config, const SolverSettings& settings,
                              std::uint64_t seed, bool calibrate) {
  config.validate();
  settings.validate();
  const bool learns = kind == PolicyKind::Decomposed || kind == PolicyKind::Joint;
  std::map<double, TrainResult> trained;

  auto build = [&](double gamma) {
    PreparedPolicy p;
    p.kind = kind;
    p.gamma = gamma;
    if (learns) {
      auto it = trained.find(gamma);
      if (it == trained.end()) {
        SystemConfig cfg = config;
        cfg.gamma = gamma;
        TrainOptions opts;
        opts.settings = settings;
        opts.seed = training_seed(seed);
        it = trained
                 .emplace(gamma, kind == PolicyKind::Joint ? train_joint(cfg, opts) : train_decomposed(cfg, opts))
                 .first;
      }
      p.table = it->second.table;
      p.training = it->second;
    }
    return p;
  };

  if (!calibrate) return build(config.gamma);

  auto avg_power = [&](double gamma) {
    SystemConfig cfg = config;
    cfg.gamma = gamma;
    auto sched = build(gamma).scheduler();
    return run_replication(cfg, *sched, seed, settings.warmup_slots, settings.measure_slots).avg_power;
  };
  CalibrationOptions opts;
  opts.initial_gamma = config.gamma;
  opts.gamma_min = settings.gamma_min;
  opts.gamma_max = settings.gamma_max;
  opts.tolerance = settings.calibration_tolerance;
  opts.max_iters = settings.calibration_max_iters;
  const CalibrationResult cal = calibrate_gamma(avg_power, config.P_0, opts);
  PreparedPolicy p = build(cal.gamma);
  p.calibration = cal;
  return p;
}

std::vector<SweepRow> sweep(const ExperimentSpec& spec, int jobs) {
  if (spec.policies.empty() || spec.snr_db.empty() || spec.seeds.empty())
    throw ConfigError("sweep needs at least one policy, one SNR point and one seed");
  const std::size_t n_seeds = spec.seeds.size();
  const std::size_t cells = spec.policies.size() * spec.snr_db.size();
  std::vector<SweepRow> rows(cells * n_seeds);

  auto run_cell = [&](std::size_t cell) {
    const PolicyKind kind = spec.policies[cell / spec.snr_db.size()];
    const double snr = spec.snr_db[cell % spec.snr_db.size()];
    SystemConfig cfg = spec.config;
    cfg.set_snr_db(snr);
    for (std::size_t s = 0; s < n_seeds; ++s) {
      SweepRow& r = rows[cell * n_seeds + s];
      r.policy = kind;
      r.snr_db = snr;
      r.seed = spec.seeds[s];
    }
    std::optional<PreparedPolicy> prepared;
    try {
      prepared = prepare_policy(kind, cfg, spec.settings, spec.seeds.front(), spec.calibrate);
    } catch (const std::exception& e) {
      for (std::size_t s = 0; s < n_seeds; ++s) rows[cell * n_seeds + s].error = e.what();
      return;
    }
    cfg.gamma = prepared->gamma;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      SweepRow& r = rows[cell * n_seeds + s];
      r.gamma = prepared->gamma;
      try {
        auto sched = prepared->scheduler();
        r.metrics = run_replication(cfg, *sched, r.seed, spec.settings.warmup_slots, spec.settings.measure_slots);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells)));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
    });
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<SweepRecord> to_records(const std::vector<SweepRow>& rows) {
  std::vector<SweepRecord> out;
  for (const auto& r : rows)
    if (r.error.empty()) out.push_back({to_string(r.policy), r.snr_db, r.seed, r.metrics.weighted_delay});
  return out;
}

double sign_test_p_value(int wins, int n) {
  if (n <= 0 || wins <= 0) return 1.0;
  const boost::math::binomial_distribution<double> dist(n, 0.5);
  return boost::math::cdf(boost::math::complement(dist, wins - 1));
}

std::vector<Comparison> compare(const std::vector<SweepRecord>& records) {
  std::vector<std::string> policies;
  std::vector<double> snrs;
  std::map<std::tuple<std::string, double, std::uint64_t>, double> delay;
  for (const auto& r : records) {
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end()) policies.push_back(r.policy);
    if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end()) snrs.push_back(r.snr_db);
    delay[{r.policy, r.snr_db, r.seed}] = r.weighted_delay;
  }
  std::vector<Comparison> out;
  for (std::size_t i = 0; i < policies.size(); ++i)
    for (std::size_t j = i + 1; j < policies.size(); ++j)
      for (double snr : snrs) {
        Comparison c;
        c.policy_a = policies[i];
        c.policy_b = policies[j];
        c.snr_db = snr;
        for (const auto& [key, da] : delay) {
          if (std::get<0>(key) != c.policy_a || std::get<1>(key) != snr) continue;
          auto other = delay.find({c.policy_b, snr, std::get<2>(key)});
          if (other == delay.end()) continue;
          c.deltas.emplace_back(std::get<2>(key), other->second - da);
        }
        if (c.deltas.empty()) continue;
        double sum = 0.0, sq = 0.0;
        for (const auto& [seed, d] : c.deltas) {
          sum += d;
          sq += d * d;
          if (d != 0.0) ++c.n;
          if (d > 0.0) ++c.wins_a;
        }
        const double m = static_cast<double>(c.deltas.size());
        c.mean_delta = sum / m;
        if (m > 1) c.stderr_delta = std::sqrt(std::max(0.0, (sq - m * c.mean_delta * c.mean_delta) / (m - 1)) / m);
        c.p_value = sign_test_p_value(c.wins_a, c.n);
        out.push_back(std::move(c));
      }
  return out;
}

AgreementStats assignment_agreement(const SystemConfig& config, const PotentialTable& table, long warmup_slots,
                                    long draws, std::uint64_t seed) {
  config.validate();
  Plant plant(config, seed);
  AgreementStats st;
  long agree = 0;
  double frac_sum = 0.0, frac_sq = 0.0;
  for (long t = 0; t < warmup_slots + draws; ++t) {
    const std::vector<int> q = plant.queue().q;
    const ChannelState& h = plant.observe();
    const Action csi = allocate_csi_only(h, q, table, config);
    if (t >= warmup_slots) {
      const Action opt = allocate_optimal(h, q, table, config);
      long counted = 0, same = 0;
      for (int n = 0; n < config.N_F; ++n) {
        if (!(opt.power[n] > 0.0)) continue;
        ++counted;
        if (opt.owner[n] == csi.owner[n]) ++same;
      }
      if (counted > 0) {
        const double f = static_cast<double>(same) / counted;
        frac_sum += f;
        frac_sq += f * f;
        ++st.draws;
        st.subbands += counted;
        agree += same;
      }
    }
    plant.apply(csi);
  }
  if (st.subbands > 0) st.rate = static_cast<double>(agree) / st.subbands;
  if (st.draws > 1) {
    const double d = static_cast<double>(st.draws);
    const double mean = frac_sum / d;
    st.stderr = std::sqrt(std::max(0.0, (frac_sq - d * mean * mean) / (d - 1)) / d);
  }
  return st;
}

}  // namespace delayopt
