#include "delayopt/learner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "delayopt/errors.hpp"
#include "delayopt/model.hpp"

namespace delayopt {

double stepsize(const StepsizeSchedule& schedule, long k) {
  return schedule.a / std::pow(schedule.b + static_cast<double>(k), schedule.exponent);
}

void RegenAccumulators::reset(std::size_t states) {
  s_g.assign(states, 0.0);
  s_v.assign(states, 0.0);
  l.assign(states, 0);
  first_g.assign(states, 0.0);
  first_v.assign(states, 0.0);
  visited = 0;
}

void RegenAccumulators::accumulate(std::size_t state, double reward, double next_potential) {
  s_g[state] += reward;
  s_v[state] += next_potential;
  if (l[state]++ == 0) {
    first_g[state] = reward;
    first_v[state] = next_potential;
    ++visited;
  }
}

std::vector<double> update_direction(std::span<const double> table, const RegenAccumulators& acc,
                                     Estimator estimator) {
  if (table.size() != acc.size()) throw std::logic_error("accumulators and table differ in size");
  if (!acc.complete()) throw std::logic_error("potential update before every state was visited");
  auto g = [&](std::size_t i) {
    return estimator == Estimator::EveryVisit ? acc.s_g[i] / static_cast<double>(acc.l[i]) : acc.first_g[i];
  };
  auto v = [&](std::size_t i) {
    return estimator == Estimator::EveryVisit ? acc.s_v[i] / static_cast<double>(acc.l[i]) : acc.first_v[i];
  };
  const double reference = g(0) + v(0) - table[0];
  std::vector<double> y(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) y[i] = g(i) - reference + v(i) - table[i];
  y[0] = 0.0;  // cancels exactly; keep the reference bit-identical
  return y;
}

double potential_update(std::span<double> table, const RegenAccumulators& acc, double eps, Estimator estimator) {
  const auto y = update_direction(table, acc, estimator);
  double delta = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double step = eps * y[i];
    table[i] += step;
    delta = std::max(delta, std::fabs(step));
  }
  return delta;
}

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void check_settings(const SystemConfig& config, const TrainOptions& options) {
  config.validate();
  options.settings.validate();
}

std::string coverage_note(const RegenAccumulators& acc, const std::string& who, long slots) {
  std::size_t missing = 0;
  for (long c : acc.l)
    if (c == 0) ++missing;
  std::ostringstream os;
  os << who << ": regenerative period exceeded " << slots << " slots with " << missing << " of " << acc.size()
     << " states unvisited; no update applied";
  return os.str();
}

// Myopic start: the per-stage delay cost relative to the empty state.
void seed_table(PotentialTable& table, const SystemConfig& config, const TrainOptions& options) {
  auto values = table.values();
  if (!options.initial_table.empty()) {
    if (options.initial_table.size() != values.size()) throw ConfigError("initial table has the wrong size");
    std::copy(options.initial_table.begin(), options.initial_table.end(), values.begin());
    return;
  }
  if (options.settings.initial_potential == InitialPotential::Zero) return;
  if (table.kind() == PotentialTable::Kind::Joint) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      double v = 0.0;
      const auto q = table.state(i);
      for (int k = 0; k < config.K; ++k) v += config.delay_weight(k) * q[k];
      values[i] = v;
    }
    return;
  }
  for (int k = 0; k < config.K; ++k) {
    auto user = table.user(k);
    for (std::size_t q = 0; q < user.size(); ++q) user[q] = config.delay_weight(k) * static_cast<double>(q);
  }
}

}  // namespace

TrainResult train_joint(const SystemConfig& config, const TrainOptions& options) {
  check_settings(config, options);
  const SolverSettings& st = options.settings;
  if (config.joint_state_count() > st.joint_state_cap) {
    std::ostringstream os;
    os << "joint learner needs " << config.joint_state_count() << " states, above the cap of " << st.joint_state_cap;
    throw EnumerationTooLarge(os.str());
  }

  TrainResult res;
  res.table = PotentialTable::joint(config.K, config.N_Q);
  seed_table(res.table, config, options);
  auto values = res.table.values();
  const std::size_t S = values.size();
  res.visits.assign(S, 0);
  res.periods.assign(1, 0);

  Plant plant(config, options.seed);
  RegenAccumulators acc(S);
  long period = 0, period_start = 0;
  double reward_sum = 0.0, power_sum = 0.0;

  for (;;) {
    if (st.train_slots > 0 && plant.slot() >= st.train_slots) {
      res.stop_reason = "train_slots";
      break;
    }
    const std::vector<int> q = plant.queue().q;
    const std::size_t i = res.table.index(q);
    const Action a = allocate_optimal(plant.observe(), q, res.table, config);
    const double power = a.total_power();
    const double g = per_stage_reward(q, power, config);
    plant.apply(a);
    acc.accumulate(i, g, values[res.table.index(plant.queue().q)]);
    ++res.visits[i];
    reward_sum += g;
    power_sum += power;

    if (acc.complete()) {
      const double eps = stepsize(st.stepsize, period);
      TraceRow row;
      row.period_index = period;
      row.slots_elapsed = plant.slot();
      row.epsilon = eps;
      row.table_delta_maxnorm = potential_update(values, acc, eps, st.estimator);
      row.running_avg_reward = reward_sum / plant.slot();
      row.running_avg_power = power_sum / plant.slot();
      row.running_weighted_delay = row.running_avg_reward - config.gamma * row.running_avg_power;
      row.mean_potential = mean_of(res.table.values());
      if (options.snapshots) row.snapshot.assign(values.begin(), values.end());
      res.trace.push_back(std::move(row));
      ++period;
      res.periods[0] = period;
      acc.reset();
      period_start = plant.slot();
      if (res.trace.back().table_delta_maxnorm < st.delta_v) {
        res.converged = true;
        res.stop_reason = "delta_v";
        break;
      }
      if (period >= st.max_periods) {
        res.stop_reason = "max_periods";
        break;
      }
    } else if (plant.slot() - period_start >= st.max_period_slots) {
      res.stop_reason = "period_cap";
      res.diagnostic = coverage_note(acc, "joint learner", st.max_period_slots);
      break;
    }
  }
  res.slots = plant.slot();
  return res;
}

TrainResult train_decomposed(const SystemConfig& config, const TrainOptions& options) {
  check_settings(config, options);
  const SolverSettings& st = options.settings;
  const int K = config.K;
  const std::size_t n = static_cast<std::size_t>(config.N_Q) + 1;

  TrainResult res;
  res.table = PotentialTable::decomposed(K, config.N_Q);
  seed_table(res.table, config, options);
  res.visits.assign(res.table.size(), 0);
  res.periods.assign(K, 0);

  Plant plant(config, options.seed);
  std::vector<RegenAccumulators> acc(K, RegenAccumulators(n));
  std::vector<long> period_start(K, 0);
  std::vector<double> last_delta(K, INFINITY);
  double reward_sum = 0.0, power_sum = 0.0;

  for (;;) {
    if (st.train_slots > 0 && plant.slot() >= st.train_slots) {
      res.stop_reason = "train_slots";
      break;
    }
    const std::vector<int> q = plant.queue().q;
    const Action a = allocate_csi_only(plant.observe(), q, res.table, config);
    std::vector<double> g(K);
    double power = 0.0;
    for (int k = 0; k < K; ++k) {
      const double pk = a.user_power(k);
      g[k] = config.delay_weight(k) * q[k] + config.gamma * pk;
      power += pk;
      reward_sum += g[k];
    }
    power_sum += power;
    plant.apply(a);
    const auto& next = plant.queue().q;

    bool stop = false;
    for (int k = 0; k < K; ++k) {
      auto table = res.table.user(k);
      acc[k].accumulate(q[k], g[k], table[next[k]]);
      ++res.visits[k * n + q[k]];
      if (acc[k].complete()) {
        const long period = res.periods[k];
        const double eps = stepsize(st.stepsize, period);
        TraceRow row;
        row.period_index = period;
        row.user = k;
        row.slots_elapsed = plant.slot();
        row.epsilon = eps;
        row.table_delta_maxnorm = potential_update(table, acc[k], eps, st.estimator);
        row.running_avg_reward = reward_sum / plant.slot();
        row.running_avg_power = power_sum / plant.slot();
        row.running_weighted_delay = row.running_avg_reward - config.gamma * row.running_avg_power;
        row.mean_potential = mean_of(res.table.values());
        if (options.snapshots) row.snapshot.assign(table.begin(), table.end());
        last_delta[k] = row.table_delta_maxnorm;
        res.trace.push_back(std::move(row));
        ++res.periods[k];
        acc[k].reset();
        period_start[k] = plant.slot();
      } else if (plant.slot() - period_start[k] >= st.max_period_slots) {
        res.stop_reason = "period_cap";
        res.diagnostic = coverage_note(acc[k], "user " + std::to_string(k), st.max_period_slots);
        stop = true;
        break;
      }
    }
    if (stop) break;
    if (std::all_of(last_delta.begin(), last_delta.end(), [&](double d) { return d < st.delta_v; })) {
      res.converged = true;
      res.stop_reason = "delta_v";
      break;
    }
    if (std::all_of(res.periods.begin(), res.periods.end(), [&](long p) { return p >= st.max_periods; })) {
      res.stop_reason = "max_periods";
      break;
    }
  }
  res.slots = plant.slot();
  return res;
}

}  // namespace delayopt
