#include "delayopt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "delayopt/errors.hpp"

namespace delayopt {

namespace {

// m^n with a ceiling, so callers can compare against a cap without overflow.
std::size_t capped_power(std::size_t m, int n, std::size_t ceiling) {
  std::size_t r = 1;
  for (int i = 0; i < n; ++i) {
    if (r > ceiling / std::max<std::size_t>(m, 1)) return ceiling + 1;
    r *= m;
  }
  return r;
}

struct SampleAccumulator {
  double g_sum = 0.0, g_sq = 0.0, p_sum = 0.0;
  std::vector<double> mu_sum, mu_sq;

  explicit SampleAccumulator(int users) : mu_sum(users, 0.0), mu_sq(users, 0.0) {}

  void add(double w, double g, double power, const std::vector<double>& mu) {
    g_sum += w * g;
    g_sq += w * g * g;
    p_sum += w * power;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      mu_sum[k] += w * mu[k];
      mu_sq[k] += w * mu[k] * mu[k];
    }
  }
};

// One subband's decision for a vector of gains, matching allocate_optimal /
// allocate_csi_only (ties to the lowest index).
struct SubbandDecision {
  int winner = 0;
  double power = 0.0;
  double surplus = 0.0;
};

SubbandDecision decide_subband(std::span<const double> gains, std::span<const double> c, double gamma,
                               SubcarrierRule rule) {
  SubbandDecision d;
  const int K = static_cast<int>(gains.size());
  if (rule == SubcarrierRule::Optimal) {
    double best_x = -1.0;
    for (int k = 0; k < K; ++k) {
      const double x = subcarrier_metric(gains[k], c[k], gamma);
      if (x > best_x) {
        best_x = x;
        d.winner = k;
      }
    }
    if (best_x > 0.0) d.power = waterfill_power(gains[d.winner], c[d.winner] / gamma);
  } else {
    for (int k = 1; k < K; ++k)
      if (gains[k] > gains[d.winner]) d.winner = k;
    d.power = waterfill_power(gains[d.winner], c[d.winner] / gamma);
  }
  if (d.power > 0.0) d.surplus = c[d.winner] * std::log1p(gains[d.winner] * d.power) - gamma * d.power;
  return d;
}

// Gain vectors of one subband across K users with their probabilities.
struct SymbolTable {
  int K = 0;
  std::vector<double> gains;  // combos x K
  std::vector<double> prob;
};

SymbolTable enumerate_symbols(int K, const CsiAlphabet& alphabet, std::size_t cap) {
  const std::size_t m = alphabet.size();
  const std::size_t count = capped_power(m, K, cap);
  if (count > cap) {
    std::ostringstream os;
    os << "per-subband CSI enumeration " << m << "^" << K << " exceeds " << cap;
    throw EnumerationTooLarge(os.str());
  }
  SymbolTable t;
  t.K = K;
  t.gains.resize(count * K);
  t.prob.resize(count);
  std::vector<std::size_t> digit(K, 0);
  for (std::size_t s = 0; s < count; ++s) {
    double p = 1.0;
    for (int k = 0; k < K; ++k) {
      t.gains[s * K + k] = alphabet.levels[digit[k]];
      p *= alphabet.probs[digit[k]];
    }
    t.prob[s] = p;
    for (int k = K - 1; k >= 0; --k) {
      if (++digit[k] < m) break;
      digit[k] = 0;
    }
  }
  return t;
}

void check_alphabet(const CsiAlphabet& alphabet) {
  if (alphabet.size() == 0 || alphabet.probs.size() != alphabet.size())
    throw ConfigError("CSI alphabet must have matching, non-empty levels and probs");
  double total = 0.0;
  for (double p : alphabet.probs) {
    if (!(p >= 0.0)) throw ConfigError("CSI alphabet probabilities must be >= 0");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw ConfigError("CSI alphabet probabilities must sum to 1");
}

void check_state_cap(const SystemConfig& config, std::size_t cap) {
  const std::size_t states = capped_power(static_cast<std::size_t>(config.N_Q) + 1, config.K, cap);
  if (states > cap) {
    std::ostringstream os;
    os << "joint state space (N_Q+1)^K = " << config.N_Q + 1 << "^" << config.K << " exceeds the cap of " << cap;
    throw EnumerationTooLarge(os.str());
  }
}

std::string regime_message(std::size_t state, double total) {
  std::ostringstream os;
  os << "sum_k (lambda_k + mu_bar_k) * tau = " << total << " > 1 in joint state " << state
     << "; the one-event-per-slot kernel is invalid (reduce tau or the rates)";
  return os.str();
}

}  // namespace

ConditionalStats conditional_stats(std::span<const int> q, const ActionRule& rule, const CsiAlphabet& alphabet,
                                   const SystemConfig& config, const StatsOptions& options) {
  check_alphabet(alphabet);
  const int K = config.K;
  const int symbols = K * config.N_F;
  const std::size_t count = capped_power(alphabet.size(), symbols, options.max_enumeration);

  SampleAccumulator acc(K);
  std::vector<double> mu(K);
  ChannelState h(K, config.N_F);
  auto evaluate = [&](double weight) {
    const Action a = rule(h, q);
    if (!a.valid(K) || a.subbands() != config.N_F) throw ConfigError("action rule returned an invalid action");
    const double power = a.total_power();
    for (int k = 0; k < K; ++k) mu[k] = instantaneous_rate(config, h, a, k) / config.mean_packet_bits[k];
    acc.add(weight, per_stage_reward(q, power, config), power, mu);
  };

  ConditionalStats out;
  if (count <= options.max_enumeration) {
    std::vector<std::size_t> digit(symbols, 0);
    for (std::size_t s = 0; s < count; ++s) {
      double w = 1.0;
      for (int i = 0; i < symbols; ++i) {
        h.gain[i] = alphabet.levels[digit[i]];
        w *= alphabet.probs[digit[i]];
      }
      evaluate(w);
      for (int i = symbols - 1; i >= 0; --i) {
        if (++digit[i] < alphabet.size()) break;
        digit[i] = 0;
      }
    }
    out.samples = static_cast<long>(count);
    out.g_bar = acc.g_sum;
    out.mu_bar = acc.mu_sum;
    out.avg_power = acc.p_sum;
    out.mu_stderr.assign(K, 0.0);
    return out;
  }

  if (options.monte_carlo_samples <= 0) {
    std::ostringstream os;
    os << "exact expectation needs " << alphabet.size() << "^" << symbols
       << " CSI combinations; set a Monte Carlo sample count to estimate instead";
    throw EnumerationTooLarge(os.str());
  }
  std::mt19937_64 gen(options.seed);
  std::discrete_distribution<std::size_t> pick(alphabet.probs.begin(), alphabet.probs.end());
  const long n = options.monte_carlo_samples;
  for (long s = 0; s < n; ++s) {
    for (int i = 0; i < symbols; ++i) h.gain[i] = alphabet.levels[pick(gen)];
    evaluate(1.0);
  }
  const double dn = static_cast<double>(n);
  auto stderr_of = [&](double sum, double sq) {
    if (n < 2) return 0.0;
    const double mean = sum / dn;
    const double var = std::max(0.0, (sq - dn * mean * mean) / (dn - 1.0));
    return std::sqrt(var / dn);
  };
  out.monte_carlo = true;
  out.samples = n;
  out.g_bar = acc.g_sum / dn;
  out.avg_power = acc.p_sum / dn;
  out.g_stderr = stderr_of(acc.g_sum, acc.g_sq);
  out.mu_bar.resize(K);
  out.mu_stderr.resize(K);
  for (int k = 0; k < K; ++k) {
    out.mu_bar[k] = acc.mu_sum[k] / dn;
    out.mu_stderr[k] = stderr_of(acc.mu_sum[k], acc.mu_sq[k]);
  }
  return out;
}

double ReducedKernel::prob(std::size_t from, std::size_t to) const {
  double p = 0.0;
  for (const auto& e : rows.at(from))
    if (e.target == to) p += e.prob;
  return p;
}

ReducedKernel build_kernel(const std::vector<std::vector<double>>& mu_bar, const SystemConfig& config) {
  const auto layout = PotentialTable::joint(config.K, config.N_Q);
  if (mu_bar.size() != layout.size()) throw ConfigError("mu_bar must have one row per joint state");

  ReducedKernel kernel;
  kernel.K = config.K;
  kernel.N_Q = config.N_Q;
  kernel.rows.resize(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto q = layout.state(i);
    if (mu_bar[i].size() != static_cast<std::size_t>(config.K)) throw ConfigError("mu_bar row must have K entries");
    std::size_t stride = layout.size();
    double total = 0.0, self = 1.0;
    auto& row = kernel.rows[i];
    for (int k = 0; k < config.K; ++k) {
      stride /= static_cast<std::size_t>(config.N_Q + 1);
      const double birth = config.lambda[k] * config.tau;
      const double death = q[k] > 0 ? mu_bar[i][k] * config.tau : 0.0;
      if (!(death >= 0.0)) throw ConfigError("mu_bar must be >= 0");
      total += birth + death;
      if (q[k] < config.N_Q && birth > 0.0) {
        row.push_back({i + stride, birth});
        self -= birth;
      }
      if (death > 0.0) {
        row.push_back({i - stride, death});
        self -= death;
      }
    }
    if (total > 1.0 + 1e-12) throw RegimeError(regime_message(i, total));
    row.push_back({i, std::max(self, 0.0)});
  }
  return kernel;
}

ReducedKernel build_kernel(const ActionRule& rule, const CsiAlphabet& alphabet, const SystemConfig& config,
                           const StatsOptions& options) {
  const auto layout = PotentialTable::joint(config.K, config.N_Q);
  std::vector<std::vector<double>> mu(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto q = layout.state(i);
    mu[i] = conditional_stats(q, rule, alphabet, config, options).mu_bar;
  }
  return build_kernel(mu, config);
}

PotentialTable SolveResult::table() const {
  auto t = PotentialTable::joint(K, N_Q);
  std::copy(v_tilde.begin(), v_tilde.end(), t.values().begin());
  return t;
}

SolveResult relative_value_iteration(std::span<const double> g_bar, const ReducedKernel& kernel,
                                     const RviOptions& options) {
  const std::size_t S = kernel.states();
  if (g_bar.size() != S) throw ConfigError("g_bar must have one entry per kernel state");
  SolveResult r;
  r.K = kernel.K;
  r.N_Q = kernel.N_Q;
  r.g_bar.assign(g_bar.begin(), g_bar.end());
  std::vector<double> v(S, 0.0), tv(S);
  double span = INFINITY;
  for (long it = 1; it <= options.max_iters; ++it) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < S; ++i) {
      double x = g_bar[i];
      for (const auto& e : kernel.rows[i]) x += e.prob * v[e.target];
      tv[i] = x;
      lo = std::min(lo, x - v[i]);
      hi = std::max(hi, x - v[i]);
    }
    span = hi - lo;
    if (options.record_history) r.residual_history.push_back(span);
    const double theta = tv[0] - v[0];
    for (std::size_t i = 0; i < S; ++i) v[i] = tv[i] - tv[0];
    r.iterations = it;
    r.theta = theta;
    if (span < options.epsilon) {
      r.residual = span;
      r.v_tilde = std::move(v);
      return r;
    }
  }
  std::ostringstream os;
  os << "relative value iteration did not converge in " << options.max_iters << " iterations (span " << span << ")";
  throw ConvergenceError(os.str(), span, options.max_iters);
}

SolveResult relative_value_iteration(const SystemConfig& config, const CsiAlphabet& alphabet,
                                     SubcarrierRule rule, const RviOptions& options) {
  config.validate();
  check_alphabet(alphabet);
  check_state_cap(config, options.state_cap);
  const int K = config.K;
  const auto layout = PotentialTable::joint(K, config.N_Q);
  const std::size_t S = layout.size();
  const SymbolTable sym = enumerate_symbols(K, alphabet, 1000000);
  const std::size_t combos = sym.prob.size();

  // Neighbour indices: up[i*K+k] is the birth target (i itself when blocked),
  // down[i*K+k] the death target (i itself when empty).
  std::vector<std::size_t> up(S * K), down(S * K);
  std::vector<double> queue_cost(S);
  std::vector<int> qs(S * K);
  for (std::size_t i = 0; i < S; ++i) {
    const auto q = layout.state(i);
    std::size_t stride = S;
    double cost = 0.0;
    for (int k = 0; k < K; ++k) {
      stride /= static_cast<std::size_t>(config.N_Q + 1);
      up[i * K + k] = q[k] < config.N_Q ? i + stride : i;
      down[i * K + k] = q[k] > 0 ? i - stride : i;
      qs[i * K + k] = q[k];
      cost += config.delay_weight(k) * q[k];
    }
    queue_cost[i] = cost;
  }
  std::vector<double> birth(K), coef(K), rate_scale(K);
  for (int k = 0; k < K; ++k) {
    birth[k] = config.lambda[k] * config.tau;
    coef[k] = config.service_coefficient(k);
    rate_scale[k] = config.rate_scale(k);
  }

  SolveResult r;
  r.K = K;
  r.N_Q = config.N_Q;
  r.g_bar.assign(S, 0.0);
  r.mu_bar.assign(S, std::vector<double>(K, 0.0));

  std::vector<double> v(S, 0.0), tv(S), c(K), death_tau(K);
  double span = INFINITY;
  for (long it = 1; it <= options.max_iters; ++it) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < S; ++i) {
      for (int k = 0; k < K; ++k) c[k] = qs[i * K + k] > 0 ? (v[i] - v[down[i * K + k]]) * coef[k] : 0.0;
      // Per-subband expectation of the surplus, power and service.
      double surplus = 0.0, power = 0.0;
      std::fill(death_tau.begin(), death_tau.end(), 0.0);
      for (std::size_t s = 0; s < combos; ++s) {
        const std::span<const double> gains(&sym.gains[s * K], K);
        const SubbandDecision d = decide_subband(gains, c, config.gamma, rule);
        if (d.power <= 0.0) continue;
        const double w = sym.prob[s];
        surplus += w * d.surplus;
        power += w * d.power;
        death_tau[d.winner] += w * rate_scale[d.winner] * std::log2(1.0 + gains[d.winner] * d.power);
      }
      double x = queue_cost[i] + v[i] - config.N_F * surplus;
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        x += birth[k] * (v[up[i * K + k]] - v[i]);
        total += birth[k] + config.N_F * death_tau[k];
      }
      if (total > 1.0 + 1e-12) throw RegimeError(regime_message(i, total));
      tv[i] = x;
      lo = std::min(lo, x - v[i]);
      hi = std::max(hi, x - v[i]);
      r.g_bar[i] = queue_cost[i] + config.gamma * config.N_F * power;
      for (int k = 0; k < K; ++k) r.mu_bar[i][k] = config.N_F * death_tau[k] / config.tau;
    }
    span = hi - lo;
    if (options.record_history) r.residual_history.push_back(span);
    const double theta = tv[0] - v[0];
    for (std::size_t i = 0; i < S; ++i) v[i] = tv[i] - tv[0];
    r.iterations = it;
    r.theta = theta;
    if (span < options.epsilon) {
      r.residual = span;
      r.v_tilde = std::move(v);
      return r;
    }
  }
  std::ostringstream os;
  os << "relative value iteration did not converge in " << options.max_iters << " iterations (span " << span << ")";
  throw ConvergenceError(os.str(), span, options.max_iters);
}

UserStats csi_only_user_stats(int k, int q, double increment, const CsiAlphabet& alphabet,
                              const SystemConfig& config) {
  UserStats s;
  const double c = q > 0 ? increment * config.service_coefficient(k) : 0.0;
  const int lower = k, higher = config.K - 1 - k;
  double below = 0.0;  // P(gain < level j)
  double win_power = 0.0, win_rate = 0.0;
  for (std::size_t j = 0; j < alphabet.size(); ++j) {
    const double at_most = below + alphabet.probs[j];
    // User k wins at level j: lower-indexed users strictly below, higher-indexed at most j.
    const double win = alphabet.probs[j] * std::pow(below, lower) * std::pow(at_most, higher);
    const double p = waterfill_power(alphabet.levels[j], c / config.gamma);
    if (p > 0.0) {
      win_power += win * p;
      win_rate += win * std::log2(1.0 + alphabet.levels[j] * p);
    }
    below = at_most;
  }
  s.avg_power = config.N_F * win_power;
  s.g_bar = config.delay_weight(k) * q + config.gamma * s.avg_power;
  s.mu_bar = config.N_F * config.subband_bandwidth * win_rate / config.mean_packet_bits[k];
  return s;
}

std::pair<double, std::vector<double>> solve_birth_death_poisson(std::span<const double> g,
                                                                 std::span<const double> mu, double lambda,
                                                                 double tau) {
  const std::size_t n = g.size();
  if (n < 2 || mu.size() != n) throw ConfigError("Poisson solve needs N_Q+1 >= 2 rewards and service rates");
  std::vector<double> v(n, 0.0);
  const double b = lambda * tau;
  if (!(b > 0.0)) return {0.0, v};
  const std::size_t N = n - 1;
  for (std::size_t q = 0; q < n; ++q) {
    const double d = q > 0 ? mu[q] * tau : 0.0;
    if ((q < N ? b : 0.0) + d > 1.0 + 1e-12) throw RegimeError(regime_message(q, b + d));
  }

  // theta is the stationary average of g; weights r(q) proportional to pi(q),
  // built from the top state so that d(q) = 0 below it gives pi(q) = 0.
  std::vector<double> log_r(n, 0.0);
  for (std::size_t q = N; q-- > 0;) log_r[q] = log_r[q + 1] + std::log(mu[q + 1] * tau) - std::log(b);
  const double top = *std::max_element(log_r.begin(), log_r.end());
  double norm = 0.0, theta = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double w = std::exp(log_r[q] - top);
    norm += w;
    theta += w * g[q];
  }
  theta /= norm;

  // theta = g(q) + b*D(q+1) - d(q)*D(q) with D(q) = V(q) - V(q-1) and D(0) = 0.
  // Forward recursion multiplies rounding by d/b per level, so use the
  // balance form b*pi(q)*D(q+1) = sum_{j<=q} pi(j) (theta - g(j))
  // = sum_{j>q} pi(j) (g(j) - theta), summing over the lighter side to
  // avoid cancellation. Transient states (pi(q) = 0) use the recursion.
  double delta = 0.0;
  for (std::size_t q = 0; q < N; ++q) {
    if (std::isfinite(log_r[q])) {
      double head = 0.0, head_mass = 0.0, tail = 0.0, tail_mass = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = std::exp(log_r[j] - log_r[q]);
        if (j <= q) {
          head += w * (theta - g[j]);
          head_mass += w;
        } else {
          tail += w * (g[j] - theta);
          tail_mass += w;
        }
      }
      delta = (tail_mass < head_mass ? tail : head) / b;
    } else {
      const double d = q > 0 ? mu[q] * tau : 0.0;
      delta = (theta - g[q] + d * delta) / b;
    }
    v[q + 1] = v[q] + delta;
  }
  return {theta, v};
}

UserSolution poisson_policy_step(int k, std::span<const double> v, const CsiAlphabet& alphabet,
                                 const SystemConfig& config) {
  const int n = config.N_Q + 1;
  if (static_cast<int>(v.size()) != n) throw ConfigError("per-user potential must have N_Q+1 entries");
  UserSolution s;
  s.user = k;
  s.g_bar.resize(n);
  s.mu_bar.resize(n);
  for (int q = 0; q < n; ++q) {
    const UserStats st = csi_only_user_stats(k, q, q > 0 ? v[q] - v[q - 1] : 0.0, alphabet, config);
    s.g_bar[q] = st.g_bar;
    s.mu_bar[q] = st.mu_bar;
  }
  auto [theta, vk] = solve_birth_death_poisson(s.g_bar, s.mu_bar, config.lambda[k], config.tau);
  s.theta = theta;
  s.v = std::move(vk);
  return s;
}

UserSolution per_user_poisson_solve(int k, const CsiAlphabet& alphabet, const SystemConfig& config,
                                    const PoissonOptions& options) {
  config.validate();
  check_alphabet(alphabet);
  if (k < 0 || k >= config.K) throw ConfigError("user index out of range");
  std::vector<double> v(config.N_Q + 1, 0.0);
  std::vector<double> trace;
  for (int it = 1; it <= options.max_iters; ++it) {
    UserSolution s = poisson_policy_step(k, v, alphabet, config);
    trace.push_back(s.theta);
    double change = 0.0, scale = 1.0;
    for (std::size_t q = 0; q < v.size(); ++q) {
      change = std::max(change, std::fabs(s.v[q] - v[q]));
      scale = std::max(scale, std::fabs(s.v[q]));
    }
    v = s.v;
    if (change <= options.tolerance * scale) {
      s.iterations = it;
      s.theta_trace = std::move(trace);
      return s;
    }
  }
  std::ostringstream os;
  os << "per-user policy iteration for user " << k << " did not settle in " << options.max_iters
     << " iterations; theta trace:";
  const std::size_t shown = std::min<std::size_t>(trace.size(), 8);
  for (std::size_t i = trace.size() - shown; i < trace.size(); ++i) os << ' ' << trace[i];
  throw ConvergenceError(os.str(), trace.empty() ? INFINITY : trace.back(), options.max_iters);
}

PotentialTable decomposed_table(const std::vector<UserSolution>& users, int n_q) {
  auto t = PotentialTable::decomposed(static_cast<int>(users.size()), n_q);
  for (std::size_t k = 0; k < users.size(); ++k) std::copy(users[k].v.begin(), users[k].v.end(), t.user(k).begin());
  return t;
}

AdditivityReport verify_additivity(const SystemConfig& config, const CsiAlphabet& alphabet, SubcarrierRule rule,
                                   const RviOptions& options) {
  AdditivityReport rep;
  rep.rule = rule;
  rep.joint = relative_value_iteration(config, alphabet, rule, options);
  for (int k = 0; k < config.K; ++k) {
    rep.users.push_back(per_user_poisson_solve(k, alphabet, config));
    rep.theta_sum += rep.users.back().theta;
  }
  rep.theta_gap = std::fabs(rep.joint.theta - rep.theta_sum);
  const auto layout = PotentialTable::joint(config.K, config.N_Q);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto q = layout.state(i);
    double sum = 0.0;
    for (int k = 0; k < config.K; ++k) sum += rep.users[k].v[q[k]];
    rep.max_potential_gap = std::max(rep.max_potential_gap, std::fabs(rep.joint.v_tilde[i] - sum));
  }
  return rep;
}

}  // namespace delayopt
