// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// (AC1 ... AC11) as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "delayopt/config.hpp"
#include "delayopt/learner.hpp"
#include "delayopt/oracle.hpp"
#include "delayopt/simulation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace delayopt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

LoadedConfig config_file(const std::string& name) { return load_config(std::string(DELAYOPT_CONFIG_DIR) + "/" + name); }

// Counts slots whose action breaks the assignment or power constraints.
struct ConstraintLog {
  long slots = 0;
  long violations = 0;
  std::vector<std::string> calibration;  // "<policy>@<snr>: power/P_0 - 1"
  bool calibration_ok = true;
  bool calibrated_any = false;
} constraint_log;

class CheckedScheduler : public Scheduler {
 public:
  explicit CheckedScheduler(std::unique_ptr<Scheduler> inner) : inner_(std::move(inner)) {}
  Action decide(const SlotView& view) override {
    Action a = inner_->decide(view);
    ++constraint_log.slots;
    bool ok = a.subbands() == view.config.N_F && a.valid(view.config.K);
    for (int n = 0; ok && n < a.subbands(); ++n) {
      int owners = 0;
      for (int k = 0; k < view.config.K; ++k) owners += a.s(k, n);
      ok = owners == 1 && a.power[n] >= 0.0;
    }
    if (!ok) ++constraint_log.violations;
    return a;
  }

 private:
  std::unique_ptr<Scheduler> inner_;
};

Metrics checked_run(const SystemConfig& cfg, const PreparedPolicy& p, std::uint64_t seed, long warmup, long measure) {
  CheckedScheduler s(p.scheduler());
  return run_replication(cfg, s, seed, warmup, measure);
}

PreparedPolicy calibrated(PolicyKind kind, const SystemConfig& cfg, const SolverSettings& st, std::uint64_t seed) {
  PreparedPolicy p = prepare_policy(kind, cfg, st, seed, true);
  const double rel = p.calibration->avg_power / cfg.P_0 - 1.0;
  std::ostringstream os;
  os << to_string(kind) << "@" << cfg.snr_db() << "dB " << std::showpos << std::setprecision(3) << 100.0 * rel << "%";
  constraint_log.calibration.push_back(os.str());
  constraint_log.calibration_ok = constraint_log.calibration_ok && std::fabs(rel) <= 0.02;
  constraint_log.calibrated_any = true;
  return p;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = config_file("example_k1.cfg").system;
  const double b = cfg.lambda[0] * cfg.tau, d = 0.2;
  const ReducedKernel P = build_kernel({{0.0}, {d / cfg.tau}}, cfg);
  const std::vector<double> g{0.0, per_stage_reward(std::vector<int>{1}, cfg.P_0, cfg)};
  RviOptions opts;
  opts.epsilon = 1e-12;
  const auto r = relative_value_iteration(g, P, opts);
  const double expected = oracle::two_state_theta(b, d, g[0], g[1]);
  const double err = std::fabs(r.theta - expected), t = seconds_since(start);
  std::ostringstream os;
  os << "theta=" << r.theta << " hand=" << expected << " err=" << err << " time=" << t << "s";
  return {err <= 1e-8 && t < 1.0, os.str()};
}

Outcome ac2() {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = fixture::two_users();
  RviOptions opts;
  opts.epsilon = 1e-11;
  const auto rep = verify_additivity(cfg, build_csi_alphabet(2), SubcarrierRule::CsiOnly, opts);
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "max|V-sum V_k|=" << rep.max_potential_gap << " |theta-sum theta_k|=" << rep.theta_gap << " time=" << t << "s";
  return {rep.max_potential_gap < 1e-6 && rep.theta_gap < 1e-6 && t < 10.0, os.str()};
}

Outcome ac3() {
  std::mt19937_64 gen(2024);
  std::exponential_distribution<double> unit(1.0);
  double worst = 0.0;
  int draws = 0;
  for (int i = 0; i < 100; ++i) {
    const int N_F = 1 + i % 3;
    auto cfg = fixture::users(2, N_F, 6);
    auto table = PotentialTable::decomposed(2, 6);
    for (int k = 0; k < 2; ++k)
      for (int q = 1; q <= 6; ++q) table.user(k)[q] = table.user(k)[q - 1] + 4.0 * unit(gen);
    ChannelState h(2, N_F);
    for (auto& x : h.gain) x = unit(gen);
    const std::vector<int> q{static_cast<int>(gen() % 7), static_cast<int>(gen() % 7)};
    const auto c = scaled_increments(table, q, cfg);
    const double got = allocation_objective(h, allocate_optimal(h, q, table, cfg), c, cfg.gamma);
    const double best = oracle::brute_force_min_objective(h, c, cfg.gamma);
    worst = std::max(worst, std::fabs(got - best) / std::max(1.0, std::fabs(best)));
    ++draws;
  }
  std::ostringstream os;
  os << draws << " draws, max gap to exhaustive minimum " << worst;
  return {worst <= 1e-9, os.str()};
}

Outcome ac4() {
  const auto start = std::chrono::steady_clock::now();
  const auto loaded = config_file("example_k1.cfg");
  const auto& cfg = loaded.system;
  RviOptions ro;
  ro.epsilon = 1e-12;
  const auto exact = relative_value_iteration(cfg, build_csi_alphabet(cfg.csi_levels), SubcarrierRule::Optimal, ro);
  std::vector<double> v_err, theta_err;
  long most_periods = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainOptions opts;
    opts.settings = loaded.solver;
    opts.settings.max_periods = 5000;
    opts.settings.delta_v = 1e-12;  // run the full period budget
    opts.settings.train_slots = 0;
    opts.seed = training_seed(seed);
    const auto r = train_joint(cfg, opts);
    most_periods = std::max(most_periods, r.periods[0]);
    v_err.push_back(std::fabs(r.table.values()[1] - exact.v_tilde[1]) / std::fabs(exact.v_tilde[1]));
    TableScheduler s(r.table, SubcarrierRule::Optimal);
    const auto m = run_replication(cfg, s, seed, 10000, 1000000);
    const double theta = cfg.delay_weight(0) * m.avg_queue[0] + cfg.gamma * m.avg_power;
    theta_err.push_back(std::fabs(theta - exact.theta) / exact.theta);
  }
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "median |dV(1)|/V(1)=" << median(v_err) << " median |dtheta|/theta=" << median(theta_err)
     << " periods<=" << most_periods << " time=" << t << "s";
  return {median(v_err) <= 0.10 && median(theta_err) <= 0.05 && most_periods <= 5000 && t < 120.0, os.str()};
}

Outcome ac5() {
  const auto start = std::chrono::steady_clock::now();
  // A low price keeps every backlogged state served, so each regenerative
  // period closes. At gamma = 0.0063 one early update can leave a zero-power
  // full buffer and the learner stalls.
  auto cfg = fixture::two_users();
  cfg.gamma = 0.001;
  const auto alphabet = build_csi_alphabet(cfg.csi_levels);
  std::vector<UserSolution> exact;
  for (int k = 0; k < cfg.K; ++k) exact.push_back(per_user_poisson_solve(k, alphabet, cfg));
  // err[k][q] over seeds
  std::vector<std::vector<std::vector<double>>> err(cfg.K, std::vector<std::vector<double>>(cfg.N_Q + 1));
  int completed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainOptions opts;
    opts.settings.max_periods = 50000;
    opts.settings.delta_v = 1e-12;
    opts.seed = training_seed(seed);
    const auto r = train_decomposed(cfg, opts);
    completed += r.stop_reason == "max_periods";
    for (int k = 0; k < cfg.K; ++k)
      for (int q = 1; q <= cfg.N_Q; ++q)
        err[k][q].push_back(std::fabs(r.table.user(k)[q] - exact[k].v[q]) / std::fabs(exact[k].v[q]));
  }
  double worst = 0.0;
  for (int k = 0; k < cfg.K; ++k)
    for (int q = 1; q <= cfg.N_Q; ++q) worst = std::max(worst, median(err[k][q]));
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "worst elementwise median relative error " << worst << ", " << completed
     << "/10 runs completed 50000 periods, time=" << t << "s";
  return {worst <= 0.10 && t < 300.0, os.str()};
}

Outcome ac7() {
  const StepsizeSchedule s;
  s.validate();
  double sum = 0.0, sq = 0.0, sq_half = 0.0;
  const long n = 1000000;
  for (long k = 0; k < n; ++k) {
    const double e = stepsize(s, k);
    sum += e;
    sq += e * e;
    if (k == n / 2 - 1) sq_half = sq;
  }
  const double tail = sq - sq_half;
  std::ostringstream os;
  os << "sum eps=" << sum << " sum eps^2=" << sq << " increment over the second half=" << tail;
  return {sum > 10.0 && tail < 1e-4, os.str()};
}

Outcome ac8() {
  const auto loaded = config_file("fig3.cfg");
  const auto& cfg = loaded.system;
  double worst = 0.0;
  int runs = 0;
  std::ostringstream os;
  for (PolicyKind kind : {PolicyKind::Decomposed, PolicyKind::MLWDF, PolicyKind::RoundRobin}) {
    const auto p = prepare_policy(kind, cfg, loaded.solver, 1, false);
    const auto m = checked_run(cfg, p, 1, loaded.solver.warmup_slots, 1000000);
    if (!m.warnings.empty()) {
      os << to_string(kind) << " unstable; ";
      continue;
    }
    ++runs;
    for (int k = 0; k < cfg.K; ++k)
      worst = std::max(worst, std::fabs(m.avg_delay_littles[k] - m.avg_delay_sojourn[k]) / m.avg_delay_sojourn[k]);
  }
  os << runs << " stable runs of 1e6 slots, max relative gap " << worst;
  return {runs == 3 && worst <= 0.05, os.str()};
}

Outcome ac9() {
  const auto loaded = config_file("fig3.cfg");
  const std::vector<double> grid{24.0, 26.0, 28.0};
  const std::vector<PolicyKind> policies{PolicyKind::Decomposed, PolicyKind::MLWDF, PolicyKind::RoundRobin};
  std::vector<SweepRecord> records;
  std::map<std::pair<std::string, double>, double> avg;
  for (PolicyKind kind : policies)
    for (double snr : grid) {
      SystemConfig cfg = loaded.system;
      cfg.set_snr_db(snr);
      const auto p = calibrated(kind, cfg, loaded.solver, 1);
      cfg.gamma = p.gamma;
      std::vector<double> delays;
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto m = checked_run(cfg, p, seed, loaded.solver.warmup_slots, loaded.solver.measure_slots);
        records.push_back({to_string(kind), snr, seed, m.weighted_delay});
        delays.push_back(m.weighted_delay);
      }
      avg[{to_string(kind), snr}] = mean(delays);
    }

  bool pass = true;
  std::ostringstream os;
  os << std::setprecision(3);
  for (const auto& c : compare(records)) {
    if (c.policy_a != "decomposed") continue;
    const bool ok = avg[{"decomposed", c.snr_db}] < avg[{c.policy_b, c.snr_db}] && c.p_value < 0.05;
    pass = pass && ok;
    os << c.policy_b << "@" << c.snr_db << ": " << avg[{"decomposed", c.snr_db}] << " vs " << avg[{c.policy_b, c.snr_db}]
       << " s, p=" << c.p_value << "; ";
  }
  // Round-Robin delay level matched at an SNR at least 1 dB lower.
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double lower = avg[{"decomposed", grid[i - 1]}], rr = avg[{"round_robin", grid[i]}];
    const bool ok = grid[i] - grid[i - 1] >= 1.0 && lower <= rr;
    pass = pass && ok;
    os << "decomposed@" << grid[i - 1] << "=" << lower << " vs round_robin@" << grid[i] << "=" << rr << "; ";
  }
  return {pass, os.str()};
}

Outcome ac10() {
  // Per-user traffic stays fixed as users are added. Potentials are the
  // per-user solutions on a fine alphabet, where gain ties are rare and
  // identical users get identical potentials.
  const auto loaded = config_file("fig6.cfg");
  std::vector<double> rate, se;
  std::ostringstream os;
  os << std::setprecision(4);
  for (int K : {2, 4, 8, 16}) {
    SystemConfig cfg = loaded.system;
    cfg.K = K;
    cfg.lambda.assign(K, loaded.system.lambda[0]);
    cfg.mean_packet_bits.assign(K, loaded.system.mean_packet_bits[0]);
    cfg.beta.assign(K, 1.0);
    const auto alphabet = build_csi_alphabet(64);
    std::vector<UserSolution> users;
    for (int k = 0; k < K; ++k) users.push_back(per_user_poisson_solve(k, alphabet, cfg));
    const auto a = assignment_agreement(cfg, decomposed_table(users, cfg.N_Q), 20000, 10000, 1);
    rate.push_back(a.rate);
    se.push_back(a.stderr);
    os << "K=" << K << ": " << a.rate << " +/- " << a.stderr << "; ";
  }
  int inversions = 0;
  bool pass = true;
  for (std::size_t i = 1; i < rate.size(); ++i) {
    if (rate[i] >= rate[i - 1]) continue;
    ++inversions;
    pass = pass && rate[i - 1] - rate[i] <= std::max(se[i], se[i - 1]);
  }
  os << inversions << " inversion(s)";
  return {pass && inversions <= 1, os.str()};
}

Outcome ac11() {
  const auto loaded = config_file("fig6.cfg");
  const SystemConfig& base = loaded.system;
  const SolverSettings& st = loaded.solver;
  std::map<PolicyKind, double> delay;
  double gamma = base.gamma;
  for (PolicyKind kind : {PolicyKind::Decomposed, PolicyKind::MLWDF, PolicyKind::RoundRobin}) {
    const auto p = calibrated(kind, base, st, 1);
    SystemConfig cfg = base;
    cfg.gamma = p.gamma;
    if (kind == PolicyKind::Decomposed) gamma = p.gamma;
    std::vector<double> d;
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
      d.push_back(checked_run(cfg, p, seed, st.warmup_slots, st.measure_slots).weighted_delay);
    delay[kind] = mean(d);
  }

  // Per-user periods until every user's last update is below delta_v at once.
  SystemConfig cfg = base;
  cfg.gamma = gamma;
  TrainOptions opts;
  opts.settings = st;
  opts.settings.train_slots = 0;
  opts.settings.max_periods = 5000;
  opts.seed = training_seed(1);
  const auto r = train_decomposed(cfg, opts);
  long stable_at = -1;
  if (r.converged) stable_at = *std::max_element(r.periods.begin(), r.periods.end());

  const bool fast = stable_at >= 0 && stable_at <= 500;
  const bool better = delay[PolicyKind::Decomposed] < delay[PolicyKind::MLWDF] &&
                      delay[PolicyKind::Decomposed] < delay[PolicyKind::RoundRobin];
  std::ostringstream os;
  os << std::setprecision(4) << "delta_v-stable after " << (stable_at < 0 ? std::string("never (5000 cap)")
                                                                          : std::to_string(stable_at))
     << " per-user periods (need <= 500); delay decomposed=" << delay[PolicyKind::Decomposed]
     << " mlwdf=" << delay[PolicyKind::MLWDF] << " round_robin=" << delay[PolicyKind::RoundRobin] << " s";
  return {fast && better, os.str()};
}

Outcome ac6() {
  std::ostringstream os;
  os << constraint_log.violations << " violating slots of " << constraint_log.slots << " checked; calibration:";
  for (const auto& c : constraint_log.calibration) os << " " << c;
  return {constraint_log.slots > 0 && constraint_log.violations == 0 && constraint_log.calibrated_any &&
              constraint_log.calibration_ok,
          os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  // AC6 audits the runs of the others, so it goes last.
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},   {"AC5", ac5},   {"AC7", ac7},
      {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}, {"AC11", ac11}, {"AC6", ac6}};
  std::set<std::string> wanted(argv + 1, argv + argc);

  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& [name, run] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::ostringstream line;
    line << name << " " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail;
    std::cerr << name << " done in " << seconds_since(start) << " s\n";
    lines[std::stoi(name.substr(2))] = line.str();
  }
  for (const auto& [n, line] : lines) std::cout << line << "\n";
  return all ? 0 : 1;
}
