// Command-line front end: simulate, train, oracle, sweep, convergence, compare.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "delayopt/errors.hpp"
#include "delayopt/learner.hpp"
#include "delayopt/model.hpp"
#include "delayopt/oracle.hpp"
#include "delayopt/simulation.hpp"
#include "delayopt/table_io.hpp"

namespace fs = std::filesystem;
using namespace delayopt;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int report(int code, const std::string& kind, const std::string& message) {
  std::cerr << "error code=" << code << " kind=" << kind << " message=\"" << escape(message) << "\"\n";
  return code;
}

const char* kSnrNote = "# snr_db = 10*log10(P_0 / N_F), noise power 1 per subband\n";

LoadedConfig load(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  auto cfg = load_config(path);
  for (const auto& w : cfg.system.validate()) std::cerr << "warning: " << w << "\n";
  cfg.solver.validate();
  return cfg;
}

std::string summary_line(const std::string& label, const Metrics& m) {
  std::ostringstream os;
  os << label << ": avg_power=" << m.avg_power << " weighted_delay=" << m.weighted_delay << " s";
  for (std::size_t k = 0; k < m.avg_queue.size(); ++k)
    os << " q" << k + 1 << '=' << m.avg_queue[k] << " drop" << k + 1 << '=' << m.drop_rate[k];
  return os.str();
}

std::string train_summary(const TrainResult& r) {
  std::ostringstream os;
  os << "slots=" << r.slots << " converged=" << (r.converged ? "yes" : "no") << " stop=" << r.stop_reason
     << " periods=";
  for (std::size_t k = 0; k < r.periods.size(); ++k) os << (k ? "," : "") << r.periods[k];
  if (!r.diagnostic.empty()) os << " diagnostic=\"" << r.diagnostic << "\"";
  return os.str();
}

// State-coverage counts, one row per tracked state.
std::string coverage_table(const TrainResult& r, const PotentialTable& table) {
  std::ostringstream os;
  if (table.kind() == PotentialTable::Kind::Joint) {
    os << "state_index,visits\n";
    for (std::size_t i = 0; i < r.visits.size(); ++i) os << i << ',' << r.visits[i] << "\n";
  } else {
    os << "user,q,visits\n";
    const std::size_t n = table.n_q() + 1;
    for (std::size_t i = 0; i < r.visits.size(); ++i) os << i / n + 1 << ',' << i % n << ',' << r.visits[i] << "\n";
  }
  return os.str();
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError(std::string("malformed ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what);
  return out;
}

std::vector<PolicyKind> parse_policies(const std::string& text) {
  std::vector<PolicyKind> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_policy(item));
  if (out.empty()) throw ConfigError("empty policy list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-optimal OFDMA power and subcarrier allocation: simulator, MDP oracle and online learners"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, in_dir, policy = "decomposed", algorithm = "decomposed", rule = "csi_only";
  std::string snr_list, seed_list = "1,2,3,4,5,6,7,8,9,10", policy_list = "decomposed,mlwdf,round_robin";
  std::uint64_t seed = 0;
  bool calibrate = false, no_calibrate = false, snapshots = false;
  int jobs = 1;

  auto* sim = app.add_subcommand("simulate", "Run one replication of a policy and write its metrics");
  sim->add_option("--config", config_path, "Configuration file")->required();
  sim->add_option("--policy", policy, "decomposed | joint | mlwdf | round_robin")->capture_default_str();
  sim->add_option("--seed", seed, "Replication seed (default: rng_seed from the config)");
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_flag("--calibrate", calibrate, "Bisect gamma so the average power matches P_0 first");

  auto* train = app.add_subcommand("train", "Run online value iteration and write the learned table and trace");
  train->add_option("--config", config_path, "Configuration file")->required();
  train->add_option("--algorithm", algorithm, "joint (joint-state learner) | decomposed (per-user learners)")
      ->capture_default_str();
  train->add_option("--seed", seed, "Training seed (default: rng_seed from the config)");
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_flag("--snapshots", snapshots, "Record the table after every update in the trace");

  auto* oracle = app.add_subcommand("oracle", "Solve the reduced-state Bellman equation exactly on the CSI alphabet");
  oracle->add_option("--config", config_path, "Configuration file")->required();
  oracle->add_option("--out", out_dir, "Output directory")->required();
  oracle->add_option("--rule", rule, "Subcarrier rule of the joint solve: csi_only | optimal")->capture_default_str();

  auto* sw = app.add_subcommand("sweep", "Evaluate policies over an SNR grid and seeds with common random numbers");
  sw->add_option("--config", config_path, "Configuration file")->required();
  sw->add_option("--snr-list", snr_list, "Comma-separated SNR points in dB")->required();
  sw->add_option("--seeds", seed_list, "Comma-separated replication seeds")->capture_default_str();
  sw->add_option("--policies", policy_list, "Comma-separated policies")->capture_default_str();
  sw->add_option("--out", out_dir, "Output directory")->required();
  sw->add_option("--jobs", jobs, "Concurrent (policy, SNR) cells")->capture_default_str()->check(CLI::PositiveNumber);
  sw->add_flag("--no-calibrate", no_calibrate, "Use the config's gamma instead of matching P_0");

  auto* conv = app.add_subcommand("convergence", "Trace potentials and running delay of an online learner");
  conv->add_option("--config", config_path, "Configuration file")->required();
  conv->add_option("--algorithm", algorithm, "joint | decomposed")->capture_default_str();
  conv->add_option("--seed", seed, "Training seed (default: rng_seed from the config)");
  conv->add_option("--out", out_dir, "Output directory")->required();

  auto* cmp = app.add_subcommand("compare", "Paired per-seed statistics from a sweep output directory");
  cmp->add_option("--in", in_dir, "Directory holding sweep.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kExitValidation, "usage", e.what());
  }

  try {
    const fs::path out(out_dir);

    if (*sim) {
      const auto cfg = load(config_path);
      const PolicyKind kind = parse_policy(policy);
      const std::uint64_t s = seed ? seed : cfg.system.rng_seed;
      const auto prepared = prepare_policy(kind, cfg.system, cfg.solver, s, calibrate);
      SystemConfig run_cfg = cfg.system;
      run_cfg.gamma = prepared.gamma;
      auto sched = prepared.scheduler();
      SweepRow row;
      row.policy = kind;
      row.snr_db = run_cfg.snr_db();
      row.seed = s;
      row.gamma = prepared.gamma;
      row.metrics = run_replication(run_cfg, *sched, s, cfg.solver.warmup_slots, cfg.solver.measure_slots);
      for (const auto& w : row.metrics.warnings) std::cerr << "warning: " << w << "\n";
      write_atomic(out / "metrics.csv", kSnrNote + sweep_table({row}, run_cfg.K));
      if (prepared.table) write_atomic(out / "table.csv", potential_table_csv(*prepared.table));
      std::cout << summary_line(to_string(kind), row.metrics) << " gamma=" << prepared.gamma << "\n";
      return 0;
    }

    if (*train || *conv) {
      if (algorithm != "joint" && algorithm != "decomposed")
        throw ConfigError("--algorithm must be joint or decomposed");
      const auto cfg = load(config_path);
      TrainOptions opts;
      opts.settings = cfg.solver;
      opts.seed = seed ? seed : cfg.system.rng_seed;
      opts.snapshots = snapshots;
      const TrainResult r = algorithm == "joint" ? train_joint(cfg.system, opts) : train_decomposed(cfg.system, opts);
      write_atomic(out / "trace.csv", trace_table(r));
      if (*train) {
        write_atomic(out / "table.csv", potential_table_csv(r.table));
        write_atomic(out / "coverage.csv", coverage_table(r, r.table));
      } else {
        write_atomic(out / "convergence.gp",
                     gnuplot_script("trace.csv", "slots_elapsed", "mean_potential", "Mean potential per update") +
                         "pause -1\n" +
                         gnuplot_script("trace.csv", "slots_elapsed", "running_weighted_delay",
                                        "Running weighted delay (s)"));
        long stable = -1;
        if (r.converged)
          for (long p : r.periods) stable = std::max(stable, p);
        std::cout << "stabilization_period=" << stable << "\n";
      }
      std::cout << train_summary(r) << "\n";
      if (!r.diagnostic.empty()) std::cerr << "warning: " << r.diagnostic << "\n";
      return 0;
    }

    if (*oracle) {
      if (rule != "csi_only" && rule != "optimal") throw ConfigError("--rule must be csi_only or optimal");
      const auto cfg = load(config_path);
      const auto alphabet = build_csi_alphabet(cfg.system.csi_levels);
      RviOptions ropts;
      ropts.epsilon = cfg.solver.vi_epsilon;
      ropts.max_iters = cfg.solver.vi_max_iters;
      ropts.state_cap = cfg.solver.joint_state_cap;
      const auto rep = verify_additivity(cfg.system, alphabet,
                                         rule == "optimal" ? SubcarrierRule::Optimal : SubcarrierRule::CsiOnly, ropts);
      std::ostringstream dec;
      dec << std::setprecision(12) << "state_index";
      for (int k = 0; k < cfg.system.K; ++k) dec << ",q_" << k + 1;
      dec << ",g_bar";
      for (int k = 0; k < cfg.system.K; ++k) dec << ",mu_bar_" << k + 1;
      dec << "\n";
      const auto layout = rep.joint.table();
      for (std::size_t i = 0; i < layout.size(); ++i) {
        dec << i;
        for (int q : layout.state(i)) dec << ',' << q;
        dec << ',' << rep.joint.g_bar[i];
        for (double m : rep.joint.mu_bar[i]) dec << ',' << m;
        dec << "\n";
      }
      std::ostringstream add;
      add << std::setprecision(12) << "rule=" << rule << "\ntheta_joint=" << rep.joint.theta
          << "\ntheta_sum=" << rep.theta_sum << "\ntheta_gap=" << rep.theta_gap
          << "\nmax_potential_gap=" << rep.max_potential_gap << "\n";
      write_atomic(out / "joint.csv", solve_result_table(rep.joint));
      write_atomic(out / "decisions.csv", dec.str());
      write_atomic(out / "users.csv", user_solutions_table(rep.users));
      write_atomic(out / "additivity.txt", add.str());
      std::cout << std::setprecision(12) << "theta=" << rep.joint.theta << " iterations=" << rep.joint.iterations
                << " residual=" << rep.joint.residual << " theta_sum=" << rep.theta_sum
                << " max_potential_gap=" << rep.max_potential_gap << "\n";
      return 0;
    }

    if (*sw) {
      const auto cfg = load(config_path);
      ExperimentSpec spec;
      spec.config = cfg.system;
      spec.settings = cfg.solver;
      spec.policies = parse_policies(policy_list);
      spec.snr_db = parse_list<double>(snr_list, "SNR list");
      spec.seeds = parse_list<std::uint64_t>(seed_list, "seed list");
      spec.calibrate = !no_calibrate;
      if (spec.settings.measure_slots < 10 * spec.settings.warmup_slots)
        std::cerr << "warning: measure_slots is below 10x warmup_slots\n";
      const auto rows = sweep(spec, jobs);
      std::ostringstream errors;
      errors << "policy,snr_db,seed,error\n";
      bool any_error = false;
      for (const auto& r : rows) {
        for (const auto& w : r.metrics.warnings)
          std::cerr << "warning: " << to_string(r.policy) << " snr=" << r.snr_db << " seed=" << r.seed << ": " << w
                    << "\n";
        if (r.error.empty()) continue;
        any_error = true;
        errors << to_string(r.policy) << ',' << r.snr_db << ',' << r.seed << ",\"" << escape(r.error) << "\"\n";
      }
      write_atomic(out / "sweep.csv", kSnrNote + sweep_table(rows, cfg.system.K));
      write_atomic(out / "comparisons.csv", comparison_table(compare(to_records(rows))));
      write_atomic(out / "sweep.gp", gnuplot_script("sweep.csv", "snr_db", "weighted_delay",
                                                    "Weighted delay versus SNR", true));
      if (any_error) {
        write_atomic(out / "errors.csv", errors.str());
        std::cerr << "warning: some sweep cells failed; see errors.csv\n";
      }
      std::cout << "cells=" << rows.size() << " written to " << out.string() << "\n";
      return 0;
    }

    if (*cmp) {
      const fs::path in(in_dir);
      std::ifstream f(in / "sweep.csv");
      if (!f) throw ConfigError("cannot read " + (in / "sweep.csv").string());
      std::stringstream text;
      text << f.rdbuf();
      const auto table = comparison_table(compare(read_sweep_table(text.str())));
      write_atomic(in / "comparisons.csv", table);
      std::cout << table;
      return 0;
    }
  } catch (const ConfigError& e) {
    return report(kExitValidation, e.kind(), e.what());
  } catch (const Error& e) {
    return report(kExitRuntime, e.kind(), e.what());
  } catch (const std::exception& e) {
    return report(kExitRuntime, "runtime", e.what());
  }
  return 0;
}
