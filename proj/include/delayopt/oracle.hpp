#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "delayopt/allocation.hpp"
#include "delayopt/config.hpp"
#include "delayopt/model.hpp"
#include "delayopt/types.hpp"

namespace delayopt {

/// Maps an observed (H, Q) to an action.
using ActionRule = std::function<Action(const ChannelState&, std::span<const int>)>;

enum class SubcarrierRule { Optimal, CsiOnly };

struct StatsOptions {
  std::size_t max_enumeration = 1000000;
  long monte_carlo_samples = 0;  // > 0 opts in to sampling when enumeration is too large
  std::uint64_t seed = 1;
};

/// E[g | Q] and E[R_k / Nbar_k | Q] (packets/second) over the CSI alphabet.
struct ConditionalStats {
  double g_bar = 0.0;
  std::vector<double> mu_bar;
  double avg_power = 0.0;
  bool monte_carlo = false;
  long samples = 0;
  double g_stderr = 0.0;
  std::vector<double> mu_stderr;
};

ConditionalStats conditional_stats(std::span<const int> q, const ActionRule& rule, const CsiAlphabet& alphabet,
                                   const SystemConfig& config, const StatsOptions& options = {});

struct KernelEntry {
  std::size_t target;
  double prob;
};

/// Birth-death transition kernel over joint queue states (joint index as in
/// PotentialTable). Blocked births at N_Q and deaths at 0 fold into the self-loop.
struct ReducedKernel {
  int K = 0;
  int N_Q = 0;
  std::vector<std::vector<KernelEntry>> rows;

  std::size_t states() const { return rows.size(); }
  double prob(std::size_t from, std::size_t to) const;
};

/// mu_bar[i][k] in packets/second for joint state i. Throws RegimeError when
/// sum_k (lambda_k + mu_bar_k) * tau exceeds one in any state.
ReducedKernel build_kernel(const std::vector<std::vector<double>>& mu_bar, const SystemConfig& config);
ReducedKernel build_kernel(const ActionRule& rule, const CsiAlphabet& alphabet, const SystemConfig& config,
                           const StatsOptions& options = {});

struct RviOptions {
  long max_iters = 1000000;
  double epsilon = 1e-8;
  std::size_t state_cap = 4096;
  bool record_history = false;
};

struct SolveResult {
  int K = 0;
  int N_Q = 0;
  double theta = 0.0;
  std::vector<double> v_tilde;  // v_tilde[0] (all queues empty) is pinned to 0
  long iterations = 0;
  double residual = 0.0;  // span of T(V) - V at exit
  std::vector<double> residual_history;
  // Statistics of the greedy decision in each state at exit.
  std::vector<double> g_bar;
  std::vector<std::vector<double>> mu_bar;

  PotentialTable table() const;
};

/// Relative value iteration on the reduced-state Bellman equation with the
/// one-event-per-slot kernel. The inner minimisation per CSI symbol uses the
/// closed-form rule (queue-aware surplus or CSI-only assignment with
/// water-filling).
SolveResult relative_value_iteration(const SystemConfig& config, const CsiAlphabet& alphabet,
                                     SubcarrierRule rule, const RviOptions& options = {});

/// Same iteration for a fixed stationary policy given by per-state rewards and kernel.
SolveResult relative_value_iteration(std::span<const double> g_bar, const ReducedKernel& kernel,
                                     const RviOptions& options = {});

/// Statistics of the CSI-only rule for one user at one backlog.
struct UserStats {
  double g_bar = 0.0;
  double mu_bar = 0.0;  // packets/second
  double avg_power = 0.0;
};

UserStats csi_only_user_stats(int k, int q, double increment, const CsiAlphabet& alphabet,
                              const SystemConfig& config);

struct UserSolution {
  int user = 0;
  double theta = 0.0;
  std::vector<double> v;  // v[0] = 0
  std::vector<double> g_bar;
  std::vector<double> mu_bar;
  int iterations = 0;
  std::vector<double> theta_trace;
};

struct PoissonOptions {
  int max_iters = 1000;
  double tolerance = 1e-12;  // relative change of V between policy iterations
};

/// Exact solution (theta_k, V_k) of one birth-death Poisson equation with
/// V_k(0) = 0, for per-state rewards g and service rates mu (packets/second).
std::pair<double, std::vector<double>> solve_birth_death_poisson(std::span<const double> g,
                                                                 std::span<const double> mu, double lambda,
                                                                 double tau);

/// One policy-iteration step: powers from the increments of `v`, then the Poisson solve.
UserSolution poisson_policy_step(int k, std::span<const double> v, const CsiAlphabet& alphabet,
                                 const SystemConfig& config);

/// Per-user policy iteration under the CSI-only subcarrier rule.
UserSolution per_user_poisson_solve(int k, const CsiAlphabet& alphabet, const SystemConfig& config,
                                    const PoissonOptions& options = {});

struct AdditivityReport {
  SubcarrierRule rule = SubcarrierRule::CsiOnly;
  SolveResult joint;
  std::vector<UserSolution> users;
  double theta_sum = 0.0;
  double theta_gap = 0.0;
  double max_potential_gap = 0.0;
};

/// Joint relative value iteration under `rule` against the sum of per-user solutions.
AdditivityReport verify_additivity(const SystemConfig& config, const CsiAlphabet& alphabet,
                                   SubcarrierRule rule = SubcarrierRule::CsiOnly,
                                   const RviOptions& options = {});

/// Decomposed potential table assembled from per-user solutions.
PotentialTable decomposed_table(const std::vector<UserSolution>& users, int n_q);

}  // namespace delayopt
