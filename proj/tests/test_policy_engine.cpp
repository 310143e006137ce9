#include <doctest.h>

#include <cmath>
#include <random>

#include "delayopt/allocation.hpp"
#include "delayopt/calibration.hpp"
#include "delayopt/errors.hpp"
#include "delayopt/model.hpp"
#include "delayopt/simulation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace delayopt;

namespace {

ChannelState random_channel(int K, int N_F, std::mt19937_64& gen) {
  std::exponential_distribution<double> unit(1.0);
  ChannelState h(K, N_F);
  for (auto& g : h.gain) g = unit(gen);
  return h;
}

}  // namespace

TEST_CASE("potential increment examples") {
  auto table = PotentialTable::decomposed(1, 2);
  auto v = table.user(0);
  v[1] = 1.5;
  v[2] = 4.0;
  CHECK(potential_increment(table, std::vector<int>{0}, 0) == 0.0);
  CHECK(potential_increment(table, std::vector<int>{2}, 0) == doctest::Approx(2.5));

  auto flat = PotentialTable::joint(2, 3);
  for (auto& x : flat.values()) x = 7.0;
  for (std::size_t i = 0; i < flat.size(); ++i)
    for (int k = 0; k < 2; ++k) CHECK(potential_increment(flat, flat.state(i), k) == 0.0);

  auto joint = PotentialTable::joint(2, 1);
  joint.values()[joint.index(std::vector<int>{1, 1})] = 5.0;
  joint.values()[joint.index(std::vector<int>{0, 1})] = 2.0;
  CHECK(potential_increment(joint, std::vector<int>{1, 1}, 0) == doctest::Approx(3.0));
  CHECK(joint.index(std::vector<int>{1, 0}) == 2);
  CHECK(joint.state(1) == std::vector<int>{0, 1});
}

TEST_CASE("water-filling examples") {
  CHECK(waterfill_power(2.0, 2.0) == doctest::Approx(1.5));
  CHECK(waterfill_power(5.0, 0.0) == 0.0);
  CHECK(waterfill_power(4.0, 0.25) == 0.0);
  CHECK(waterfill_power(0.0, 10.0) == 0.0);
  CHECK(waterfill_power(1.0, -3.0) == 0.0);
}

TEST_CASE("subcarrier metric examples") {
  CHECK(subcarrier_metric(1.0, 0.0, 1.0) == 0.0);
  CHECK(subcarrier_metric(1.0, 2.0, 1.0) == doctest::Approx(2.0 * std::log(2.0) - 1.0));
  CHECK(subcarrier_metric(1.0, 2.0, 1.0) == doctest::Approx(0.3863).epsilon(1e-4));
  CHECK(subcarrier_metric(0.25, 2.0, 1.0) == 0.0);
  CHECK(subcarrier_metric(0.0, 2.0, 1.0) == 0.0);
  CHECK(subcarrier_metric(3.0, -1.0, 1.0) == 0.0);
}

TEST_CASE("metric is the maximised surplus") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.01, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double g = u(gen), c = u(gen), gamma = u(gen);
    const double p = oracle::best_power_numeric(g, c, gamma);
    const double x = subcarrier_metric(g, c, gamma);
    CHECK(x >= 0.0);
    CHECK(x == doctest::Approx(c * std::log1p(g * p) - gamma * p).epsilon(1e-7));
    CHECK(waterfill_power(g, c / gamma) == doctest::Approx(p).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("queue-aware allocation examples") {
  auto cfg = fixture::users(2, 3, 4);
  std::mt19937_64 gen(2);
  auto table = PotentialTable::joint(2, 4);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto q = table.state(i);
    table.values()[i] = q[0] * q[0] + 2.0 * q[1];
  }
  const auto h = random_channel(2, 3, gen);
  const Action empty = allocate_optimal(h, std::vector<int>{0, 0}, table, cfg);
  CHECK(empty.total_power() == 0.0);

  ChannelState one(2, 1, 1.0);
  const std::vector<double> scaled{2.0, 0.0};
  const Action a = allocate_optimal(one, scaled, 1.0);
  CHECK(a.owner[0] == 0);
  CHECK(a.power[0] == doctest::Approx(1.0));

  // Tie: identical users go to the lowest index.
  const std::vector<double> tie{2.0, 2.0};
  CHECK(allocate_optimal(one, tie, 1.0).owner[0] == 0);
}

TEST_CASE("queue-aware allocation matches exhaustive enumeration") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int N_F = 1; N_F <= 3; ++N_F)
    for (int trial = 0; trial < 100; ++trial) {
      const auto h = random_channel(2, N_F, gen);
      const std::vector<double> c{u(gen), u(gen)};
      const double gamma = 0.2 + u(gen);
      const Action a = allocate_optimal(h, c, gamma);
      CHECK(a.valid(2));
      CHECK(allocation_objective(h, a, c, gamma) ==
            doctest::Approx(oracle::brute_force_min_objective(h, c, gamma)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("allocation invariants") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(-0.5, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int K = 1 + static_cast<int>(gen() % 4), N_F = 1 + static_cast<int>(gen() % 5);
    const auto h = random_channel(K, N_F, gen);
    std::vector<double> c(K);
    for (auto& x : c) x = u(gen);
    const double gamma = 0.1 + std::fabs(u(gen));
    for (const Action& a : {allocate_optimal(h, c, gamma), allocate_csi_only(h, c, gamma)}) {
      REQUIRE(a.subbands() == N_F);
      CHECK(a.valid(K));
      for (int n = 0; n < N_F; ++n) {
        int owners = 0;
        for (int k = 0; k < K; ++k) owners += a.s(k, n);
        CHECK(owners == 1);
        if (a.power[n] > 0.0) CHECK(c[a.owner[n]] / gamma > 1.0 / h(a.owner[n], n));
      }
    }

    // Scaling increments and price together leaves the action unchanged.
    const double s = 0.5 + std::fabs(u(gen));
    std::vector<double> cs = c;
    for (auto& x : cs) x *= s;
    const Action base = allocate_optimal(h, c, gamma), scaled = allocate_optimal(h, cs, gamma * s);
    CHECK(base.owner == scaled.owner);
    for (int n = 0; n < N_F; ++n) CHECK(scaled.power[n] == doctest::Approx(base.power[n]));
  }
}

TEST_CASE("CSI-only allocation examples") {
  ChannelState h(2, 1);
  h(0, 0) = 0.5;
  h(1, 0) = 2.0;
  const std::vector<double> c{1.0, 1.0};
  CHECK(allocate_csi_only(h, c, 0.5).owner[0] == 1);

  const std::vector<double> idle{1.0, 0.0};
  const Action a = allocate_csi_only(h, idle, 0.5);
  CHECK(a.owner[0] == 1);
  CHECK(a.power[0] == 0.0);

  // One user: both rules coincide in every state.
  auto cfg = fixture::users(1, 3, 5);
  auto table = PotentialTable::decomposed(1, 5);
  for (int q = 0; q <= 5; ++q) table.user(0)[q] = 0.3 * q * q;
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ch = random_channel(1, 3, gen);
    for (int q = 0; q <= 5; ++q) {
      const std::vector<int> qs{q};
      CHECK(allocate_csi_only(ch, qs, table, cfg) == allocate_optimal(ch, qs, table, cfg));
    }
  }
}

TEST_CASE("scaled increment folds the bits-per-slot constant") {
  // c * ln(1 + g p) must equal (packets served in the slot) * Delta V.
  auto cfg = fixture::users(2, 2, 3);
  auto table = PotentialTable::decomposed(2, 3);
  table.user(0)[1] = 0.8;
  table.user(1)[1] = 1.1;
  table.user(1)[2] = 2.5;
  const std::vector<int> q{1, 2};
  const auto c = scaled_increments(table, q, cfg);
  ChannelState h(2, 2, 1.7);
  Action a(2);
  a.owner = {0, 1};
  a.power = {3.0, 5.0};
  for (int k = 0; k < 2; ++k) {
    const double packets = instantaneous_rate(cfg, h, a, k) * cfg.tau / cfg.mean_packet_bits[k];
    CHECK(c[k] * std::log1p(a.power[k] * 1.7) ==
          doctest::Approx(packets * potential_increment(table, q, k)).epsilon(1e-12));
  }
}

TEST_CASE("gamma calibration on a monotone response") {
  CalibrationOptions opts;
  opts.initial_gamma = 1.0;
  auto power = [](double g) { return 100.0 / (1.0 + 50.0 * g); };
  const auto r = calibrate_gamma(power, 10.0, opts);
  CHECK(std::fabs(r.avg_power - 10.0) / 10.0 <= 0.02);
  CHECK(r.iterations <= opts.max_iters);
  CHECK(r.history.size() >= 1);

  CHECK_THROWS_AS(calibrate_gamma(power, 1000.0, opts), BracketError);
  CHECK_THROWS_AS(calibrate_gamma(power, -1.0, opts), ConfigError);
  opts.max_iters = 2;
  opts.tolerance = 1e-12;
  CHECK_THROWS_AS(calibrate_gamma(power, 10.0, opts), ConvergenceError);
}

TEST_CASE("average power falls with the price under common random numbers") {
  auto cfg = fixture::users(2, 2, 6);
  cfg.mean_packet_bits = {2.0e5, 2.0e5};
  auto table = PotentialTable::decomposed(2, 6);
  for (int k = 0; k < 2; ++k)
    for (int q = 0; q <= 6; ++q) table.user(k)[q] = 0.5 * q;
  auto power = [&](double gamma) {
    auto c = cfg;
    c.gamma = gamma;
    TableScheduler s(table, SubcarrierRule::CsiOnly);
    return run_replication(c, s, 4, 1000, 20000).avg_power;
  };
  CHECK(power(0.0005) >= power(0.001));
  CHECK(power(1e9) == 0.0);
}
