#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "delayopt/config.hpp"
#include "delayopt/errors.hpp"
#include "delayopt/model.hpp"
#include "delayopt/oracle.hpp"
#include "delayopt/simulation.hpp"

namespace py = pybind11;
using namespace delayopt;

namespace {

Metrics simulate(const SystemConfig& config, const SolverSettings& settings, const std::string& policy,
                 std::uint64_t seed, bool calibrate) {
  const auto prepared = prepare_policy(parse_policy(policy), config, settings, seed, calibrate);
  SystemConfig run_cfg = config;
  run_cfg.gamma = prepared.gamma;
  auto sched = prepared.scheduler();
  return run_replication(run_cfg, *sched, seed, settings.warmup_slots, settings.measure_slots);
}

TrainResult train(const SystemConfig& config, const SolverSettings& settings, const std::string& algorithm,
                  std::uint64_t seed) {
  if (algorithm != "joint" && algorithm != "decomposed")
    throw ConfigError("algorithm must be joint or decomposed");
  TrainOptions opts;
  opts.settings = settings;
  opts.seed = seed;
  return algorithm == "joint" ? train_joint(config, opts) : train_decomposed(config, opts);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Delay-aware OFDMA power and subband allocation: exact solvers, online learners and simulation.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<RegimeError>(m, "RegimeError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<EnumerationTooLarge>(m, "EnumerationTooLarge", base.ptr());
  py::register_exception<BracketError>(m, "BracketError", base.ptr());

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_readwrite("K", &SystemConfig::K)
      .def_readwrite("N_F", &SystemConfig::N_F)
      .def_readwrite("N_Q", &SystemConfig::N_Q)
      .def_readwrite("tau", &SystemConfig::tau)
      .def_readwrite("lambda_", &SystemConfig::lambda)
      .def_readwrite("mean_packet_bits", &SystemConfig::mean_packet_bits)
      .def_readwrite("beta", &SystemConfig::beta)
      .def_readwrite("P_0", &SystemConfig::P_0)
      .def_readwrite("gamma", &SystemConfig::gamma)
      .def_readwrite("subband_bandwidth", &SystemConfig::subband_bandwidth)
      .def_readwrite("rng_seed", &SystemConfig::rng_seed)
      .def_readwrite("csi_levels", &SystemConfig::csi_levels)
      .def_property("snr_db", &SystemConfig::snr_db, &SystemConfig::set_snr_db)
      .def("validate", &SystemConfig::validate, "Raises ConfigError on a violated invariant; returns warnings.")
      .def("joint_state_count", &SystemConfig::joint_state_count);

  py::class_<SolverSettings>(m, "SolverSettings")
      .def(py::init<>())
      .def_readwrite("delta_v", &SolverSettings::delta_v)
      .def_readwrite("max_periods", &SolverSettings::max_periods)
      .def_readwrite("max_period_slots", &SolverSettings::max_period_slots)
      .def_readwrite("train_slots", &SolverSettings::train_slots)
      .def_readwrite("vi_epsilon", &SolverSettings::vi_epsilon)
      .def_readwrite("vi_max_iters", &SolverSettings::vi_max_iters)
      .def_readwrite("warmup_slots", &SolverSettings::warmup_slots)
      .def_readwrite("measure_slots", &SolverSettings::measure_slots)
      .def_readwrite("calibration_tolerance", &SolverSettings::calibration_tolerance)
      .def("validate", &SolverSettings::validate);

  py::class_<LoadedConfig>(m, "LoadedConfig")
      .def_readwrite("system", &LoadedConfig::system)
      .def_readwrite("solver", &LoadedConfig::solver);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"));

  py::class_<CsiAlphabet>(m, "CsiAlphabet")
      .def_readonly("levels", &CsiAlphabet::levels)
      .def_readonly("probs", &CsiAlphabet::probs)
      .def("mean", &CsiAlphabet::mean);
  m.def("build_csi_alphabet", &build_csi_alphabet, py::arg("levels"));

  py::enum_<SubcarrierRule>(m, "SubcarrierRule")
      .value("Optimal", SubcarrierRule::Optimal)
      .value("CsiOnly", SubcarrierRule::CsiOnly);

  py::class_<PotentialTable>(m, "PotentialTable")
      .def_property_readonly("joint", [](const PotentialTable& t) { return t.kind() == PotentialTable::Kind::Joint; })
      .def_property_readonly("users", &PotentialTable::users)
      .def_property_readonly("n_q", &PotentialTable::n_q)
      .def_property_readonly("values",
                             [](const PotentialTable& t) {
                               const auto v = t.values();
                               return std::vector<double>(v.begin(), v.end());
                             })
      .def("value", [](const PotentialTable& t, const std::vector<int>& q) {
        if (static_cast<int>(q.size()) != t.users()) throw ConfigError("queue vector has the wrong length");
        for (int x : q)
          if (x < 0 || x > t.n_q()) throw ConfigError("queue length out of range");
        return t.value(q);
      });

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("theta", &SolveResult::theta)
      .def_readonly("v_tilde", &SolveResult::v_tilde)
      .def_readonly("iterations", &SolveResult::iterations)
      .def_readonly("residual", &SolveResult::residual)
      .def_readonly("g_bar", &SolveResult::g_bar)
      .def_readonly("mu_bar", &SolveResult::mu_bar)
      .def("table", &SolveResult::table);

  m.def(
      "relative_value_iteration",
      [](const SystemConfig& config, const CsiAlphabet& alphabet, SubcarrierRule rule, double epsilon,
         long max_iters) {
        RviOptions opts;
        opts.epsilon = epsilon;
        opts.max_iters = max_iters;
        return relative_value_iteration(config, alphabet, rule, opts);
      },
      py::arg("config"), py::arg("alphabet"), py::arg("rule") = SubcarrierRule::Optimal, py::arg("epsilon") = 1e-8,
      py::arg("max_iters") = 1000000, py::call_guard<py::gil_scoped_release>());

  py::class_<UserSolution>(m, "UserSolution")
      .def_readonly("user", &UserSolution::user)
      .def_readonly("theta", &UserSolution::theta)
      .def_readonly("v", &UserSolution::v)
      .def_readonly("g_bar", &UserSolution::g_bar)
      .def_readonly("mu_bar", &UserSolution::mu_bar)
      .def_readonly("iterations", &UserSolution::iterations);

  m.def(
      "per_user_poisson_solve",
      [](int k, const CsiAlphabet& alphabet, const SystemConfig& config) {
        return per_user_poisson_solve(k, alphabet, config);
      },
      py::arg("user"), py::arg("alphabet"), py::arg("config"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("table", &TrainResult::table)
      .def_readonly("converged", &TrainResult::converged)
      .def_readonly("stop_reason", &TrainResult::stop_reason)
      .def_readonly("diagnostic", &TrainResult::diagnostic)
      .def_readonly("slots", &TrainResult::slots)
      .def_readonly("periods", &TrainResult::periods);

  m.def("train", &train, py::arg("config"), py::arg("settings"), py::arg("algorithm") = "decomposed",
        py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("avg_queue", &Metrics::avg_queue)
      .def_readonly("avg_delay_littles", &Metrics::avg_delay_littles)
      .def_readonly("avg_delay_sojourn", &Metrics::avg_delay_sojourn)
      .def_readonly("drop_rate", &Metrics::drop_rate)
      .def_readonly("departures", &Metrics::departures)
      .def_readonly("weighted_delay", &Metrics::weighted_delay)
      .def_readonly("avg_power", &Metrics::avg_power)
      .def_readonly("slots", &Metrics::slots)
      .def_readonly("crn_checksum", &Metrics::crn_checksum)
      .def_readonly("warnings", &Metrics::warnings);

  m.def("simulate", &simulate, py::arg("config"), py::arg("settings"), py::arg("policy"), py::arg("seed") = 1,
        py::arg("calibrate") = false, py::call_guard<py::gil_scoped_release>(),
        "Prepares a policy (decomposed, joint, mlwdf, round_robin) and runs one replication.");

  m.def("sign_test_p_value", &sign_test_p_value, py::arg("wins"), py::arg("n"));
}
