#include "delayopt/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "delayopt/errors.hpp"

namespace delayopt {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(value))
    throw ConfigError("key '" + key + "': not a finite number: '" + text + "'");
  return value;
}

long parse_long(const std::string& key, const std::string& raw) {
  const double v = parse_double(key, raw);
  if (v != std::floor(v) || std::fabs(v) > 9.0e15)
    throw ConfigError("key '" + key + "': expected an integer, got '" + trim(raw) + "'");
  return static_cast<long>(v);
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& raw,
                const std::map<std::string, Enum>& names) {
  const auto it = names.find(trim(raw));
  if (it == names.end()) {
    std::string allowed;
    for (const auto& [name, _] : names) allowed += (allowed.empty() ? "" : "|") + name;
    throw ConfigError("key '" + key + "': expected one of " + allowed + ", got '" + trim(raw) + "'");
  }
  return it->second;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool all_of(const std::vector<double>& v, const std::function<bool(double)>& pred) {
  for (double x : v)
    if (!pred(x)) return false;
  return true;
}

}  // namespace

double SystemConfig::service_coefficient(int k) const { return rate_scale(k) / std::log(2.0); }

double SystemConfig::snr_db() const { return 10.0 * std::log10(P_0 / N_F); }

void SystemConfig::set_snr_db(double snr) { P_0 = N_F * std::pow(10.0, snr / 10.0); }

std::size_t SystemConfig::joint_state_count() const {
  std::size_t n = 1;
  for (int k = 0; k < K; ++k) {
    n *= static_cast<std::size_t>(N_Q + 1);
    if (n > (std::size_t{1} << 40)) return n;
  }
  return n;
}

std::vector<std::string> SystemConfig::validate() const {
  require(K >= 1, "K must be >= 1");
  require(N_F >= 1, "N_F must be >= 1");
  require(N_Q >= 1, "N_Q must be >= 1");
  require(tau > 0.0, "tau must be > 0");
  require(static_cast<int>(lambda.size()) == K, "lambda needs K entries");
  require(static_cast<int>(mean_packet_bits.size()) == K, "mean_packet_bits needs K entries");
  require(static_cast<int>(beta.size()) == K, "beta needs K entries");
  require(all_of(lambda, [](double x) { return x >= 0.0; }), "lambda entries must be >= 0");
  require(all_of(mean_packet_bits, [](double x) { return x > 0.0; }),
          "mean_packet_bits entries must be > 0");
  require(all_of(beta, [](double x) { return x > 0.0; }), "beta entries must be > 0");
  require(P_0 > 0.0, "P_0 must be > 0");
  require(gamma > 0.0, "gamma must be > 0");
  require(subband_bandwidth > 0.0, "subband_bandwidth must be > 0");
  require(csi_levels >= 1, "csi_levels must be >= 1");

  std::vector<std::string> warnings;
  for (int k = 0; k < K; ++k) {
    if (lambda[k] * tau > 0.2) {
      std::ostringstream os;
      os << "user " << k << ": lambda*tau = " << lambda[k] * tau
         << " > 0.2, outside the small-slot regime the birth-death kernel assumes";
      warnings.push_back(os.str());
    }
    if (lambda[k] == 0.0) warnings.push_back("user " + std::to_string(k) + " has no arrivals");
  }
  return warnings;
}

void StepsizeSchedule::validate() const {
  require(a > 0.0, "stepsize_a must be > 0");
  require(b >= 1.0, "stepsize_b must be >= 1");
  require(exponent > 0.5 && exponent <= 1.0, "stepsize_exponent must lie in (0.5, 1]");
}

void SolverSettings::validate() const {
  stepsize.validate();
  require(delta_v > 0.0, "delta_v must be > 0");
  require(max_periods >= 1, "max_periods must be >= 1");
  require(max_period_slots >= 1, "max_period_slots must be >= 1");
  require(train_slots >= 0, "train_slots must be >= 0");
  require(joint_state_cap >= 1, "joint_state_cap must be >= 1");
  require(vi_epsilon > 0.0, "vi_epsilon must be > 0");
  require(vi_max_iters >= 1, "vi_max_iters must be >= 1");
  require(warmup_slots >= 0, "warmup_slots must be >= 0");
  require(measure_slots >= 1, "measure_slots must be >= 1");
  require(calibration_tolerance > 0.0, "calibration_tolerance must be > 0");
  require(gamma_min > 0.0 && gamma_max > gamma_min, "need 0 < gamma_min < gamma_max");
  require(calibration_max_iters >= 1, "calibration_max_iters must be >= 1");
}

std::string to_string(FadingModel m) { return m == FadingModel::Rayleigh ? "rayleigh" : "quantized"; }
std::string to_string(Dynamics d) { return d == Dynamics::Packet ? "packet" : "birth_death"; }
std::string to_string(Estimator e) { return e == Estimator::FirstVisit ? "first_visit" : "every_visit"; }

std::string to_string(InitialPotential p) { return p == InitialPotential::Zero ? "zero" : "myopic"; }

LoadedConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  LoadedConfig cfg;
  SystemConfig& sys = cfg.system;
  SolverSettings& sol = cfg.solver;
  std::vector<double> lambda, bits, beta;
  bool have_p0 = false;
  double snr = 0.0;
  bool have_snr = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> schema{
      {"system",
       {
           {"K", [&](auto& k, auto& v) { sys.K = static_cast<int>(parse_long(k, v)); }},
           {"N_F", [&](auto& k, auto& v) { sys.N_F = static_cast<int>(parse_long(k, v)); }},
           {"N_Q", [&](auto& k, auto& v) { sys.N_Q = static_cast<int>(parse_long(k, v)); }},
           {"tau", [&](auto& k, auto& v) { sys.tau = parse_double(k, v); }},
           {"P_0", [&](auto& k, auto& v) { sys.P_0 = parse_double(k, v); have_p0 = true; }},
           {"snr_db", [&](auto& k, auto& v) { snr = parse_double(k, v); have_snr = true; }},
           {"subband_bandwidth", [&](auto& k, auto& v) { sys.subband_bandwidth = parse_double(k, v); }},
           {"rng_seed",
            [&](auto& k, auto& v) {
              const long s = parse_long(k, v);
              require(s >= 0, "rng_seed must be >= 0");
              sys.rng_seed = static_cast<std::uint64_t>(s);
            }},
           {"fading",
            [&](auto& k, auto& v) {
              sys.fading = parse_enum<FadingModel>(
                  k, v, {{"rayleigh", FadingModel::Rayleigh}, {"quantized", FadingModel::Quantized}});
            }},
           {"dynamics",
            [&](auto& k, auto& v) {
              sys.dynamics = parse_enum<Dynamics>(
                  k, v, {{"packet", Dynamics::Packet}, {"birth_death", Dynamics::BirthDeath}});
            }},
       }},
      {"traffic",
       {
           {"lambda", [&](auto& k, auto& v) { lambda = parse_list(k, v); }},
           {"mean_packet_bits", [&](auto& k, auto& v) { bits = parse_list(k, v); }},
           {"beta", [&](auto& k, auto& v) { beta = parse_list(k, v); }},
       }},
      {"solver",
       {
           {"gamma", [&](auto& k, auto& v) { sys.gamma = parse_double(k, v); }},
           {"csi_levels", [&](auto& k, auto& v) { sys.csi_levels = static_cast<int>(parse_long(k, v)); }},
           {"stepsize_a", [&](auto& k, auto& v) { sol.stepsize.a = parse_double(k, v); }},
           {"stepsize_b", [&](auto& k, auto& v) { sol.stepsize.b = parse_double(k, v); }},
           {"stepsize_exponent", [&](auto& k, auto& v) { sol.stepsize.exponent = parse_double(k, v); }},
           {"delta_v", [&](auto& k, auto& v) { sol.delta_v = parse_double(k, v); }},
           {"max_periods", [&](auto& k, auto& v) { sol.max_periods = parse_long(k, v); }},
           {"max_period_slots", [&](auto& k, auto& v) { sol.max_period_slots = parse_long(k, v); }},
           {"train_slots", [&](auto& k, auto& v) { sol.train_slots = parse_long(k, v); }},
           {"estimator",
            [&](auto& k, auto& v) {
              sol.estimator = parse_enum<Estimator>(
                  k, v, {{"first_visit", Estimator::FirstVisit}, {"every_visit", Estimator::EveryVisit}});
            }},
           {"initial_potential",
            [&](auto& k, auto& v) {
              sol.initial_potential = parse_enum<InitialPotential>(
                  k, v, {{"zero", InitialPotential::Zero}, {"myopic", InitialPotential::Myopic}});
            }},
           {"joint_state_cap",
            [&](auto& k, auto& v) { sol.joint_state_cap = static_cast<std::size_t>(parse_long(k, v)); }},
           {"vi_epsilon", [&](auto& k, auto& v) { sol.vi_epsilon = parse_double(k, v); }},
           {"vi_max_iters", [&](auto& k, auto& v) { sol.vi_max_iters = parse_long(k, v); }},
           {"warmup_slots", [&](auto& k, auto& v) { sol.warmup_slots = parse_long(k, v); }},
           {"measure_slots", [&](auto& k, auto& v) { sol.measure_slots = parse_long(k, v); }},
           {"calibration_tolerance", [&](auto& k, auto& v) { sol.calibration_tolerance = parse_double(k, v); }},
           {"gamma_min", [&](auto& k, auto& v) { sol.gamma_min = parse_double(k, v); }},
           {"gamma_max", [&](auto& k, auto& v) { sol.gamma_max = parse_double(k, v); }},
           {"calibration_max_iters",
            [&](auto& k, auto& v) { sol.calibration_max_iters = static_cast<int>(parse_long(k, v)); }},
       }},
  };

  // The ini reader drops sections without keys, so check every header line too.
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line = trim(line);
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!schema.count(name)) throw ConfigError("unknown section [" + name + "]");
    }
  }

  for (const auto& [section, body] : tree) {
    const auto sec = schema.find(section);
    if (sec == schema.end()) {
      if (!body.data().empty()) throw ConfigError("key outside of any section: '" + section + "'");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end())
        throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
      setter->second(key, node.data());
    }
  }

  if (have_p0 && have_snr) throw ConfigError("give either P_0 or snr_db, not both");

  auto broadcast = [&](std::vector<double> v, const char* name, std::vector<double> fallback) {
    if (v.empty()) v = std::move(fallback);
    if (v.size() == 1 && sys.K > 1) v.assign(static_cast<std::size_t>(sys.K), v.front());
    if (static_cast<int>(v.size()) != sys.K)
      throw ConfigError(std::string("key '") + name + "' has " + std::to_string(v.size()) +
                        " entries, expected K = " + std::to_string(sys.K));
    return v;
  };
  require(sys.K >= 1, "K must be >= 1");
  sys.lambda = broadcast(lambda, "lambda", sys.lambda);
  sys.mean_packet_bits = broadcast(bits, "mean_packet_bits", sys.mean_packet_bits);
  sys.beta = broadcast(beta, "beta", sys.beta);
  if (have_snr) {
    require(sys.N_F >= 1, "N_F must be >= 1");
    sys.set_snr_db(snr);
  }

  sys.validate();
  sol.validate();
  return cfg;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace delayopt
