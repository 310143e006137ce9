#include "delayopt/table_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unistd.h>

#include "delayopt/errors.hpp"

namespace delayopt {

namespace {

std::ostringstream table_stream() {
  std::ostringstream os;
  os << std::setprecision(12);
  return os;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string solve_result_table(const SolveResult& result) {
  auto os = table_stream();
  os << "# theta=" << result.theta << " iterations=" << result.iterations << " residual=" << result.residual << "\n";
  os << potential_table_csv(result.table());
  return os.str();
}

std::string user_solutions_table(const std::vector<UserSolution>& users) {
  auto os = table_stream();
  os << "user,theta,iterations";
  const std::size_t n = users.empty() ? 0 : users.front().v.size();
  for (std::size_t q = 0; q < n; ++q) os << ",v_" << q;
  os << "\n";
  for (const auto& u : users) {
    os << u.user + 1 << ',' << u.theta << ',' << u.iterations;
    for (double v : u.v) os << ',' << v;
    os << "\n";
  }
  return os.str();
}

std::string potential_table_csv(const PotentialTable& table) {
  auto os = table_stream();
  const auto values = table.values();
  if (table.kind() == PotentialTable::Kind::Decomposed) {
    os << "user,q,v\n";
    for (int k = 0; k < table.users(); ++k)
      for (int q = 0; q <= table.n_q(); ++q) os << k + 1 << ',' << q << ',' << table.user(k)[q] << "\n";
    return os.str();
  }
  os << "state_index";
  for (int k = 0; k < table.users(); ++k) os << ",q_" << k + 1;
  os << ",v_tilde\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << i;
    for (int q : table.state(i)) os << ',' << q;
    os << ',' << values[i] << "\n";
  }
  return os.str();
}

std::string trace_table(const TrainResult& result) {
  auto os = table_stream();
  os << "period_index,user,slots_elapsed,epsilon,table_delta_maxnorm,running_avg_reward,running_avg_power,"
        "running_weighted_delay,mean_potential,snapshot\n";
  for (const auto& r : result.trace) {
    os << r.period_index << ',' << (r.user < 0 ? 0 : r.user + 1) << ',' << r.slots_elapsed << ',' << r.epsilon << ','
       << r.table_delta_maxnorm << ',' << r.running_avg_reward << ',' << r.running_avg_power << ','
       << r.running_weighted_delay << ',' << r.mean_potential << ',';
    for (std::size_t i = 0; i < r.snapshot.size(); ++i) os << (i ? ";" : "") << r.snapshot[i];
    os << "\n";
  }
  return os.str();
}

std::string sweep_table(const std::vector<SweepRow>& rows, int users) {
  auto os = table_stream();
  os << "policy,snr_db,seed,slots,avg_power";
  for (const char* name : {"drop_rate", "avg_queue", "delay_littles", "delay_sojourn"})
    for (int k = 0; k < users; ++k) os << ',' << name << '_' << k + 1;
  os << ",weighted_delay\n";
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    const Metrics& m = r.metrics;
    os << to_string(r.policy) << ',' << r.snr_db << ',' << r.seed << ',' << m.slots << ',' << m.avg_power;
    for (const auto* col : {&m.drop_rate, &m.avg_queue, &m.avg_delay_littles, &m.avg_delay_sojourn})
      for (double x : *col) os << ',' << x;
    os << ',' << m.weighted_delay << "\n";
  }
  return os.str();
}

std::vector<SweepRecord> read_sweep_table(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<SweepRecord> out;
  int policy = -1, snr = -1, seed = -1, wd = -1;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, ',');
    if (header.empty()) {
      header = fields;
      for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "policy") policy = i;
        if (header[i] == "snr_db") snr = i;
        if (header[i] == "seed") seed = i;
        if (header[i] == "weighted_delay") wd = i;
      }
      if (policy < 0 || snr < 0 || seed < 0 || wd < 0)
        throw ConfigError("sweep table header lacks policy, snr_db, seed or weighted_delay");
      continue;
    }
    if (fields.size() != header.size())
      throw ConfigError("sweep table line " + std::to_string(line_no) + " has the wrong number of columns");
    try {
      out.push_back({fields[policy], std::stod(fields[snr]), std::stoull(fields[seed]), std::stod(fields[wd])});
    } catch (const std::logic_error&) {
      throw ConfigError("sweep table line " + std::to_string(line_no) + " has a malformed number");
    }
  }
  if (header.empty()) throw ConfigError("sweep table is empty");
  return out;
}

std::string comparison_table(const std::vector<Comparison>& comparisons) {
  auto os = table_stream();
  os << "policy_a,policy_b,snr_db,seeds,wins_a,nonzero,mean_delta,stderr_delta,sign_test_p\n";
  for (const auto& c : comparisons)
    os << c.policy_a << ',' << c.policy_b << ',' << c.snr_db << ',' << c.deltas.size() << ',' << c.wins_a << ','
       << c.n << ',' << c.mean_delta << ',' << c.stderr_delta << ',' << c.p_value << "\n";
  return os.str();
}

std::string gnuplot_script(const std::string& data_file, const std::string& xcol, const std::string& ycol,
                           const std::string& title, bool by_policy) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set title '" << title << "'\n"
     << "set xlabel '" << xcol << "'\n"
     << "set ylabel '" << ycol << "'\n"
     << "set grid\n";
  if (by_policy) {
    os << "policies = system(\"awk -F, 'NR>1 && $1 !~ /^#/ {print $1}' " << data_file << " | sort -u\")\n"
       << "plot for [p in policies] '" << data_file << "' using (strcol('policy') eq p ? column('" << xcol
       << "') : 1/0):'" << ycol << "' with points title p\n";
  } else {
    os << "plot '" << data_file << "' using '" << xcol << "':'" << ycol << "' with lines title '" << ycol << "'\n";
  }
  return os.str();
}

}  // namespace delayopt
