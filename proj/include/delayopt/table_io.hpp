#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "delayopt/learner.hpp"
#include "delayopt/oracle.hpp"
#include "delayopt/simulation.hpp"

namespace delayopt {

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Header record "# theta=... iterations=... residual=...", then
/// state_index,q_1..q_K,v_tilde.
std::string solve_result_table(const SolveResult& result);

/// user,theta,iterations,v_0..v_NQ.
std::string user_solutions_table(const std::vector<UserSolution>& users);

/// Either the joint layout of solve_result_table (without the header record)
/// or user,q,v for a decomposed table.
std::string potential_table_csv(const PotentialTable& table);

/// One row per regenerative period update.
std::string trace_table(const TrainResult& result);

/// policy,snr_db,seed,slots,avg_power,drop_rate_k...,avg_queue_k...,
/// delay_littles_k...,delay_sojourn_k...,weighted_delay. Failed cells are skipped.
std::string sweep_table(const std::vector<SweepRow>& rows, int users);

/// Parses the policy, snr_db, seed and weighted_delay columns of a sweep table.
std::vector<SweepRecord> read_sweep_table(const std::string& text);

std::string comparison_table(const std::vector<Comparison>& comparisons);

/// gnuplot script plotting `ycol` against `xcol` of a CSV data file.
std::string gnuplot_script(const std::string& data_file, const std::string& xcol, const std::string& ycol,
                           const std::string& title, bool by_policy = false);

}  // namespace delayopt
