#pragma once

#include <string>
#include <vector>

#include "hmpc/sim.hpp"

namespace hmpc {

struct LabeledLog {
  std::string label;  // usually the run directory name
  RunLog log;
};

// One row per run: goal time, clearance, tracking, slack and solver counters.
std::string goal_time_table(const std::vector<LabeledLog>& runs);
// Wall-clock solve statistics per run (mean, median, max in ms). Not deterministic.
std::string solve_time_table(const std::vector<LabeledLog>& runs);

// Per-tick series of one run.
std::string cost_series(const RunLog& log);
std::string slack_series(const RunLog& log);
std::string trajectory_series(const RunLog& log);
// Per-cycle planner series: iterations, objective, region areas.
std::string cycle_series(const RunLog& log);

// Writes goal_times.csv, solve_times.csv and <label>_{cost,slack,trajectory,cycles}.csv.
// Returns the written file names.
std::vector<std::string> write_report(const std::vector<LabeledLog>& runs, const std::string& out_dir);

}  // namespace hmpc
