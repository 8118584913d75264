#pragma once

#include <iosfwd>
#include <string>

#include "hmpc/sim.hpp"

namespace hmpc {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run directory layout:
//   ticks.csv     one row per tick, first line "# hmpc-ticks schema N"
//   cycles.csv    one row per planner cycle (bootstrap first), "# hmpc-cycles schema N"
//   plans.csv     stage nodes of every plan
//   regions.txt   half-spaces and generating ellipses of every plan
//   summary.json  aggregate metrics with a "schema" field
//   timing.json   wall-clock solve times (excluded from determinism comparisons)
void write_ticks(std::ostream& os, const std::vector<TickRecord>& ticks);
void write_cycles(std::ostream& os, const std::vector<CycleRecord>& cycles);
void write_plans(std::ostream& os, const std::vector<Plan>& plans);
void write_regions(std::ostream& os, const std::vector<Plan>& plans);
std::string summary_json(const Summary& s);
std::string timing_json(const Timing& t);

std::vector<TickRecord> read_ticks(std::istream& is);
std::vector<CycleRecord> read_cycles(std::istream& is);
Summary summary_from_json(const std::string& text);
Timing timing_from_json(const std::string& text);

void write_run(const std::string& dir, const RunLog& log);
// Reads ticks, cycles, summary and (when present) timing. Plans are not read back.
RunLog read_run(const std::string& dir);

// Everything except timing, as one string; equal strings mean bit-identical logs.
std::string log_fingerprint_text(const RunLog& log);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace hmpc
