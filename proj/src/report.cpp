#include "hmpc/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "hmpc/io.hpp"

namespace hmpc {

namespace {

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Stats {
  std::size_t n = 0;
  double mean = 0.0, median = 0.0, max = 0.0;
};

Stats stats(std::vector<double> v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  s.max = v.back();
  return s;
}

}  // namespace

std::string goal_time_table(const std::vector<LabeledLog>& runs) {
  std::ostringstream os;
  os << "label,scenario,controller,plant,beta,box_width,seed,goal_reached,goal_time,final_time,min_clearance,"
        "max_tracking_error,z_min,z_max,max_slack,fast_failures,plan_failures,fallbacks,mean_fast_iterations,"
        "mean_plan_iterations,invariants_ok,error\n";
  for (const auto& r : runs) {
    const Summary& s = r.log.summary;
    os << r.label << ',' << s.scenario << ',' << s.controller << ',' << s.plant << ',' << s.beta << ','
       << g(s.box_width) << ',' << s.seed << ',' << (s.goal_reached ? 1 : 0) << ','
       << (s.goal_reached ? g(s.goal_time) : std::string("")) << ',' << g(s.final_time) << ','
       << g(s.min_clearance) << ',' << g(s.max_tracking_error) << ',' << g(s.z_min) << ',' << g(s.z_max) << ','
       << g(s.max_slack) << ',' << s.fast_failures << ',' << s.plan_failures << ',' << s.fallbacks << ','
       << g(s.mean_fast_iterations) << ',' << g(s.mean_plan_iterations) << ',' << (s.invariants_ok ? 1 : 0) << ",\"";
    for (char c : s.error) os << (c == '"' ? '\'' : c);
    os << "\"\n";
  }
  return os.str();
}

std::string solve_time_table(const std::vector<LabeledLog>& runs) {
  std::ostringstream os;
  os << "label,fast_solves,fast_ms_mean,fast_ms_median,fast_ms_max,plan_cycles,plan_ms_mean,plan_ms_median,"
        "plan_ms_max\n";
  for (const auto& r : runs) {
    const Stats f = stats(r.log.timing.fast_ms);
    const Stats p = stats(r.log.timing.plan_ms);
    os << r.label << ',' << f.n << ',' << g(f.mean) << ',' << g(f.median) << ',' << g(f.max) << ',' << p.n << ','
       << g(p.mean) << ',' << g(p.median) << ',' << g(p.max) << '\n';
  }
  return os.str();
}

std::string cost_series(const RunLog& log) {
  std::ostringstream os;
  os << "t,objective,status,iterations\n";
  for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i) {
    const TickRecord& r = log.ticks[i];
    os << g(r.t) << ',' << g(r.objective) << ',' << to_string(r.status) << ',' << r.iterations << '\n';
  }
  return os.str();
}

std::string slack_series(const RunLog& log) {
  std::ostringstream os;
  os << "t,max_slack,clearance\n";
  for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i) {
    const TickRecord& r = log.ticks[i];
    os << g(r.t) << ',' << g(r.max_slack) << ',' << g(r.clearance) << '\n';
  }
  return os.str();
}

std::string trajectory_series(const RunLog& log) {
  std::ostringstream os;
  os << "t,px,py,pz,yaw,ref_x,ref_y,ref_z,tracking_error,clearance,plan_id,region\n";
  for (const auto& r : log.ticks)
    os << g(r.t) << ',' << g(r.x(ix::px)) << ',' << g(r.x(ix::py)) << ',' << g(r.x(ix::pz)) << ','
       << g(r.x(ix::psi)) << ',' << g(r.p_ref.x()) << ',' << g(r.p_ref.y()) << ',' << g(r.p_ref.z()) << ','
       << g(r.tracking_error) << ',' << g(r.clearance) << ',' << r.plan_id << ',' << r.region << '\n';
  return os.str();
}

std::string cycle_series(const RunLog& log) {
  std::ostringstream os;
  os << "plan_id,launched,valid_from,status,iterations,objective,used_candidate,assumption1,min_region_area,"
        "max_region_area\n";
  for (const auto& c : log.cycles) {
    double lo = 0.0, hi = 0.0;
    if (!c.region_areas.empty()) {
      lo = *std::min_element(c.region_areas.begin(), c.region_areas.end());
      hi = *std::max_element(c.region_areas.begin(), c.region_areas.end());
    }
    os << c.plan_id << ',' << g(c.launched) << ',' << g(c.valid_from) << ',' << to_string(c.status) << ','
       << c.iterations << ',' << g(c.objective) << ',' << (c.used_candidate ? 1 : 0) << ','
       << (c.assumption1 ? 1 : 0) << ',' << g(lo) << ',' << g(hi) << '\n';
  }
  return os.str();
}

std::vector<std::string> write_report(const std::vector<LabeledLog>& runs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path d(out_dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    write_file((d / name).string(), text);
    written.push_back(name);
  };
  put("goal_times.csv", goal_time_table(runs));
  put("solve_times.csv", solve_time_table(runs));
  for (const auto& r : runs) {
    put(r.label + "_cost.csv", cost_series(r.log));
    put(r.label + "_slack.csv", slack_series(r.log));
    put(r.label + "_trajectory.csv", trajectory_series(r.log));
    if (!r.log.cycles.empty()) put(r.label + "_cycles.csv", cycle_series(r.log));
  }
  return written;
}

}  // namespace hmpc
