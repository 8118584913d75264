#include "hmpc/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hmpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTickTag = "# hmpc-ticks schema ";
constexpr const char* kCycleTag = "# hmpc-cycles schema ";

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SolveStatus status_from(const std::string& s) {
  for (SolveStatus st : {SolveStatus::solved, SolveStatus::max_iter, SolveStatus::infeasible_qp, SolveStatus::nan})
    if (s == to_string(st)) return st;
  throw SchemaError("unknown solve status '" + s + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_d(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw SchemaError("bad number '" + s + "'");
  return v;
}

void check_tag(std::istream& is, const char* tag) {
  std::string line;
  if (!std::getline(is, line) || line.rfind(tag, 0) != 0)
    throw SchemaError(std::string("missing schema line '") + tag + "N'");
  const int v = std::stoi(line.substr(std::string(tag).size()));
  if (v != RunLog::kSchemaVersion)
    throw SchemaError("schema version " + std::to_string(v) + ", expected " + std::to_string(RunLog::kSchemaVersion));
  std::getline(is, line);  // column header
}

const char* kTickColumns =
    "tick,t,px,py,pz,vx,vy,vz,roll,pitch,yaw,thrust,cmd_roll,cmd_pitch,cmd_yaw,cmd_thrust,ref_x,ref_y,ref_z,"
    "plan_id,region,tracking_error,clearance,status,iterations,objective,kkt,candidate_violation,max_slack,fallback";

const char* kCycleColumns =
    "plan_id,launched,valid_from,status,iterations,objective,candidate_violation,shift_violation,plan_violation,"
    "region_margin,assumption1,used_candidate,region_areas";

}  // namespace

void write_ticks(std::ostream& os, const std::vector<TickRecord>& ticks) {
  os << kTickTag << RunLog::kSchemaVersion << '\n' << kTickColumns << '\n';
  for (const auto& r : ticks) {
    os << r.tick << ',' << g17(r.t);
    for (int i = 0; i < kNx; ++i) os << ',' << g17(r.x(i));
    for (int i = 0; i < kNu; ++i) os << ',' << g17(r.u(i));
    for (int i = 0; i < 3; ++i) os << ',' << g17(r.p_ref(i));
    os << ',' << r.plan_id << ',' << r.region << ',' << g17(r.tracking_error) << ',' << g17(r.clearance) << ','
       << to_string(r.status) << ',' << r.iterations << ',' << g17(r.objective) << ',' << g17(r.kkt) << ','
       << g17(r.candidate_violation) << ',' << g17(r.max_slack) << ',' << (r.fallback ? 1 : 0) << '\n';
  }
}

std::vector<TickRecord> read_ticks(std::istream& is) {
  check_tag(is, kTickTag);
  std::vector<TickRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 30) throw SchemaError("tick row with " + std::to_string(f.size()) + " fields");
    TickRecord r;
    std::size_t c = 0;
    r.tick = std::stol(f[c++]);
    r.t = to_d(f[c++]);
    r.x.resize(kNx);
    for (int i = 0; i < kNx; ++i) r.x(i) = to_d(f[c++]);
    r.u.resize(kNu);
    for (int i = 0; i < kNu; ++i) r.u(i) = to_d(f[c++]);
    for (int i = 0; i < 3; ++i) r.p_ref(i) = to_d(f[c++]);
    r.plan_id = std::stoi(f[c++]);
    r.region = std::stoi(f[c++]);
    r.tracking_error = to_d(f[c++]);
    r.clearance = to_d(f[c++]);
    r.status = status_from(f[c++]);
    r.iterations = std::stoi(f[c++]);
    r.objective = to_d(f[c++]);
    r.kkt = to_d(f[c++]);
    r.candidate_violation = to_d(f[c++]);
    r.max_slack = to_d(f[c++]);
    r.fallback = f[c++] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

void write_cycles(std::ostream& os, const std::vector<CycleRecord>& cycles) {
  os << kCycleTag << RunLog::kSchemaVersion << '\n' << kCycleColumns << '\n';
  for (const auto& c : cycles) {
    os << c.plan_id << ',' << g17(c.launched) << ',' << g17(c.valid_from) << ',' << to_string(c.status) << ','
       << c.iterations << ',' << g17(c.objective) << ',' << g17(c.candidate_violation) << ','
       << g17(c.shift_violation) << ',' << g17(c.plan_violation) << ',' << g17(c.region_margin) << ','
       << (c.assumption1 ? 1 : 0) << ',' << (c.used_candidate ? 1 : 0) << ',';
    for (std::size_t i = 0; i < c.region_areas.size(); ++i) os << (i ? ";" : "") << g17(c.region_areas[i]);
    os << '\n';
  }
}

std::vector<CycleRecord> read_cycles(std::istream& is) {
  check_tag(is, kCycleTag);
  std::vector<CycleRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 13) throw SchemaError("cycle row with " + std::to_string(f.size()) + " fields");
    CycleRecord c;
    c.plan_id = std::stoi(f[0]);
    c.launched = to_d(f[1]);
    c.valid_from = to_d(f[2]);
    c.status = status_from(f[3]);
    c.iterations = std::stoi(f[4]);
    c.objective = to_d(f[5]);
    c.candidate_violation = to_d(f[6]);
    c.shift_violation = to_d(f[7]);
    c.plan_violation = to_d(f[8]);
    c.region_margin = to_d(f[9]);
    c.assumption1 = f[10] == "1";
    c.used_candidate = f[11] == "1";
    if (!f[12].empty())
      for (const auto& a : split(f[12], ';')) c.region_areas.push_back(to_d(a));
    out.push_back(std::move(c));
  }
  return out;
}

void write_plans(std::ostream& os, const std::vector<Plan>& plans) {
  os << "# hmpc-plans schema " << RunLog::kSchemaVersion << '\n';
  os << "plan_id,valid_from,stage,px,py,pz,vx,vy,vz,roll,pitch,yaw,thrust,mem_roll,mem_pitch,mem_yaw,"
        "rate_roll,rate_pitch,rate_yaw,cmd_thrust\n";
  for (const auto& p : plans)
    for (std::size_t k = 0; k < p.x.size(); ++k) {
      os << p.id << ',' << g17(p.valid_from) << ',' << k;
      for (int i = 0; i < p.x[k].size(); ++i) os << ',' << g17(p.x[k](i));
      const Vec& u = k < p.u.size() ? p.u[k] : p.u_steady;
      for (int i = 0; i < u.size(); ++i) os << ',' << g17(u(i));
      os << '\n';
    }
}

void write_regions(std::ostream& os, const std::vector<Plan>& plans) {
  for (const auto& p : plans) {
    os << "plan " << p.id << " valid_from " << g17(p.valid_from) << '\n';
    for (const auto& r : p.regions) os << region_to_text(r);
  }
}

std::string summary_json(const Summary& s) {
  json j;
  j["schema"] = RunLog::kSchemaVersion;
  j["scenario"] = s.scenario;
  j["controller"] = s.controller;
  j["plant"] = s.plant;
  j["beta"] = s.beta;
  j["box_width"] = s.box_width;
  j["seed"] = s.seed;
  j["goal_reached"] = s.goal_reached;
  j["goal_time"] = s.goal_time;
  j["final_time"] = s.final_time;
  j["ticks"] = s.ticks;
  j["cycles"] = s.cycles;
  j["min_clearance"] = s.min_clearance;
  j["max_tracking_error"] = s.max_tracking_error;
  j["z_min"] = s.z_min;
  j["z_max"] = s.z_max;
  j["max_slack"] = s.max_slack;
  j["fast_failures"] = s.fast_failures;
  j["plan_failures"] = s.plan_failures;
  j["fallbacks"] = s.fallbacks;
  j["max_tmpc_candidate_violation"] = s.max_tmpc_candidate_violation;
  j["max_pmpc_candidate_violation"] = s.max_pmpc_candidate_violation;
  j["max_shift_violation"] = s.max_shift_violation;
  j["max_plan_violation"] = s.max_plan_violation;
  j["min_region_margin"] = s.min_region_margin;
  j["assumption1_failures"] = s.assumption1_failures;
  j["descent_violations"] = s.descent_violations;
  j["mean_fast_iterations"] = s.mean_fast_iterations;
  j["mean_plan_iterations"] = s.mean_plan_iterations;
  j["error"] = s.error;
  j["invariants_ok"] = s.invariants_ok;
  return j.dump(2) + "\n";
}

Summary summary_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("summary: ") + e.what());
  }
  if (!j.contains("schema") || j["schema"].get<int>() != RunLog::kSchemaVersion)
    throw SchemaError("summary: unsupported schema version");
  Summary s;
  try {
    s.scenario = j.at("scenario");
    s.controller = j.at("controller");
    s.plant = j.at("plant");
    s.beta = j.at("beta");
    s.box_width = j.at("box_width");
    s.seed = j.at("seed");
    s.goal_reached = j.at("goal_reached");
    s.goal_time = j.at("goal_time");
    s.final_time = j.at("final_time");
    s.ticks = j.at("ticks");
    s.cycles = j.at("cycles");
    s.min_clearance = j.at("min_clearance");
    s.max_tracking_error = j.at("max_tracking_error");
    s.z_min = j.at("z_min");
    s.z_max = j.at("z_max");
    s.max_slack = j.at("max_slack");
    s.fast_failures = j.at("fast_failures");
    s.plan_failures = j.at("plan_failures");
    s.fallbacks = j.at("fallbacks");
    s.max_tmpc_candidate_violation = j.at("max_tmpc_candidate_violation");
    s.max_pmpc_candidate_violation = j.at("max_pmpc_candidate_violation");
    s.max_shift_violation = j.at("max_shift_violation");
    s.max_plan_violation = j.at("max_plan_violation");
    s.min_region_margin = j.at("min_region_margin");
    s.assumption1_failures = j.at("assumption1_failures");
    s.descent_violations = j.at("descent_violations");
    s.mean_fast_iterations = j.at("mean_fast_iterations");
    s.mean_plan_iterations = j.at("mean_plan_iterations");
    s.error = j.at("error");
    s.invariants_ok = j.at("invariants_ok");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("summary: ") + e.what());
  }
  return s;
}

std::string timing_json(const Timing& t) {
  json j;
  j["schema"] = RunLog::kSchemaVersion;
  j["fast_ms"] = t.fast_ms;
  j["plan_ms"] = t.plan_ms;
  return j.dump() + "\n";
}

Timing timing_from_json(const std::string& text) {
  Timing t;
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<int>() != RunLog::kSchemaVersion) throw SchemaError("timing: unsupported schema version");
    t.fast_ms = j.at("fast_ms").get<std::vector<double>>();
    t.plan_ms = j.at("plan_ms").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("timing: ") + e.what());
  }
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_run(const std::string& dir, const RunLog& log) {
  fs::create_directories(dir);
  const fs::path d(dir);
  {
    std::ofstream os(d / "ticks.csv");
    write_ticks(os, log.ticks);
  }
  {
    std::ofstream os(d / "cycles.csv");
    write_cycles(os, log.cycles);
  }
  {
    std::ofstream os(d / "plans.csv");
    write_plans(os, log.plans);
  }
  {
    std::ofstream os(d / "regions.txt");
    write_regions(os, log.plans);
  }
  write_file((d / "summary.json").string(), summary_json(log.summary));
  write_file((d / "timing.json").string(), timing_json(log.timing));
}

RunLog read_run(const std::string& dir) {
  const fs::path d(dir);
  RunLog log;
  {
    std::ifstream is(d / "ticks.csv");
    if (!is) throw SchemaError("no ticks.csv in " + dir);
    log.ticks = read_ticks(is);
  }
  {
    std::ifstream is(d / "cycles.csv");
    if (!is) throw SchemaError("no cycles.csv in " + dir);
    log.cycles = read_cycles(is);
  }
  log.summary = summary_from_json(read_file((d / "summary.json").string()));
  if (fs::exists(d / "timing.json")) log.timing = timing_from_json(read_file((d / "timing.json").string()));
  return log;
}

std::string log_fingerprint_text(const RunLog& log) {
  std::ostringstream os;
  write_ticks(os, log.ticks);
  write_cycles(os, log.cycles);
  write_plans(os, log.plans);
  write_regions(os, log.plans);
  os << summary_json(log.summary);
  return os.str();
}

}  // namespace hmpc
