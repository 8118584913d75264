#include "hmpc/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

namespace hmpc {

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Reads one mapping and remembers which keys were consumed so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where() + ": expected a mapping");
  }

  bool has(const std::string& key) {
    if (!node_ || node_.IsNull()) return false;
    return static_cast<bool>(node_[key]);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    used_.insert(key);
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(key) + ": bad value '" + scalar_text(node_[key]) + "'");
    }
  }

  void get_deg(const std::string& key, double& rad) {
    if (!has(key)) return;
    double deg = 0.0;
    get(key, deg);
    rad = deg * kDeg;
  }

  void get_vec(const std::string& key, Vec& out, int n) {
    if (!has(key)) return;
    std::vector<double> v;
    get(key, v);
    if (static_cast<int>(v.size()) != n)
      throw ConfigError(where(key) + ": expected " + std::to_string(n) + " numbers");
    out = Eigen::Map<Vec>(v.data(), n);
  }

  template <int N>
  void get_fixed(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) return;
    Vec v;
    get_vec(key, v, N);
    out = v;
  }

  template <class E>
  void get_enum(const std::string& key, E& out, const std::vector<std::pair<std::string, E>>& names) {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [name, value] : names)
      if (name == s) {
        out = value;
        return;
      }
    std::string allowed;
    for (const auto& nv : names) allowed += (allowed.empty() ? "" : ", ") + nv.first;
    throw ConfigError(where(key) + ": '" + s + "' is not one of {" + allowed + "}");
  }

  Reader sub(const std::string& key) {
    if (!has(key)) return Reader(YAML::Node(), where(key));
    used_.insert(key);
    return Reader(node_[key], where(key));
  }

  YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_[key];
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void done() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown key " + where(key));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;

  static std::string scalar_text(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    std::ostringstream os;
    os << n;
    return os.str();
  }
};

const std::vector<std::pair<std::string, ControllerKind>> kControllers = {{"hmpc", ControllerKind::hmpc},
                                                                          {"smpc", ControllerKind::smpc}};
const std::vector<std::pair<std::string, PlantMode>> kPlantModes = {{"exact", PlantMode::exact},
                                                                    {"mismatch", PlantMode::mismatch}};
const std::vector<std::pair<std::string, ThrustReg>> kThrustReg = {{"hover_centered", ThrustReg::hover_centered},
                                                                   {"as_written", ThrustReg::as_written}};

void read_weights(Reader r, GoWeights& w) {
  r.get("xy", w.xy);
  r.get("z", w.z);
  r.get("yaw", w.yaw);
  r.done();
}

void read_go_cost(Reader r, GoCostConfig& c) {
  read_weights(r.sub("stage"), c.stage);
  read_weights(r.sub("terminal"), c.terminal);
  r.get("w_a", c.w_a);
  r.get("w_cmd_rp", c.w_cmd_rp);
  r.get("w_cmd_yaw", c.w_cmd_yaw);
  r.get_vec("input", c.U, 4);
  r.get("huber_delta", c.huber_delta);
  r.get_enum("thrust_reg", c.thrust_reg, kThrustReg);
  r.done();
}

void read_grid(Reader r, GridSpec& g) {
  r.get("att_points", g.att_points);
  r.get("accel_points", g.accel_points);
  r.done();
}

Obstacle read_obstacle(const YAML::Node& n, const std::string& path) {
  Reader r(n, path);
  Obstacle o;
  if (!r.has("center") || !r.has("width") || !r.has("length"))
    throw ConfigError(path + ": obstacle needs center, width and length");
  r.get_fixed<2>("center", o.center);
  r.get("width", o.width);
  r.get("length", o.length);
  r.done();
  if (!(o.width > 0.0) || !(o.length > 0.0)) throw ConfigError(path + ": obstacle sides must be positive");
  return o;
}

void read_document(Config& cfg, const YAML::Node& root, const std::string& base_dir) {
  Reader top(root, "");
  Scenario& sc = cfg.scenario;

  if (top.has("schema")) {
    int v = 0;
    top.get("schema", v);
    if (v != 1) throw ConfigError("schema: unsupported version " + std::to_string(v));
  }

  {
    Reader r = top.sub("scenario");
    r.get("name", sc.name);
    r.get_enum("controller", sc.controller, kControllers);
    if (r.has("start")) r.get_fixed<3>("start", sc.start);
    r.get_deg("start_yaw_deg", sc.start_yaw);
    if (r.has("start_offset")) r.get_fixed<3>("start_offset", sc.start_offset);
    if (r.has("goal")) r.get_fixed<3>("goal", sc.goal.p);
    r.get_deg("goal_yaw_deg", sc.goal.yaw);
    r.get("goal_radius", sc.goal_radius);
    r.get("time_limit", sc.time_limit);
    r.get("pipelined", sc.pipelined);
    r.get("region_oracle", sc.region_oracle);
    r.done();
  }
  {
    Reader r = top.sub("map");
    r.get("width", sc.map.width);
    r.get("height", sc.map.height);
    r.get("resolution", sc.map.resolution);
    if (r.has("origin")) r.get_fixed<2>("origin", sc.map.origin);
    if (r.has("obstacles")) {
      YAML::Node list = r.raw("obstacles");
      if (!list.IsNull() && !list.IsSequence()) throw ConfigError("map.obstacles: expected a list");
      sc.obstacles.clear();
      for (std::size_t i = 0; i < list.size(); ++i)
        sc.obstacles.push_back(read_obstacle(list[i], "map.obstacles[" + std::to_string(i) + "]"));
    }
    r.done();
  }
  {
    Reader r = top.sub("decomp");
    r.get("box_width", sc.decomp.box_width);
    r.get("robot_radius", sc.decomp.robot_radius);
    r.done();
  }
  {
    Reader r = top.sub("model");
    ModelParams& m = sc.model;
    r.get("tau_roll", m.tau_phi);
    r.get("tau_pitch", m.tau_theta);
    r.get("tau_yaw", m.tau_psi);
    r.get("tau_thrust", m.tau_a);
    r.get("k_roll", m.k_phi);
    r.get("k_pitch", m.k_theta);
    r.get("k_yaw", m.k_psi);
    r.get("k_thrust", m.k_a);
    r.get("gravity", m.g);
    r.done();
  }
  {
    Reader r = top.sub("bounds");
    SystemBounds& b = sc.bounds;
    r.get("pxy_max", b.pxy_max);
    r.get("pz_min", b.pz_min);
    r.get("pz_max", b.pz_max);
    r.get("v_max", b.v_max);
    r.get_deg("att_max_deg", b.att_max);
    r.get("thrust_min", b.a_min);
    r.get("thrust_max", b.a_max);
    r.get_deg("att_cmd_max_deg", b.att_cmd_max);
    r.get_deg("rate_max_deg", b.rate_max);
    r.done();
  }
  {
    Reader r = top.sub("schedule");
    r.get("tracker_period", sc.schedule.Ts_track);
    r.get("beta", sc.schedule.beta);
    r.get("tracker_horizon", sc.schedule.T_track);
    r.get("planner_horizon", sc.schedule.T_plan);
    r.done();
  }
  {
    Reader r = top.sub("terminal");
    TerminalDesignSpec& d = cfg.design;
    r.get("margin", d.d);
    r.get("weight_scale", d.weight_scale);
    read_grid(r.sub("solve_grid"), d.solve_grid);
    read_grid(r.sub("check_grid"), d.check_grid);
    r.get("check_tol", d.check_tol);
    r.get("sdp_rel_gap", d.sdp.rel_gap);
    r.get("sdp_max_iter", d.sdp.max_iter);
    if (r.has("ingredients")) {
      r.get("ingredients", cfg.ingredients);
      if (!cfg.ingredients.empty() && !base_dir.empty() && fs::path(cfg.ingredients).is_relative())
        cfg.ingredients = (fs::path(base_dir) / cfg.ingredients).lexically_normal().string();
    }
    r.done();
  }
  read_go_cost(top.sub("planner"), sc.pmpc_cost);
  {
    Reader r = top.sub("tracker");
    r.get_vec("state_weights", sc.tmpc.Q, kNx);
    r.get_vec("input_weights", sc.tmpc.R, kNu);
    r.done();
  }
  {
    Reader r = top.sub("single_layer");
    SmpcConfig& s = sc.smpc;
    r.get("period", s.Ts);
    r.get("horizon", s.T);
    read_go_cost(r.sub("cost"), s.cost);
    r.get("slack_quad", s.slack_quad);
    r.get("slack_lin", s.slack_lin);
    r.get("safety", s.safety);
    r.done();
  }
  {
    Reader r = top.sub("solver");
    OcpSettings& s = sc.solver;
    r.get("max_iter", s.max_iter);
    r.get("kkt_tol", s.kkt_tol);
    r.get("decrease_tol", s.decrease_tol);
    r.get("eq_tol", s.eq_tol);
    r.get("ineq_tol", s.ineq_tol);
    r.get("qp_tol", s.qp_tol);
    r.get("max_halvings", s.max_halvings);
    r.get("terminal_margin", s.terminal_margin);
    r.done();
  }
  {
    Reader r = top.sub("plant");
    PlantConfig& p = sc.plant;
    r.get_enum("mode", p.mode, kPlantModes);
    r.get("param_spread", p.param_spread);
    r.get("thrust_bias", p.thrust_bias);
    r.get("disturbance", p.disturbance);
    r.get("substeps", p.substeps);
    r.get("seed", p.seed);
    r.done();
  }
  top.done();
  cfg.design.Q = sc.tmpc.Q.asDiagonal();
  cfg.design.R = sc.tmpc.R.asDiagonal();
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string list(const Vec& v) {
  std::string s = "[";
  for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + "]";
}

template <class E>
std::string name_of(E v, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& nv : names)
    if (nv.second == v) return nv.first;
  return "?";
}

void dump_go_cost(std::ostream& os, const GoCostConfig& c, const std::string& ind) {
  os << ind << "stage: {xy: " << num(c.stage.xy) << ", z: " << num(c.stage.z) << ", yaw: " << num(c.stage.yaw)
     << "}\n";
  os << ind << "terminal: {xy: " << num(c.terminal.xy) << ", z: " << num(c.terminal.z)
     << ", yaw: " << num(c.terminal.yaw) << "}\n";
  os << ind << "w_a: " << num(c.w_a) << "\n";
  os << ind << "w_cmd_rp: " << num(c.w_cmd_rp) << "\n";
  os << ind << "w_cmd_yaw: " << num(c.w_cmd_yaw) << "\n";
  os << ind << "input: " << list(c.U) << "\n";
  os << ind << "huber_delta: " << num(c.huber_delta) << "\n";
  os << ind << "thrust_reg: " << name_of(c.thrust_reg, kThrustReg) << "\n";
}

}  // namespace

Config default_config() {
  Config c;
  c.design.Q = c.scenario.tmpc.Q.asDiagonal();
  c.design.R = c.scenario.tmpc.R.asDiagonal();
  return c;
}

void apply_config(Config& cfg, const std::string& yaml_text, const std::string& origin,
                  const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  try {
    read_document(cfg, root, base_dir);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

Config parse_config(const std::string& yaml_text, const std::string& origin) {
  Config c = default_config();
  apply_config(c, yaml_text, origin);
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Config c = default_config();
  apply_config(c, ss.str(), path, fs::path(path).parent_path().string());
  return c;
}

std::string dump_config(const Config& cfg) {
  const Scenario& sc = cfg.scenario;
  std::ostringstream os;
  os << "schema: 1\n";
  os << "scenario:\n";
  os << "  name: \"" << sc.name << "\"\n";
  os << "  controller: " << to_string(sc.controller) << "\n";
  os << "  start: " << list(sc.start) << "\n";
  os << "  start_yaw_deg: " << num(sc.start_yaw / kDeg) << "\n";
  os << "  start_offset: " << list(sc.start_offset) << "\n";
  os << "  goal: " << list(sc.goal.p) << "\n";
  os << "  goal_yaw_deg: " << num(sc.goal.yaw / kDeg) << "\n";
  os << "  goal_radius: " << num(sc.goal_radius) << "\n";
  os << "  time_limit: " << num(sc.time_limit) << "\n";
  os << "  pipelined: " << (sc.pipelined ? "true" : "false") << "\n";
  os << "  region_oracle: " << (sc.region_oracle ? "true" : "false") << "\n";
  os << "map:\n";
  os << "  width: " << num(sc.map.width) << "\n";
  os << "  height: " << num(sc.map.height) << "\n";
  os << "  resolution: " << num(sc.map.resolution) << "\n";
  os << "  origin: " << list(sc.map.origin) << "\n";
  os << "  obstacles:" << (sc.obstacles.empty() ? " []" : "") << "\n";
  for (const auto& o : sc.obstacles)
    os << "    - {center: " << list(o.center) << ", width: " << num(o.width) << ", length: " << num(o.length)
       << "}\n";
  os << "decomp:\n";
  os << "  box_width: " << num(sc.decomp.box_width) << "\n";
  os << "  robot_radius: " << num(sc.decomp.robot_radius) << "\n";
  const ModelParams& m = sc.model;
  os << "model:\n";
  os << "  tau_roll: " << num(m.tau_phi) << "\n  tau_pitch: " << num(m.tau_theta) << "\n  tau_yaw: " << num(m.tau_psi)
     << "\n  tau_thrust: " << num(m.tau_a) << "\n  k_roll: " << num(m.k_phi) << "\n  k_pitch: " << num(m.k_theta)
     << "\n  k_yaw: " << num(m.k_psi) << "\n  k_thrust: " << num(m.k_a) << "\n  gravity: " << num(m.g) << "\n";
  const SystemBounds& b = sc.bounds;
  os << "bounds:\n";
  os << "  pxy_max: " << num(b.pxy_max) << "\n  pz_min: " << num(b.pz_min) << "\n  pz_max: " << num(b.pz_max)
     << "\n  v_max: " << num(b.v_max) << "\n  att_max_deg: " << num(b.att_max / kDeg)
     << "\n  thrust_min: " << num(b.a_min) << "\n  thrust_max: " << num(b.a_max)
     << "\n  att_cmd_max_deg: " << num(b.att_cmd_max / kDeg) << "\n  rate_max_deg: " << num(b.rate_max / kDeg)
     << "\n";
  os << "schedule:\n";
  os << "  tracker_period: " << num(sc.schedule.Ts_track) << "\n  beta: " << sc.schedule.beta
     << "\n  tracker_horizon: " << num(sc.schedule.T_track) << "\n  planner_horizon: " << num(sc.schedule.T_plan)
     << "\n";
  const TerminalDesignSpec& d = cfg.design;
  os << "terminal:\n";
  os << "  margin: " << num(d.d) << "\n  weight_scale: " << num(d.weight_scale) << "\n";
  os << "  solve_grid: {att_points: " << d.solve_grid.att_points << ", accel_points: " << d.solve_grid.accel_points
     << "}\n";
  os << "  check_grid: {att_points: " << d.check_grid.att_points << ", accel_points: " << d.check_grid.accel_points
     << "}\n";
  os << "  check_tol: " << num(d.check_tol) << "\n  sdp_rel_gap: " << num(d.sdp.rel_gap)
     << "\n  sdp_max_iter: " << d.sdp.max_iter << "\n";
  os << "  ingredients: \"" << cfg.ingredients << "\"\n";
  os << "planner:\n";
  dump_go_cost(os, sc.pmpc_cost, "  ");
  os << "tracker:\n";
  os << "  state_weights: " << list(sc.tmpc.Q) << "\n  input_weights: " << list(sc.tmpc.R) << "\n";
  os << "single_layer:\n";
  os << "  period: " << num(sc.smpc.Ts) << "\n  horizon: " << num(sc.smpc.T) << "\n  cost:\n";
  dump_go_cost(os, sc.smpc.cost, "    ");
  os << "  slack_quad: " << num(sc.smpc.slack_quad) << "\n  slack_lin: " << num(sc.smpc.slack_lin)
     << "\n  safety: " << num(sc.smpc.safety) << "\n";
  const OcpSettings& s = sc.solver;
  os << "solver:\n";
  os << "  max_iter: " << s.max_iter << "\n  kkt_tol: " << num(s.kkt_tol) << "\n  decrease_tol: " << num(s.decrease_tol)
     << "\n  eq_tol: " << num(s.eq_tol) << "\n  ineq_tol: " << num(s.ineq_tol) << "\n  qp_tol: " << num(s.qp_tol)
     << "\n  max_halvings: " << s.max_halvings << "\n  terminal_margin: " << num(s.terminal_margin) << "\n";
  const PlantConfig& p = sc.plant;
  os << "plant:\n";
  os << "  mode: " << to_string(p.mode) << "\n  param_spread: " << num(p.param_spread)
     << "\n  thrust_bias: " << num(p.thrust_bias) << "\n  disturbance: " << num(p.disturbance)
     << "\n  substeps: " << p.substeps << "\n  seed: " << p.seed << "\n";
  return os.str();
}

std::vector<std::string> lint_origin_comments(const std::string& yaml_text) {
  // A value line is "key: value" or "- item" with something after the marker.
  static const std::regex value_line(R"(^\s*(-\s+\S|[A-Za-z_][A-Za-z0-9_]*:\s*[^\s#]))");
  static const std::regex tagged(R"(#\s*(published|chosen)\b)");
  std::vector<std::string> bad;
  std::istringstream in(yaml_text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    const std::string body = line.substr(0, hash);
    if (!std::regex_search(body, value_line)) continue;
    if (body.find_first_not_of(" \t") != std::string::npos && body.substr(body.find_first_not_of(" \t"), 7) == "schema:")
      continue;
    if (hash == std::string::npos || !std::regex_search(line.substr(hash), tagged)) {
      std::string key = body.substr(body.find_first_not_of(" \t"));
      key = key.substr(0, key.find(':'));
      bad.push_back("line " + std::to_string(n) + ": " + key);
    }
  }
  return bad;
}

TerminalIngredients obtain_ingredients(const Config& cfg, bool* designed) {
  const Scenario& sc = cfg.scenario;
  if (designed) *designed = false;
  if (!cfg.ingredients.empty() && fs::exists(cfg.ingredients)) {
    try {
      TerminalIngredients ti = load_ingredients(cfg.ingredients, 0);
      if (ingredients_match(ti, cfg.design, sc.model, sc.bounds)) return ti;
    } catch (const DesignError&) {
      // unreadable cache, redesign below
    }
  }
  TerminalIngredients ti = design_terminal(cfg.design, sc.model, sc.bounds);
  if (designed) *designed = true;
  if (!cfg.ingredients.empty()) {
    const fs::path parent = fs::path(cfg.ingredients).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    save_ingredients(cfg.ingredients, ti);
  }
  return ti;
}

std::string shipped_config_dir() { return std::string(HMPC_SOURCE_DIR) + "/configs"; }

}  // namespace hmpc
