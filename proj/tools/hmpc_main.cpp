// hmpc command-line driver.
//
// Precedence for every setting: command-line flag, then the config file, then the
// built-in default. Exit codes: 0 pass, 1 invariant or verification failure,
// 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hmpc/config.hpp"
#include "hmpc/io.hpp"
#include "hmpc/report.hpp"

namespace fs = std::filesystem;
using namespace hmpc;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Common {
  std::string config;
  std::string ingredients;
};

Config load(const Common& c) {
  Config cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (!c.ingredients.empty()) cfg.ingredients = c.ingredients;
  return cfg;
}

void print_lmi_report(const LmiReport& rep, const TerminalIngredients& ti) {
  std::printf("check grid points      %d\n", rep.points);
  std::printf("failing points         %d\n", rep.failures);
  std::printf("worst eigenvalue       %.3e\n", rep.worst_eig);
  std::printf("c_o                    %.6g\n", ti.c_o);
  std::printf("alpha                  %.6g\n", ti.alpha);
  std::printf("c_s                    ");
  for (int j = 0; j < ti.c_s.size(); ++j) std::printf("%s%.4g", j ? " " : "", ti.c_s(j));
  std::printf("\n");
  std::printf("tightened set nonempty %s\n", rep.tightened_nonempty ? "yes" : "no");
  if (rep.pass) std::printf("all check-grid LMIs satisfied\n");
  else std::printf("check-grid verification FAILED\n");
}

int cmd_design(const Common& c, const std::string& out, std::optional<double> att_max_deg,
               std::optional<double> weight_scale) {
  Config cfg = load(c);
  if (att_max_deg) cfg.scenario.bounds.att_max = cfg.scenario.bounds.att_cmd_max = *att_max_deg * M_PI / 180.0;
  if (weight_scale) cfg.design.weight_scale = *weight_scale;
  const Scenario& sc = cfg.scenario;
  LmiReport rep;
  TerminalIngredients ti;
  try {
    ti = design_terminal(cfg.design, sc.model, sc.bounds, &rep);
  } catch (const DesignError& e) {
    std::fprintf(stderr, "design failed: %s\n", e.what());
    return kFail;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string path = out.empty() ? cfg.ingredients : out;
  if (!path.empty()) {
    save_ingredients(path, ti);
    std::printf("wrote %s\n", path.c_str());
  }
  print_lmi_report(rep, ti);
  return rep.pass ? kPass : kFail;
}

int cmd_verify(const Common& c, const std::string& external) {
  Config cfg = load(c);
  const Scenario& sc = cfg.scenario;
  const std::string path = external.empty() ? cfg.ingredients : external;
  if (path.empty()) throw ConfigError("verify-terminal needs --load-external or terminal.ingredients");
  TerminalIngredients ti;
  try {
    ti = load_ingredients(path, design_fingerprint(sc.model, sc.bounds));
  } catch (const DesignError& e) {
    std::fprintf(stderr, "%s: %s\n", path.c_str(), e.what());
    return kFail;
  }
  const PolytopeZ Z = make_polytope(sc.bounds);
  if (ti.c_s.size() != Z.n_s()) {
    std::fprintf(stderr, "%s: %d tighteners for %d constraint rows\n", path.c_str(), int(ti.c_s.size()), Z.n_s());
    return kFail;
  }
  const auto pts = build_grid(sc.bounds, cfg.design.check_grid, sc.model);
  const LmiReport rep = verify_lmis(ti, ti.Q, ti.R, pts, Z, sc.model, cfg.design.check_tol);
  // The stored tighteners must follow from the stored P and K.
  Vec c_s;
  double c_o = 0.0;
  compute_tighteners(ti.P, ti.K, Z, position_selector(), c_s, c_o);
  double rel = std::abs(c_o - ti.c_o) / std::max(1e-300, std::abs(c_o));
  for (int j = 0; j < c_s.size(); ++j)
    rel = std::max(rel, std::abs(c_s(j) - ti.c_s(j)) / std::max(1e-300, std::abs(c_s(j))));
  print_lmi_report(rep, ti);
  std::printf("tightener mismatch     %.3e (relative)\n", rel);
  return rep.pass && rel <= 1e-10 ? kPass : kFail;
}

std::vector<Eigen::Vector2d> read_nodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path);
  std::vector<Eigen::Vector2d> nodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    double x, y;
    if (!(ss >> x >> y)) throw ConfigError("plan file " + path + ": expected 'x y' per line");
    nodes.emplace_back(x, y);
  }
  if (nodes.size() < 2) throw ConfigError("plan file " + path + ": need at least two nodes");
  return nodes;
}

int cmd_decomp(const Common& c, const std::string& plan_file, int segments, const std::string& out,
               std::optional<double> box_width) {
  Config cfg = load(c);
  Scenario& sc = cfg.scenario;
  if (box_width) sc.decomp.box_width = *box_width;
  std::vector<Eigen::Vector2d> nodes;
  if (!plan_file.empty()) {
    nodes = read_nodes(plan_file);
  } else {
    if (segments < 1) throw ConfigError("--segments must be >= 1");
    const Eigen::Vector2d a = sc.start.head<2>(), b = sc.goal.p.head<2>();
    for (int i = 0; i <= segments; ++i) nodes.push_back(a + (b - a) * (static_cast<double>(i) / segments));
  }
  const GridMap map = build_map(sc);
  std::vector<ConvexRegion> regions;
  try {
    regions = i_decomp(map, nodes, sc.decomp);
  } catch (const DecompError& e) {
    std::fprintf(stderr, "decomposition failed: %s\n", e.what());
    return kFail;
  }
  std::ostringstream os;
  os << "# hmpc-regions schema 1\n";
  for (const auto& r : regions) os << region_to_text(r);
  if (out.empty()) {
    std::cout << os.str();
  } else {
    write_file(out, os.str());
    std::printf("wrote %zu regions to %s\n", regions.size(), out.c_str());
  }
  return kPass;
}

struct RunFlags {
  std::optional<std::string> controller, plant;
  std::vector<int> betas;
  std::optional<double> box_width, time_limit;
  std::optional<std::uint64_t> seed;
  bool pipelined = false;
  std::string out = "runs";
};

std::string run_label(const Scenario& sc) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_%s_%s_b%d_w%.2f_s%llu", sc.name.c_str(), to_string(sc.controller),
                to_string(sc.plant.mode), sc.schedule.beta, sc.decomp.box_width,
                static_cast<unsigned long long>(sc.plant.seed));
  return buf;
}

int cmd_run(const Common& c, const RunFlags& f) {
  Config cfg = load(c);
  Scenario& sc = cfg.scenario;
  if (f.controller) sc.controller = *f.controller == "smpc" ? ControllerKind::smpc : ControllerKind::hmpc;
  if (f.plant) sc.plant.mode = *f.plant == "mismatch" ? PlantMode::mismatch : PlantMode::exact;
  if (f.box_width) sc.decomp.box_width = *f.box_width;
  if (f.time_limit) sc.time_limit = *f.time_limit;
  if (f.seed) sc.plant.seed = *f.seed;
  if (f.pipelined) sc.pipelined = true;
  sc.validate();

  bool designed = false;
  TerminalIngredients ti;
  if (sc.controller == ControllerKind::hmpc) {
    ti = obtain_ingredients(cfg, &designed);
    if (designed) std::fprintf(stderr, "designed terminal ingredients (alpha %.4g)\n", ti.alpha);
  }

  std::vector<Schedule> schedules;
  if (f.betas.empty()) schedules.push_back(sc.schedule);
  for (int b : f.betas) schedules.push_back(sweep_schedule(sc.schedule, b));

  bool all_ok = true;
  for (const Schedule& s : schedules) {
    Scenario run = sc;
    run.schedule = s;
    const RunLog log = run_closed_loop(run, ti);
    const std::string label = run_label(run);
    const std::string dir = (fs::path(f.out) / label).string();
    write_run(dir, log);
    Config resolved = cfg;
    resolved.scenario = run;
    write_file((fs::path(dir) / "config.yaml").string(), dump_config(resolved));
    const Summary& m = log.summary;
    std::printf("%s: goal %s", label.c_str(), m.goal_reached ? "reached" : "not reached");
    if (m.goal_reached) std::printf(" at %.2f s", m.goal_time);
    std::printf(", min clearance %.4f m, max tracking error %.3g m, max slack %.3g, invariants %s\n",
                m.min_clearance, m.max_tracking_error, m.max_slack, m.invariants_ok ? "ok" : "FAILED");
    if (!m.error.empty()) std::printf("  error: %s\n", m.error.c_str());
    all_ok = all_ok && m.invariants_ok;
  }
  return all_ok ? kPass : kFail;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  if (dirs.empty()) throw CLI::ValidationError("report", "at least one run directory is required");
  std::vector<LabeledLog> runs;
  for (const auto& d : dirs) {
    fs::path p(d);
    if (p.filename().empty()) p = p.parent_path();
    runs.push_back({p.filename().string(), read_run(d)});
  }
  for (const auto& name : write_report(runs, out)) std::printf("%s\n", (fs::path(out) / name).c_str());
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical MPC for quadrotor navigation: offline design, decomposition, simulation"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "scenario config file (YAML)");
    sub->add_option("--ingredients", common.ingredients, "terminal ingredient file (overrides the config)");
  };

  std::string design_out;
  std::optional<double> att_max_deg, weight_scale;
  auto* design = app.add_subcommand("design-terminal", "design and verify the terminal ingredients");
  add_common(design);
  design->add_option("-o,--out", design_out, "ingredient file to write");
  design->add_option("--att-max-deg", att_max_deg, "attitude and attitude-command bound override");
  design->add_option("--weight-scale", weight_scale, "design weight scale override");

  std::string external;
  auto* verify = app.add_subcommand("verify-terminal", "verify an ingredient file on the check grid");
  add_common(verify);
  verify->add_option("--load-external", external, "ingredient file to verify");

  std::string plan_file, decomp_out;
  int segments = 5;
  std::optional<double> decomp_box;
  auto* decomp = app.add_subcommand("decomp", "decompose a plan into convex regions");
  add_common(decomp);
  decomp->add_option("--plan", plan_file, "node file, one 'x y' pair per line (default: straight start-goal line)");
  decomp->add_option("--segments", segments, "segments of the straight line")->check(CLI::PositiveNumber);
  decomp->add_option("--box-width", decomp_box, "bounding box width override");
  decomp->add_option("-o,--out", decomp_out, "output file (default stdout)");

  RunFlags rf;
  auto* run = app.add_subcommand("run", "closed-loop simulation");
  add_common(run);
  run->add_option("--controller", rf.controller, "hmpc or smpc")->check(CLI::IsMember({"hmpc", "smpc"}));
  run->add_option("--plant", rf.plant, "exact or mismatch")->check(CLI::IsMember({"exact", "mismatch"}));
  run->add_option("--beta", rf.betas, "planner ratio; several values run a sweep")->check(CLI::Range(2, 1000));
  run->add_option("--box-width", rf.box_width, "bounding box width override");
  run->add_option("--time-limit", rf.time_limit, "simulated time limit override");
  run->add_option("--seed", rf.seed, "plant seed override");
  run->add_flag("--pipelined", rf.pipelined, "run planner cycles on a worker thread");
  run->add_option("-o,--out", rf.out, "output directory")->capture_default_str();

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "aggregate run directories into tables and series");
  report->add_option("runs", report_dirs, "run directories");
  report->add_option("-o,--out", report_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kUsage;
  }

  try {
    if (*design) return cmd_design(common, design_out, att_max_deg, weight_scale);
    if (*verify) return cmd_verify(common, external);
    if (*decomp) return cmd_decomp(common, plan_file, segments, decomp_out, decomp_box);
    if (*run) return cmd_run(common, rf);
    if (*report) return cmd_report(report_dirs, report_out);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "log error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFail;
  }
  return kUsage;
}
