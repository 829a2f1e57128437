// Command-line front end: run a scenario, compare two runs, benchmark modes.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fffsim/coarsen.hpp"
#include "fffsim/config.hpp"
#include "fffsim/io.hpp"
#include "fffsim/mesh.hpp"
#include "fffsim/simulation.hpp"
#include "fffsim/toolpath.hpp"

namespace fs = std::filesystem;
using namespace fffsim;

namespace {

struct RunArgs {
  std::string config;
  std::string mode;
  std::string probes_out;
  std::string fields_out;
  std::string metrics_out;
  std::string decision_log;
  std::string schedule_out;
  std::string out;
  bool mesh_report = false;
  bool verbose = false;
};

int cmd_run(const RunArgs& a) {
  SimulationConfig cfg = load_config(a.config);
  if (!a.mode.empty()) cfg.scenario.activation_mode = parse_mode(a.mode);

  if (!a.schedule_out.empty()) write_schedule_csv(build_schedule(cfg), a.schedule_out);
  if (a.mesh_report) {
    auto part = std::make_shared<const PartGeometry>(PartGeometry::from_config(cfg));
    MeshPlan plan{part, LayoutSet::make(part->nx(), part->ny(), cfg.coarsening.factor, cfg.coarsening.max_levels),
                  {}, 0, {}};
    for (int l = 0; l < part->nz(); ++l) plan.bands.push_back({l, l + 1, 0});
    std::cout << mesh_report(build_mesh(plan));
  }

  RunOptions opts;
  if (a.verbose) opts.log = &std::cerr;
  if (!a.fields_out.empty()) opts.fields_dir = a.fields_out;
  const auto result = run(cfg, opts);
  const auto record = to_record(cfg, result);

  if (!a.out.empty()) save_run(record, a.out);
  if (!a.probes_out.empty()) write_probe_csvs(result.probes, a.probes_out);
  if (!a.metrics_out.empty()) write_metrics_csv(result.metrics, a.metrics_out);
  if (!a.decision_log.empty()) write_decision_log(result.decisions, a.decision_log);

  std::cout << "mode " << mode_name(result.mode) << " steps " << result.metrics.step_count() << " remesh "
            << result.metrics.remesh_steps << " coarsened " << result.metrics.coarsening_events << " wall "
            << result.metrics.wall_time << " s\n";
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& report) {
  const auto r = compare_runs(load_run(a), load_run(b));
  write_comparison(r, report);
  std::cout << "max deviation " << r.max_abs << " C, relative " << r.max_rel << ", after first peak "
            << r.max_rel_after_peak << ", wall ratio " << r.wall_ratio << "\n";
  return 0;
}

int cmd_bench(const std::string& config, const std::string& modes_csv, const std::string& report,
              const std::string& out_dir) {
  const SimulationConfig cfg = load_config(config);
  std::vector<ActivationMode> modes;
  std::stringstream ss(modes_csv);
  for (std::string m; std::getline(ss, m, ',');) modes.push_back(parse_mode(m));
  if (modes.empty()) throw std::runtime_error("bench: no modes given");

  nlohmann::json rows = nlohmann::json::array();
  double reference = 0.0;
  for (ActivationMode mode : modes) {
    const auto r = run_simulation(cfg, mode);
    if (!out_dir.empty()) save_run(to_record(cfg, r), fs::path(out_dir) / mode_name(mode));
    int peak = 0;
    for (const auto& s : r.metrics.steps) peak = std::max(peak, s.dofs);
    if (reference == 0.0) reference = r.metrics.wall_time;
    rows.push_back({{"mode", mode_name(mode)},
                    {"wall_time_s", r.metrics.wall_time},
                    {"relative_time", r.metrics.wall_time / reference},
                    {"steps", r.metrics.step_count()},
                    {"remesh_steps", r.metrics.remesh_steps},
                    {"coarsening_events", r.metrics.coarsening_events},
                    {"peak_dofs", peak}});
    std::cout << mode_name(mode) << " " << r.metrics.wall_time << " s (relative "
              << r.metrics.wall_time / reference << ")\n";
  }
  nlohmann::json j{{"reference_mode", mode_name(modes.front())}, {"runs", rows}};
  if (fs::path(report).has_parent_path()) fs::create_directories(fs::path(report).parent_path());
  std::ofstream out(report);
  if (!out) throw std::runtime_error("cannot write '" + report + "'");
  out << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal simulation of fused filament fabrication"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "simulate one scenario");
  run_cmd->add_option("--config", ra.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", ra.mode, "quiet | hybrid | adaptive (overrides the config)")
      ->check(CLI::IsMember({"quiet", "hybrid", "adaptive"}));
  run_cmd->add_option("--probes-out", ra.probes_out, "directory for probe_<k>.csv");
  run_cmd->add_option("--fields-out", ra.fields_out, "directory for VTK field snapshots");
  run_cmd->add_option("--metrics-out", ra.metrics_out, "per-step metrics CSV");
  run_cmd->add_option("--decision-log", ra.decision_log, "coarsening decisions CSV");
  run_cmd->add_option("--dump-schedule", ra.schedule_out, "deposition schedule CSV");
  run_cmd->add_option("--out", ra.out, "run directory (probes, metrics, run.json) for compare");
  run_cmd->add_flag("--mesh-report", ra.mesh_report, "print the full fine mesh summary");
  run_cmd->add_flag("-v,--verbose", ra.verbose, "progress line per remeshing step on stderr");

  std::string ca, cb, creport;
  auto* cmp = app.add_subcommand("compare", "compare two run directories");
  cmp->add_option("--a", ca, "run directory A")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--b", cb, "run directory B (reference)")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--report", creport, "report JSON")->required();

  std::string bconfig, bmodes = "quiet,hybrid,adaptive", breport, bout;
  auto* bench = app.add_subcommand("bench", "run several modes and report relative timings");
  bench->add_option("--config", bconfig, "scenario JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--modes", bmodes, "comma-separated modes, first is the reference");
  bench->add_option("--report", breport, "report JSON")->required();
  bench->add_option("--out", bout, "directory for per-mode run outputs");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(ra);
    if (*cmp) return cmd_compare(ca, cb, creport);
    if (*bench) return cmd_bench(bconfig, bmodes, breport, bout);
  } catch (const ConfigError& e) {
    std::cerr << "config error (" << e.field() << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
