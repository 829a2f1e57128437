#pragma once

// Run drivers. All three modes share one loop over remeshing steps: quiet
// mode is a single step holding every layer, hybrid adds a fixed number of
// quiet layers per step, adaptive additionally coarsens at the end of each
// step.

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fffsim/activation.hpp"
#include "fffsim/coarsen.hpp"
#include "fffsim/config.hpp"
#include "fffsim/femcore.hpp"
#include "fffsim/homog.hpp"
#include "fffsim/io.hpp"
#include "fffsim/mesh.hpp"
#include "fffsim/toolpath.hpp"

namespace fffsim {

/// Solved state at the end of a remeshing step, before coarsening.
struct CheckPoint {
  int step = 0;
  int built = 0;
  HexMesh mesh;
  ThermalState state;
};

struct RunOptions {
  std::ostream* log = nullptr;              // one line per remeshing step
  std::filesystem::path fields_dir;         // empty: no field export
  std::vector<double> field_fractions{0.25, 0.75, 1.0};
  bool fields_each_remesh = true;
  bool record_checkpoints = false;          // keep end-of-step states (adaptive)
};

struct SimulationResult {
  ActivationMode mode = ActivationMode::quiet;
  std::vector<ProbeSeries> probes;
  RunMetrics metrics;
  std::vector<CoarseningDecision> decisions;
  std::vector<CheckPoint> checkpoints;
  std::vector<int> fine_layers_per_remesh;  // level-0 bands when each step starts
  HexMesh final_mesh;
  ThermalState final_state;
};

inline nlohmann::json run_info(const SimulationConfig& c, ActivationMode mode, double wall) {
  return {{"mode", mode_name(mode)}, {"config", config_to_json(c)}, {"wall_time_s", wall}};
}

inline RunRecord to_record(const SimulationConfig& c, const SimulationResult& r) {
  return {r.probes, r.metrics, run_info(c, r.mode, r.metrics.wall_time)};
}

namespace detail {

inline int unknown_count(const HexMesh& m, const ThermalEngine& e) {
  int bed = 0;
  for (std::size_t n = 0; n < m.node_count(); ++n)
    if (m.nodes[n].z == 0 && !m.is_hanging(static_cast<NodeId>(n))) ++bed;
  return e.dof_count() - bed;
}

inline int fine_band_count(const HexMesh& m) {
  int n = 0;
  for (const auto& b : m.bands) n += b.level == 0 ? 1 : 0;
  return n;
}

}  // namespace detail

inline SimulationResult run_simulation(const SimulationConfig& config, ActivationMode mode,
                                       const RunOptions& options = {}) {
  validate(config);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  auto part = std::make_shared<const PartGeometry>(PartGeometry::from_config(config));
  const double dt = config.time_step();
  const DepositionSchedule schedule = build_schedule(*part, dt);
  const int layers = schedule.layers();
  const auto& cp = config.coarsening;
  const int per_step = mode == ActivationMode::quiet ? layers : cp.quiet_layers_per_remesh;
  const auto steps = plan_remeshing(schedule, per_step);

  MaterialTable materials{config.polymer, config.air_medium,
                          effective_material(compute_alpha(*part), config.air_medium, config.polymer),
                          config.solver.quiet_scale};
  const LayoutSet layouts = LayoutSet::make(part->nx(), part->ny(), cp.factor, cp.max_levels);

  SimulationResult result;
  result.mode = mode;
  for (const auto& p : config.scenario.probes) result.probes.push_back({p, {}, {}});

  std::vector<int> field_marks;
  for (double f : options.field_fractions)
    field_marks.push_back(std::max(1, static_cast<int>(std::lround(f * static_cast<double>(schedule.events.size())))));
  if (!options.fields_dir.empty()) std::filesystem::create_directories(options.fields_dir);
  auto export_at = [&](const HexMesh& m, const ThermalState& s, const std::string& name) {
    if (!options.fields_dir.empty()) export_field(m, s, (options.fields_dir / name).string());
  };

  std::vector<Band> bands;  // stack of built layers
  std::unique_ptr<HexMesh> prev_mesh;
  ThermalState prev_state;
  int pending_coarsen = 0;

  for (const auto& rs : steps) {
    MeshPlan plan{part, layouts, bands, rs.layer_begin, materials};
    for (int l = rs.layer_begin; l < rs.layer_end; ++l) plan.bands.push_back({l, l + 1, 0});
    auto mesh = std::make_unique<HexMesh>(build_mesh(plan));
    ThermalState state = prev_mesh ? map_solution(*prev_mesh, prev_state, *mesh, config.process)
                                   : initial_state(*mesh, config.process);
    ThermalEngine engine(*mesh, config.process, config.solver, dt);
    const int dofs = detail::unknown_count(*mesh, engine);
    result.fine_layers_per_remesh.push_back(detail::fine_band_count(*mesh));

    for (int ev = rs.event_begin; ev < rs.event_end; ++ev) {
      activate(engine, state, schedule.events[static_cast<std::size_t>(ev)],
               config.process.activation_temperature);
      const auto rep = engine.step(state);
      release_transient_locks(state);

      StepRecord rec;
      rec.step = ev;
      rec.time = state.time;
      rec.dofs = dofs;
      rec.nodes = static_cast<int>(mesh->node_count());
      rec.remesh = rs.index;
      rec.coarsen_events = ev == rs.event_begin ? pending_coarsen : 0;
      rec.wall = seconds();
      rec.iterations = rep.iterations;
      rec.relative_residual = rep.relative_residual();
      rec.fine_layers = result.fine_layers_per_remesh.back();
      result.metrics.max_relative_residual = std::max(result.metrics.max_relative_residual, rec.relative_residual);
      result.metrics.steps.push_back(rec);

      for (auto& probe : result.probes)
        if (auto t = sample_probe(*mesh, state, probe.location)) {
          probe.t.push_back(state.time);
          probe.T.push_back(*t);
        }
      for (std::size_t f = 0; f < field_marks.size(); ++f)
        if (ev + 1 == field_marks[f])
          export_at(*mesh, state, "progress_" + std::to_string(std::lround(100 * options.field_fractions[f])) + ".vtk");
    }
    pending_coarsen = 0;
    bands = mesh->bands;

    if (rs.index + 1 == static_cast<int>(steps.size()) && config.solver.dwell_time > 0.0) {
      const int extra = static_cast<int>(std::ceil(config.solver.dwell_time / dt - 1e-9));
      for (int k = 0; k < extra; ++k) {
        const auto rep = engine.step(state);
        StepRecord rec = result.metrics.steps.back();
        rec.step += 1;
        rec.time = state.time;
        rec.coarsen_events = 0;
        rec.wall = seconds();
        rec.iterations = rep.iterations;
        rec.relative_residual = rep.relative_residual();
        result.metrics.steps.push_back(rec);
        for (auto& probe : result.probes)
          if (auto t = sample_probe(*mesh, state, probe.location)) {
            probe.t.push_back(state.time);
            probe.T.push_back(*t);
          }
      }
    }
    if (options.fields_each_remesh && mode != ActivationMode::quiet)
      export_at(*mesh, state, "remesh_" + std::to_string(rs.index) + ".vtk");

    const bool last = rs.index + 1 == static_cast<int>(steps.size());
    if (mode == ActivationMode::adaptive && !last) {
      if (options.record_checkpoints) result.checkpoints.push_back({rs.index, rs.layer_end, *mesh, state});
      auto pass = coarsening_pass(*mesh, state, rs.layer_end, cp, config.process, rs.index);
      result.decisions.insert(result.decisions.end(), pass.decisions.begin(), pass.decisions.end());
      if (pass.mesh) {
        bands = pass.mesh->bands;
        pending_coarsen = pass.accepted;
        result.metrics.coarsening_events += pass.accepted;
        mesh = std::make_unique<HexMesh>(std::move(*pass.mesh));
        state = std::move(pass.state);
      }
    }
    if (options.log)
      *options.log << "remesh " << rs.index << " layers " << rs.layer_begin << "-" << rs.layer_end
                   << " dofs " << dofs << " wall " << seconds() << " s\n";
    if (last) {
      result.final_mesh = *mesh;
      result.final_state = state;
    }
    prev_mesh = std::move(mesh);
    prev_state = std::move(state);
  }
  result.metrics.remesh_steps = static_cast<int>(steps.size());
  result.metrics.wall_time = seconds();
  return result;
}

inline SimulationResult run_quiet(const SimulationConfig& c, const RunOptions& o = {}) {
  return run_simulation(c, ActivationMode::quiet, o);
}
inline SimulationResult run_hybrid(const SimulationConfig& c, const RunOptions& o = {}) {
  return run_simulation(c, ActivationMode::hybrid, o);
}
inline SimulationResult run_adaptive(const SimulationConfig& c, const RunOptions& o = {}) {
  return run_simulation(c, ActivationMode::adaptive, o);
}
inline SimulationResult run(const SimulationConfig& c, const RunOptions& o = {}) {
  return run_simulation(c, c.scenario.activation_mode, o);
}

}  // namespace fffsim
