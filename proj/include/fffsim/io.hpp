#pragma once

// Probes, field export, run metrics and run comparison.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fffsim/config.hpp"
#include "fffsim/element.hpp"
#include "fffsim/femcore.hpp"
#include "fffsim/mesh.hpp"

namespace fffsim {

struct ProbeSeries {
  Point3 location;
  std::vector<double> t;  // s
  std::vector<double> T;  // C

  std::size_t size() const { return t.size(); }
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  int dofs = 0;   // unknowns: non-hanging nodes minus bed nodes
  int nodes = 0;  // all mesh nodes
  int remesh = 0;
  int coarsen_events = 0;  // bands coarsened right before this step
  double wall = 0.0;       // s since the start of the run
  int iterations = 0;
  double relative_residual = 0.0;
  int fine_layers = 0;  // level-0 bands in the mesh
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  double wall_time = 0.0;
  int remesh_steps = 0;
  int coarsening_events = 0;
  double max_relative_residual = 0.0;

  std::size_t step_count() const { return steps.size(); }
};

/// Temperature at a point, trilinear in its containing element; empty if the
/// point lies outside the mesh or in an element that is not active yet.
inline std::optional<double> sample_probe(const HexMesh& m, const ThermalState& s, const Point3& p) {
  const ElementId e = m.locate(p);
  if (e < 0 || !m.elements[e].active) return std::nullopt;
  const auto lc = m.local_coordinates(e, p);
  std::array<double, 8> v{};
  for (int a = 0; a < 8; ++a) v[a] = s.T[m.elements[e].nodes[a]];
  return interpolate_coarse(v, lc[0], lc[1], lc[2]);
}

/// Legacy ASCII unstructured grid: hexahedra, point temperature, cell
/// material id (0 polymer, 1 air, 2 effective), level and activity.
inline void export_field(const HexMesh& m, const ThermalState& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "# vtk DataFile Version 3.0\nfffsim temperature field t=" << std::setprecision(9) << s.time
      << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.node_count() << " double\n";
  out << std::setprecision(12);
  for (std::size_t n = 0; n < m.node_count(); ++n) {
    const auto p = m.position(static_cast<NodeId>(n));
    out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  }
  out << "CELLS " << m.element_count() << ' ' << 9 * m.element_count() << '\n';
  for (const auto& e : m.elements) {
    out << 8;
    for (NodeId n : e.nodes) out << ' ' << n;
    out << '\n';
  }
  out << "CELL_TYPES " << m.element_count() << '\n';
  for (std::size_t e = 0; e < m.element_count(); ++e) out << "12\n";
  out << "CELL_DATA " << m.element_count() << "\nSCALARS material int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : m.elements) out << static_cast<int>(e.material) << '\n';
  out << "SCALARS level int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : m.elements) out << e.level << '\n';
  out << "SCALARS active int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : m.elements) out << (e.active ? 1 : 0) << '\n';
  out << "POINT_DATA " << m.node_count() << "\nSCALARS temperature double 1\nLOOKUP_TABLE default\n";
  for (double t : s.T) out << t << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out.precision(17);
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p, std::string& header) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::getline(in, header);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace detail

inline std::filesystem::path probe_file(const std::filesystem::path& dir, std::size_t k) {
  return dir / ("probe_" + std::to_string(k) + ".csv");
}

inline void write_probe_csvs(const std::vector<ProbeSeries>& probes, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto out = detail::open_out(probe_file(dir, k));
    out << "t_s,T_C\n";
    for (std::size_t i = 0; i < probes[k].size(); ++i) out << probes[k].t[i] << ',' << probes[k].T[i] << '\n';
  }
}

inline ProbeSeries read_probe_csv(const std::filesystem::path& path) {
  std::string header;
  ProbeSeries s;
  for (const auto& row : detail::read_csv(path, header)) {
    if (row.size() != 2) throw std::runtime_error("malformed probe row in '" + path.string() + "'");
    s.t.push_back(std::stod(row[0]));
    s.T.push_back(std::stod(row[1]));
  }
  return s;
}

inline void write_metrics_csv(const RunMetrics& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = detail::open_out(path);
  out << "step,time_s,dofs,nodes,remesh,coarsen_events,wall_s,iterations,rel_residual,fine_layers\n";
  for (const auto& r : m.steps)
    out << r.step << ',' << r.time << ',' << r.dofs << ',' << r.nodes << ',' << r.remesh << ','
        << r.coarsen_events << ',' << r.wall << ',' << r.iterations << ',' << r.relative_residual << ','
        << r.fine_layers << '\n';
}

inline RunMetrics read_metrics_csv(const std::filesystem::path& path) {
  std::string header;
  RunMetrics m;
  for (const auto& row : detail::read_csv(path, header)) {
    if (row.size() < 7) throw std::runtime_error("malformed metrics row in '" + path.string() + "'");
    StepRecord r;
    r.step = std::stoi(row[0]);
    r.time = std::stod(row[1]);
    r.dofs = std::stoi(row[2]);
    r.nodes = std::stoi(row[3]);
    r.remesh = std::stoi(row[4]);
    r.coarsen_events = std::stoi(row[5]);
    r.wall = std::stod(row[6]);
    if (row.size() >= 10) {
      r.iterations = std::stoi(row[7]);
      r.relative_residual = std::stod(row[8]);
      r.fine_layers = std::stoi(row[9]);
    }
    m.coarsening_events += r.coarsen_events;
    m.max_relative_residual = std::max(m.max_relative_residual, r.relative_residual);
    m.steps.push_back(r);
  }
  if (!m.steps.empty()) {
    m.wall_time = m.steps.back().wall;
    m.remesh_steps = m.steps.back().remesh + 1;
  }
  return m;
}

/// What `compare` needs from a run: probes, metrics and the run description.
struct RunRecord {
  std::vector<ProbeSeries> probes;
  RunMetrics metrics;
  nlohmann::json info;  // {"mode": ..., "config": ..., "wall_time_s": ...}
};

inline void save_run(const RunRecord& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_probe_csvs(r.probes, dir);
  write_metrics_csv(r.metrics, dir / "metrics.csv");
  auto out = detail::open_out(dir / "run.json");
  out << r.info.dump(2) << '\n';
}

inline RunRecord load_run(const std::filesystem::path& dir) {
  RunRecord r;
  std::ifstream in(dir / "run.json");
  if (!in) throw std::runtime_error("missing '" + (dir / "run.json").string() + "'");
  r.info = nlohmann::json::parse(in);
  r.metrics = read_metrics_csv(dir / "metrics.csv");
  const auto probes = r.info.at("config").at("scenario").at("probes_mm");
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto s = read_probe_csv(probe_file(dir, k));
    s.location = {probes[k].at(0).get<double>() / 1000.0, probes[k].at(1).get<double>() / 1000.0,
                  probes[k].at(2).get<double>() / 1000.0};
    r.probes.push_back(std::move(s));
  }
  return r;
}

struct ProbeDeviation {
  std::size_t common = 0;  // matched samples
  double max_abs = 0.0, mean_abs = 0.0;
  double max_rel = 0.0, mean_rel = 0.0;
  double max_rel_after_peak = 0.0;  // skips samples up to the first local maximum of B
};

struct ComparisonReport {
  std::vector<ProbeDeviation> probes;
  double wall_ratio = 1.0;  // t(B) / t(A)
  double max_abs = 0.0;
  double max_rel = 0.0;
  double max_rel_after_peak = 0.0;
  std::vector<std::array<int, 3>> dof_overlay;  // step, dofs A, dofs B

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["wall_ratio_b_over_a"] = wall_ratio;
    j["max_abs_C"] = max_abs;
    j["max_rel"] = max_rel;
    j["max_rel_after_first_peak"] = max_rel_after_peak;
    j["probes"] = nlohmann::json::array();
    for (const auto& p : probes)
      j["probes"].push_back({{"common_samples", p.common},
                             {"max_abs_C", p.max_abs},
                             {"mean_abs_C", p.mean_abs},
                             {"max_rel", p.max_rel},
                             {"mean_rel", p.mean_rel},
                             {"max_rel_after_first_peak", p.max_rel_after_peak}});
    return j;
  }
};

/// Deviation of `a` against the reference `b` over the samples whose times
/// coincide; relative values divide by max(|T_b|, t_floor).
inline ProbeDeviation compare_series(const ProbeSeries& a, const ProbeSeries& b, double t_floor = 1.0) {
  ProbeDeviation d;
  std::size_t peak = b.size();
  for (std::size_t i = 0; i + 1 < b.size(); ++i)
    if (b.T[i] >= b.T[i + 1]) {
      peak = i;
      break;
    }
  std::size_t i = 0, j = 0;
  double sum_abs = 0.0, sum_rel = 0.0;
  while (i < a.size() && j < b.size()) {
    const double tol = 1e-9 * std::max({1.0, std::abs(a.t[i]), std::abs(b.t[j])});
    if (a.t[i] < b.t[j] - tol) {
      ++i;
    } else if (b.t[j] < a.t[i] - tol) {
      ++j;
    } else {
      const double abs_dev = std::abs(a.T[i] - b.T[j]);
      const double rel = abs_dev / std::max(std::abs(b.T[j]), t_floor);
      d.max_abs = std::max(d.max_abs, abs_dev);
      d.max_rel = std::max(d.max_rel, rel);
      if (peak < b.size() && j > peak) d.max_rel_after_peak = std::max(d.max_rel_after_peak, rel);
      sum_abs += abs_dev;
      sum_rel += rel;
      ++d.common;
      ++i;
      ++j;
    }
  }
  if (d.common > 0) {
    d.mean_abs = sum_abs / static_cast<double>(d.common);
    d.mean_rel = sum_rel / static_cast<double>(d.common);
  }
  return d;
}

inline ComparisonReport compare_runs(const RunRecord& a, const RunRecord& b) {
  if (a.probes.size() != b.probes.size())
    throw std::runtime_error("compare_runs: runs have different probe sets");
  if (a.info.contains("config") && b.info.contains("config")) {
    auto sa = a.info["config"].at("scenario");
    auto sb = b.info["config"].at("scenario");
    sa.erase("activation_mode");
    sb.erase("activation_mode");
    if (sa != sb) throw std::runtime_error("compare_runs: runs describe different scenarios");
  }
  ComparisonReport r;
  for (std::size_t k = 0; k < a.probes.size(); ++k) {
    r.probes.push_back(compare_series(a.probes[k], b.probes[k]));
    r.max_abs = std::max(r.max_abs, r.probes.back().max_abs);
    r.max_rel = std::max(r.max_rel, r.probes.back().max_rel);
    r.max_rel_after_peak = std::max(r.max_rel_after_peak, r.probes.back().max_rel_after_peak);
  }
  const double ta = a.metrics.wall_time;
  const double tb = b.metrics.wall_time;
  r.wall_ratio = ta > 0.0 ? tb / ta : (tb > 0.0 ? INFINITY : 1.0);
  const std::size_t n = std::min(a.metrics.steps.size(), b.metrics.steps.size());
  for (std::size_t s = 0; s < n; ++s)
    r.dof_overlay.push_back({a.metrics.steps[s].step, a.metrics.steps[s].dofs, b.metrics.steps[s].dofs});
  return r;
}

/// JSON summary at `path` plus the dof overlay as `<path>.dofs.csv`.
inline void write_comparison(const ComparisonReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    auto out = detail::open_out(path);
    out << r.to_json().dump(2) << '\n';
  }
  auto out = detail::open_out(path.string() + ".dofs.csv");
  out << "step,dofs_a,dofs_b\n";
  for (const auto& row : r.dof_overlay) out << row[0] << ',' << row[1] << ',' << row[2] << '\n';
}

}  // namespace fffsim
