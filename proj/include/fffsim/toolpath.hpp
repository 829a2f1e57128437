#pragma once

// Part geometry on the fine cell grid, per-layer polymer/air classification
// (solid perimeter plus rectilinear infill), and the serpentine deposition
// schedule with one polymer cell per time step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fffsim/config.hpp"

namespace fffsim {

enum class CellMaterial : std::uint8_t { empty, polymer, air };

struct CellClassification {
  int layer = 0;
  int i = 0;
  int j = 0;
  CellMaterial material = CellMaterial::polymer;

  bool operator==(const CellClassification&) const = default;
};

/// Axis-aligned rectangle of fine cells, half-open: [i0,i1) x [j0,j1).
struct CellRect {
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
  bool contains(int i, int j) const { return i >= i0 && i < i1 && j >= j0 && j < j1; }
};

/// Footprint of a single layer as a union of disjoint rectangles.
struct LayerFootprint {
  int nx = 0;
  int ny = 0;
  std::vector<CellRect> rects;

  bool contains(int i, int j) const {
    for (const auto& r : rects)
      if (r.contains(i, j)) return true;
    return false;
  }
  bool operator==(const LayerFootprint& o) const {
    if (nx != o.nx || ny != o.ny || rects.size() != o.rects.size()) return false;
    for (std::size_t k = 0; k < rects.size(); ++k) {
      const auto& a = rects[k];
      const auto& b = o.rects[k];
      if (a.i0 != b.i0 || a.i1 != b.i1 || a.j0 != b.j0 || a.j1 != b.j1) return false;
    }
    return true;
  }
};

struct InfillSpec {
  double density = 1.0;
  InfillPattern pattern = InfillPattern::dense;
  int perimeter_cells = 1;
};

/// Footprint of `layer` for the configured geometry.
inline LayerFootprint layer_footprint(int layer, const SimulationConfig& c) {
  LayerFootprint f{c.cells_x(), c.cells_y(), {}};
  if (c.scenario.geometry == GeometryKind::bridge) {
    const int pillar_cells = static_cast<int>(
        std::round(c.scenario.bridge.pillar_width / c.process.element_length));
    const int pillar_layers = static_cast<int>(
        std::round(c.scenario.bridge.pillar_height / c.process.layer_height));
    if (layer < pillar_layers) {
      f.rects.push_back({0, pillar_cells, 0, f.ny});
      f.rects.push_back({f.nx - pillar_cells, f.nx, 0, f.ny});
      return f;
    }
  }
  f.rects.push_back({0, f.nx, 0, f.ny});
  return f;
}

inline bool raster_along_x(int layer) { return layer % 2 == 0; }

/// Classifies every footprint cell of `layer`. Even layers raster along x
/// (infill rows are lines of constant j), odd layers along y.
inline std::vector<CellClassification> classify_layer(int layer, const LayerFootprint& fp,
                                                      const InfillSpec& infill) {
  std::vector<CellClassification> out;
  const int p = infill.perimeter_cells;
  auto is_perimeter = [&](int i, int j) {
    for (int d = 1; d <= p; ++d) {
      if (!fp.contains(i - d, j) || !fp.contains(i + d, j) || !fp.contains(i, j - d) ||
          !fp.contains(i, j + d))
        return true;
    }
    return false;
  };

  int n_total = 0, n_perimeter = 0;
  for (int j = 0; j < fp.ny; ++j)
    for (int i = 0; i < fp.nx; ++i)
      if (fp.contains(i, j)) {
        ++n_total;
        if (is_perimeter(i, j)) ++n_perimeter;
      }

  // Interior row density chosen so the layer's polymer fraction, perimeter
  // included, matches the requested infill density.
  double row_density = 1.0;
  if (infill.pattern == InfillPattern::rectilinear) {
    const int n_interior = n_total - n_perimeter;
    row_density = n_interior > 0
                      ? std::clamp((infill.density * n_total - n_perimeter) / n_interior, 0.0, 1.0)
                      : 1.0;
  }
  auto polymer_row = [&](int r) {
    if (row_density >= 1.0) return true;
    constexpr double tol = 1e-9;
    return std::ceil((r + 1) * row_density - tol) > std::ceil(r * row_density - tol);
  };

  const bool along_x = raster_along_x(layer);
  for (int j = 0; j < fp.ny; ++j) {
    for (int i = 0; i < fp.nx; ++i) {
      if (!fp.contains(i, j)) continue;
      CellMaterial m = CellMaterial::polymer;
      if (infill.pattern == InfillPattern::rectilinear && !is_perimeter(i, j))
        m = polymer_row(along_x ? j - p : i - p) ? CellMaterial::polymer : CellMaterial::air;
      out.push_back({layer, i, j, m});
    }
  }
  return out;
}

inline std::vector<CellClassification> classify_layer(int layer, const SimulationConfig& c) {
  if (layer < 0 || layer >= c.total_layers())
    throw std::out_of_range("classify_layer: layer index out of range");
  const auto& s = c.scenario;
  return classify_layer(layer, layer_footprint(layer, c),
                        InfillSpec{s.infill_density, s.infill_pattern, s.perimeter_cells});
}

/// Fine-cell grid of the full part with per-cell material.
class PartGeometry {
 public:
  PartGeometry() = default;

  PartGeometry(int nx, int ny, int nz, double dx, double dy, double dz)
      : nx_(nx), ny_(ny), nz_(nz), dx_(dx), dy_(dy), dz_(dz),
        cells_(static_cast<std::size_t>(nx) * ny * nz, CellMaterial::empty) {}

  static PartGeometry from_config(const SimulationConfig& c) {
    PartGeometry g(c.cells_x(), c.cells_y(), c.total_layers(), c.process.element_length,
                   c.process.filament_width, c.process.layer_height);
    const auto& s = c.scenario;
    const InfillSpec infill{s.infill_density, s.infill_pattern, s.perimeter_cells};
    for (int k = 0; k < g.nz_; ++k) {
      auto fp = layer_footprint(k, c);
      for (const auto& cell : classify_layer(k, fp, infill)) g.set(cell.i, cell.j, k, cell.material);
    }
    return g;
  }

  void set(int i, int j, int k, CellMaterial m) { cells_[index(i, j, k)] = m; }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double dz() const { return dz_; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny_ + j) * nx_ + i;
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < nx_ && j >= 0 && j < ny_ && k >= 0 && k < nz_;
  }
  CellMaterial at(int i, int j, int k) const {
    return in_bounds(i, j, k) ? cells_[index(i, j, k)] : CellMaterial::empty;
  }
  bool in_part(int i, int j, int k) const { return at(i, j, k) != CellMaterial::empty; }

  /// True if layers `a` and `b` cover the same cells.
  bool same_footprint(int a, int b) const {
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (in_part(i, j, a) != in_part(i, j, b)) return false;
    return true;
  }

  std::size_t count(CellMaterial m) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), m));
  }

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0;
  double dx_ = 0, dy_ = 0, dz_ = 0;
  std::vector<CellMaterial> cells_;
};

struct CellId {
  int i = 0, j = 0, k = 0;
  bool operator==(const CellId&) const = default;
};

struct DepositionEvent {
  int step_index = 0;
  int layer = 0;
  std::vector<CellId> polymer;  // exactly one for fine-layer deposition
  std::vector<CellId> air;      // co-activated within the same time step
};

struct DepositionSchedule {
  double time_step = 0.0;
  std::vector<DepositionEvent> events;
  std::vector<int> layer_begin;  // first event of each layer, plus a sentinel

  int layers() const { return static_cast<int>(layer_begin.size()) - 1; }
  double print_time() const { return time_step * static_cast<double>(events.size()); }
};

namespace detail {

// Raster lines of a layer in deposition order; each line is a cell list in
// serpentine traversal order.
inline std::vector<std::vector<CellId>> raster_lines(const PartGeometry& g, int k) {
  std::vector<std::vector<CellId>> lines;
  if (raster_along_x(k)) {
    for (int j = 0; j < g.ny(); ++j) {
      std::vector<CellId> line;
      for (int n = 0; n < g.nx(); ++n) {
        int i = (j % 2 == 0) ? n : g.nx() - 1 - n;
        if (g.in_part(i, j, k)) line.push_back({i, j, k});
      }
      lines.push_back(std::move(line));
    }
  } else {
    for (int i = 0; i < g.nx(); ++i) {
      std::vector<CellId> line;
      for (int n = 0; n < g.ny(); ++n) {
        int j = (i % 2 == 0) ? n : g.ny() - 1 - n;
        if (g.in_part(i, j, k)) line.push_back({i, j, k});
      }
      lines.push_back(std::move(line));
    }
  }
  return lines;
}

}  // namespace detail

/// Serpentine schedule over the part, one polymer cell per event. Air cells of
/// the lines up to a completed line are co-activated with the event that
/// completes it; leftover air joins the layer's last polymer event.
inline DepositionSchedule build_schedule(const PartGeometry& g, double time_step) {
  DepositionSchedule s;
  s.time_step = time_step;
  for (int k = 0; k < g.nz(); ++k) {
    s.layer_begin.push_back(static_cast<int>(s.events.size()));
    auto lines = detail::raster_lines(g, k);
    std::size_t pending_from = 0;  // first line whose air has not been co-activated
    const std::size_t layer_first = s.events.size();
    for (std::size_t l = 0; l < lines.size(); ++l) {
      int last_polymer = -1;
      for (std::size_t n = 0; n < lines[l].size(); ++n)
        if (g.at(lines[l][n].i, lines[l][n].j, k) == CellMaterial::polymer)
          last_polymer = static_cast<int>(n);
      for (int n = 0; n <= last_polymer; ++n) {
        const auto& c = lines[l][n];
        if (g.at(c.i, c.j, k) != CellMaterial::polymer) continue;
        DepositionEvent e;
        e.step_index = static_cast<int>(s.events.size());
        e.layer = k;
        e.polymer.push_back(c);
        if (n == last_polymer) {
          for (std::size_t m = pending_from; m <= l; ++m)
            for (const auto& a : lines[m])
              if (g.at(a.i, a.j, k) == CellMaterial::air) e.air.push_back(a);
          pending_from = l + 1;
        }
        s.events.push_back(std::move(e));
      }
    }
    if (pending_from < lines.size()) {
      std::vector<CellId> rest;
      for (std::size_t m = pending_from; m < lines.size(); ++m)
        for (const auto& a : lines[m])
          if (g.at(a.i, a.j, k) == CellMaterial::air) rest.push_back(a);
      if (!rest.empty()) {
        if (s.events.size() == layer_first)
          throw std::runtime_error("build_schedule: layer " + std::to_string(k) +
                                   " has air cells but no polymer");
        auto& last = s.events.back().air;
        last.insert(last.end(), rest.begin(), rest.end());
      }
    }
  }
  s.layer_begin.push_back(static_cast<int>(s.events.size()));
  if (s.events.empty()) throw std::runtime_error("build_schedule: geometry has no polymer cells");
  return s;
}

inline DepositionSchedule build_schedule(const SimulationConfig& c) {
  return build_schedule(PartGeometry::from_config(c), c.time_step());
}

/// CSV with one row per activated cell: step,layer,i,j,material.
inline void write_schedule_csv(const DepositionSchedule& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "step,layer,i,j,material\n";
  for (const auto& e : s.events) {
    for (const auto& c : e.polymer)
      out << e.step_index << ',' << e.layer << ',' << c.i << ',' << c.j << ",polymer\n";
    for (const auto& c : e.air)
      out << e.step_index << ',' << e.layer << ',' << c.i << ',' << c.j << ",air\n";
  }
}

}  // namespace fffsim
