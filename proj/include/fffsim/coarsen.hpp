#pragma once

// Layer coarsening: candidate bands, potential meshes, the interpolation-error
// test on the current solution, and solution transfer between meshes.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fffsim/config.hpp"
#include "fffsim/element.hpp"
#include "fffsim/femcore.hpp"
#include "fffsim/homog.hpp"
#include "fffsim/mesh.hpp"

namespace fffsim {

struct CoarseningDecision {
  int step = 0;     // remeshing step at whose end the check ran
  int band_lo = 0;  // fine layers [band_lo, band_hi)
  int band_hi = 0;
  int level = 0;  // target level
  bool accept = false;
  double worst_error = 0.0;
  NodeId worst_node = -1;  // node of the checked mesh, -1 if none was checked
};

/// Group of `factor` consecutive bands merged into one band one level up.
struct CandidateBand {
  int first = 0;  // index of the lowest band of the group
  int level = 0;  // target level
};

namespace detail {

// True if every cell of the level-k layout is fully inside or fully outside
// the part footprint in layers [z0, z1), and those layers share a footprint.
inline bool band_fits_layout(const HexMesh& m, int z0, int z1, int level) {
  const PartGeometry& g = *m.part;
  for (int k = z0 + 1; k < z1; ++k)
    if (!g.same_footprint(z0, k)) return false;
  const auto bx = m.layouts.x[level].boundaries();
  const auto by = m.layouts.y[level].boundaries();
  for (std::size_t sy = 0; sy + 1 < by.size(); ++sy)
    for (std::size_t sx = 0; sx + 1 < bx.size(); ++sx) {
      int inside = 0, cells = 0;
      for (int j = by[sy]; j < by[sy + 1]; ++j)
        for (int i = bx[sx]; i < bx[sx + 1]; ++i, ++cells)
          if (g.in_part(i, j, z0)) ++inside;
      if (inside != 0 && inside != cells) return false;
    }
  return true;
}

}  // namespace detail

/// Lowest group of `factor` equal-level bands, entirely below `built`, that
/// can move one level up; none if the stack cannot coarsen further.
inline std::optional<CandidateBand> next_candidate(const HexMesh& m, int built, int max_level) {
  const int cf = m.layouts.factor;
  const int top = std::min(max_level, m.layouts.max_level());
  const int nb = static_cast<int>(m.bands.size());
  for (int b = 0; b + cf <= nb; ++b) {
    const int level = m.bands[b].level;
    if (level >= top) continue;
    bool same = true;
    for (int i = 1; i < cf; ++i) same = same && m.bands[b + i].level == level;
    if (!same) continue;
    const int z0 = m.bands[b].z0;
    const int z1 = m.bands[b + cf - 1].z1;
    if (z1 > built) break;
    if (!detail::band_fits_layout(m, z0, z1, level + 1)) continue;
    return CandidateBand{b, level + 1};
  }
  return std::nullopt;
}

/// Current mesh with the candidate bands replaced by one level-k band.
inline HexMesh build_potential_mesh(const HexMesh& current, const CandidateBand& c) {
  const int cf = current.layouts.factor;
  const int nb = static_cast<int>(current.bands.size());
  if (c.first < 0 || c.first + cf > nb) throw MeshError("build_potential_mesh: band index out of range");
  for (int i = 0; i < cf; ++i)
    if (current.bands[c.first + i].level != c.level - 1)
      throw MeshError("build_potential_mesh: bands are not at level " + std::to_string(c.level - 1));
  const Band merged{current.bands[c.first].z0, current.bands[c.first + cf - 1].z1, c.level};
  if (!detail::band_fits_layout(current, merged.z0, merged.z1, c.level))
    throw MeshError("build_potential_mesh: band is not aligned with the level-" +
                    std::to_string(c.level) + " layout");
  MeshPlan plan = plan_of(current);
  plan.bands.erase(plan.bands.begin() + c.first, plan.bands.begin() + c.first + cf);
  plan.bands.insert(plan.bands.begin() + c.first, merged);
  plan.active_layers = std::max(plan.active_layers, merged.z1);
  HexMesh potential = build_mesh(plan);
  // keep the activity of everything outside the merged band
  for (auto& e : potential.elements) {
    if (e.level > 0) continue;
    const ElementId old = current.element_at_cell(e.x0, e.y0, e.z0);
    e.active = old >= 0 && current.elements[old].active;
  }
  classify_faces_in_place(potential);
  assign_homogenized(potential, c.first, compute_alpha(*potential.part));
  return potential;
}

/// Interpolation-error test: nodes of `current` in the merged band's closed
/// box that are not coarse corners are compared with the trilinear value
/// from the coarse element's corners. Accepts iff every relative error is
/// below epsilon.
inline CoarseningDecision check_layer(const HexMesh& current, const ThermalState& state,
                                      const HexMesh& potential, const CandidateBand& c, double epsilon,
                                      double t_floor) {
  const Band& band = potential.bands.at(static_cast<std::size_t>(c.first));
  CoarseningDecision d;
  d.band_lo = band.z0;
  d.band_hi = band.z1;
  d.level = band.level;
  d.accept = true;
  auto host = [&](int x, int y) -> ElementId {
    for (int i : {x, x - 1})
      for (int j : {y, y - 1}) {
        const ElementId e = potential.element_at_cell(i, j, band.z0);
        if (e < 0) continue;
        const Element& el = potential.elements[e];
        if (el.z0 == band.z0 && el.z1 == band.z1 && x >= el.x0 && x <= el.x1 && y >= el.y0 && y <= el.y1)
          return e;
      }
    return -1;
  };
  for (int z = band.z0; z <= band.z1; ++z) {
    for (int y = 0; y <= current.ny; ++y) {
      for (int x = 0; x <= current.nx; ++x) {
        const NodeId n = current.node_at(x, y, z);
        if (n < 0) continue;
        const ElementId e = host(x, y);
        if (e < 0) continue;
        const Element& el = potential.elements[e];
        if ((x == el.x0 || x == el.x1) && (y == el.y0 || y == el.y1) && (z == el.z0 || z == el.z1)) continue;
        std::array<double, 8> corners{};
        for (int a = 0; a < 8; ++a) {
          const Lattice& l = potential.nodes[el.nodes[a]];
          const NodeId cn = current.node_at(l.x, l.y, l.z);
          if (cn < 0) throw std::logic_error("check_layer: coarse corner missing from the current mesh");
          corners[a] = state.T[cn];
        }
        const double xi = -1.0 + 2.0 * (x - el.x0) / static_cast<double>(el.x1 - el.x0);
        const double eta = -1.0 + 2.0 * (y - el.y0) / static_cast<double>(el.y1 - el.y0);
        const double zeta = -1.0 + 2.0 * (z - el.z0) / static_cast<double>(el.z1 - el.z0);
        const double t = state.T[n];
        const double err = std::abs(t - interpolate_coarse(corners, xi, eta, zeta)) / std::max(std::abs(t), t_floor);
        if (d.worst_node < 0 || err > d.worst_error) {
          d.worst_error = err;
          d.worst_node = n;
        }
        if (!(err < epsilon)) d.accept = false;
      }
    }
  }
  return d;
}

/// Transfers a solution to a new mesh: nodes on a shared lattice point copy
/// their value, fresh nodes start at T_a (T_b on the bed), dependent nodes
/// are re-derived from their masters.
inline ThermalState map_solution(const HexMesh& old_mesh, const ThermalState& old_state,
                                 const HexMesh& new_mesh, const ProcessParameters& p) {
  ThermalState s;
  s.time = old_state.time;
  s.T.assign(new_mesh.node_count(), p.ambient_temperature);
  std::vector<std::uint8_t> touches_active(new_mesh.node_count(), 0);
  for (const auto& e : new_mesh.elements)
    if (e.active)
      for (NodeId n : e.nodes) touches_active[n] = 1;
  for (std::size_t n = 0; n < new_mesh.node_count(); ++n) {
    const Lattice& l = new_mesh.nodes[n];
    const NodeId o = old_mesh.node_at(l.x, l.y, l.z);
    if (o >= 0) {
      s.T[n] = old_state.T[o];
    } else if (touches_active[n]) {
      throw std::logic_error("map_solution: active node (" + std::to_string(l.x) + "," +
                             std::to_string(l.y) + "," + std::to_string(l.z) + ") has no predecessor");
    }
  }
  for (std::size_t n = 0; n < new_mesh.node_count(); ++n)
    if (new_mesh.nodes[n].z == 0 && !new_mesh.is_hanging(static_cast<NodeId>(n)))
      add_lock(s, static_cast<NodeId>(n), p.bed_temperature, true);
  enforce_constraints(new_mesh, s.T);
  return s;
}

/// Result of the end-of-step coarsening pass.
struct CoarseningPass {
  std::vector<CoarseningDecision> decisions;
  std::optional<HexMesh> mesh;  // set when at least one band was accepted
  ThermalState state;
  int accepted = 0;
};

/// Bottom-up checks on the solved state, stopping at the first rejection.
/// Accepted bands chain: each later check sees the previously coarsened mesh.
inline CoarseningPass coarsening_pass(const HexMesh& mesh, const ThermalState& state, int built,
                                      const CoarseningParameters& params, const ProcessParameters& process,
                                      int step_index) {
  CoarseningPass pass;
  pass.state = state;
  const HexMesh* current = &mesh;
  while (auto c = next_candidate(*current, built, params.max_levels)) {
    HexMesh potential = build_potential_mesh(*current, *c);
    auto d = check_layer(*current, pass.state, potential, *c, params.epsilon, params.denominator_floor);
    d.step = step_index;
    pass.decisions.push_back(d);
    if (!d.accept) break;
    pass.state = map_solution(*current, pass.state, potential, process);
    pass.mesh = std::move(potential);
    current = &*pass.mesh;
    ++pass.accepted;
  }
  return pass;
}

inline void write_decision_log(const std::vector<CoarseningDecision>& decisions, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "step,band_lo,band_hi,level,verdict,worst_err,worst_node\n";
  out.precision(17);
  for (const auto& d : decisions)
    out << d.step << ',' << d.band_lo << ',' << d.band_hi << ',' << d.level << ','
        << (d.accept ? "accept" : "reject") << ',' << d.worst_error << ',' << d.worst_node << '\n';
}

}  // namespace fffsim
