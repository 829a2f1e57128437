#pragma once

// Element activation: switch cells of a deposition event on, lock the nodes of
// fresh polymer to the deposition temperature for one step.

#include <stdexcept>
#include <string>
#include <vector>

#include "fffsim/femcore.hpp"
#include "fffsim/mesh.hpp"
#include "fffsim/toolpath.hpp"

namespace fffsim {

struct RemeshingStep {
  int index = 0;
  int layer_begin = 0;  // first layer of the mesh's quiet top
  int layer_end = 0;    // one past the last quiet layer (= mesh height)
  int event_begin = 0;
  int event_end = 0;

  int quiet_layers() const { return layer_end - layer_begin; }
};

/// Remeshing steps that add `per_step` quiet layers at a time.
inline std::vector<RemeshingStep> plan_remeshing(const DepositionSchedule& s, int per_step) {
  if (per_step < 1) throw std::invalid_argument("plan_remeshing: at least one layer per step");
  std::vector<RemeshingStep> out;
  for (int l = 0; l < s.layers(); l += per_step) {
    RemeshingStep r;
    r.index = static_cast<int>(out.size());
    r.layer_begin = l;
    r.layer_end = std::min(s.layers(), l + per_step);
    r.event_begin = s.layer_begin[static_cast<std::size_t>(r.layer_begin)];
    r.event_end = s.layer_begin[static_cast<std::size_t>(r.layer_end)];
    out.push_back(r);
  }
  return out;
}

namespace detail {

inline ElementId fine_element(const HexMesh& m, const CellId& c) {
  const ElementId e = m.element_at_cell(c.i, c.j, c.k);
  if (e < 0 || m.elements[e].level != 0)
    throw std::logic_error("activate: cell (" + std::to_string(c.i) + "," + std::to_string(c.j) + "," +
                           std::to_string(c.k) + ") is not a fine element of this mesh");
  if (m.elements[e].active)
    throw std::logic_error("activate: double activation of cell (" + std::to_string(c.i) + "," +
                           std::to_string(c.j) + "," + std::to_string(c.k) + ")");
  return e;
}

inline std::vector<ElementId> event_elements(const HexMesh& m, const DepositionEvent& ev) {
  std::vector<ElementId> ids;
  for (const auto& c : ev.polymer) ids.push_back(fine_element(m, c));
  for (const auto& c : ev.air) ids.push_back(fine_element(m, c));
  return ids;
}

// Polymer nodes get the deposition temperature; bed locks win, dependent
// nodes follow their masters and are never locked.
inline void lock_polymer_nodes(const HexMesh& m, ThermalState& s, const DepositionEvent& ev, double t_act) {
  for (const auto& c : ev.polymer) {
    const ElementId e = m.element_at_cell(c.i, c.j, c.k);
    for (NodeId n : m.elements[e].nodes)
      if (!m.is_hanging(n)) add_lock(s, n, t_act, false);
  }
}

}  // namespace detail

/// Reference activation on a bare mesh: flags, locks and a full face refresh.
inline void activate(HexMesh& m, ThermalState& s, const DepositionEvent& ev, double t_act) {
  const auto ids = detail::event_elements(m, ev);
  for (ElementId e : ids) m.elements[e].active = true;
  detail::lock_polymer_nodes(m, s, ev, t_act);
  classify_faces_in_place(m);
}

/// Activation through the incremental engine, which keeps its own faces.
inline void activate(ThermalEngine& engine, ThermalState& s, const DepositionEvent& ev, double t_act) {
  const auto ids = detail::event_elements(engine.mesh(), ev);
  engine.activate(ids);
  detail::lock_polymer_nodes(engine.mesh(), s, ev, t_act);
}

}  // namespace fffsim
