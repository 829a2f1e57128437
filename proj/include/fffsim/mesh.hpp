#pragma once

// Structured multilevel hexahedral mesh. The part is stacked from horizontal
// bands; a band at level k holds elements of factor^k fine layers whose
// in-plane extents follow the level-k axis layouts. Nodes live on the integer
// lattice of fine-element multiples, so deduplication is exact. Fine nodes on
// a coarser neighbour's face are tied to its corners by bilinear constraints.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fffsim/config.hpp"
#include "fffsim/element.hpp"
#include "fffsim/layout.hpp"
#include "fffsim/toolpath.hpp"

namespace fffsim {

using NodeId = int;
using ElementId = int;

struct Band {
  int z0 = 0;  // first fine layer
  int z1 = 0;  // one past the last fine layer
  int level = 0;

  int thickness() const { return z1 - z0; }
  bool operator==(const Band&) const = default;
};

struct Lattice {
  int x = 0, y = 0, z = 0;
  bool operator==(const Lattice&) const = default;
};

enum class ElementMaterial : std::uint8_t { polymer, air, effective };

struct Element {
  std::array<NodeId, 8> nodes{};
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0;  // lattice box
  int level = 0;
  ElementMaterial material = ElementMaterial::polymer;
  bool active = false;
};

/// Dependent node value = sum of weights * master values.
struct ConstraintEquation {
  NodeId dependent = -1;
  int count = 0;
  std::array<NodeId, 4> masters{};
  std::array<double, 4> weights{};
};

/// Active element properties plus the factor applied to quiet elements.
struct MaterialTable {
  Material polymer = pla();
  Material air_medium = air();
  Material effective = pla();
  double quiet_scale = 1e-9;

  const Material& base(ElementMaterial m) const {
    switch (m) {
      case ElementMaterial::polymer: return polymer;
      case ElementMaterial::air: return air_medium;
      case ElementMaterial::effective: return effective;
    }
    return polymer;
  }
  /// Conductivity and volumetric capacity as used in assembly.
  double conductivity(const Element& e) const {
    return base(e.material).conductivity * (e.active ? 1.0 : quiet_scale);
  }
  double capacity(const Element& e) const {
    return base(e.material).volumetric_capacity() * (e.active ? 1.0 : quiet_scale);
  }
};

/// Per-axis layouts for every level up to the configured maximum.
struct LayoutSet {
  int factor = 2;
  std::vector<LevelLayout> x;
  std::vector<LevelLayout> y;

  static LayoutSet make(int nx, int ny, int factor, int max_levels) {
    return {factor, compute_level_layout(nx, factor, max_levels),
            compute_level_layout(ny, factor, max_levels)};
  }
  int max_level() const { return static_cast<int>(x.size()) - 1; }
};

enum class FaceKind : std::uint8_t { bed, permanent, temporary, interior };

/// Boundary patch on one element face. The patch covers lattice range
/// [a0,a1) x [b0,b1) of the face's two tangential axes (in x,y,z order).
struct FacePatch {
  ElementId element = -1;
  int face = 0;
  int a0 = 0, a1 = 0, b0 = 0, b1 = 0;
  FaceKind kind = FaceKind::interior;

  bool operator==(const FacePatch&) const = default;
};

struct FaceSets {
  std::vector<FacePatch> bed;
  std::vector<FacePatch> permanent;
  std::vector<FacePatch> temporary;
};

class HexMesh {
 public:
  std::shared_ptr<const PartGeometry> part;
  LayoutSet layouts;
  MaterialTable materials;
  std::vector<Band> bands;
  int nx = 0, ny = 0, nz = 0;  // lattice cell extents covered by the mesh
  int active_layers = 0;       // bottom layers built before this mesh was created
  double dx = 0, dy = 0, dz = 0;

  std::vector<Lattice> nodes;
  std::vector<Element> elements;
  std::vector<ConstraintEquation> constraints;
  std::vector<int> node_constraint;  // constraint index per node, -1 if free
  FaceSets faces;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return elements.size(); }
  std::size_t hanging_count() const { return constraints.size(); }
  bool is_hanging(NodeId n) const { return node_constraint[n] >= 0; }

  Point3 position(NodeId n) const {
    const auto& l = nodes[n];
    return {l.x * dx, l.y * dy, l.z * dz};
  }

  BoxDims dims(const Element& e) const {
    return {(e.x1 - e.x0) * dx, (e.y1 - e.y0) * dy, (e.z1 - e.z0) * dz};
  }
  BoxDims dims(ElementId e) const { return dims(elements[e]); }

  double volume(ElementId e) const { return dims(e).volume(); }
  double total_volume() const {
    double v = 0.0;
    for (std::size_t e = 0; e < elements.size(); ++e) v += volume(static_cast<ElementId>(e));
    return v;
  }

  ElementId element_at_cell(int i, int j, int k) const {
    if (i < 0 || i >= nx || j < 0 || j >= ny || k < 0 || k >= nz) return -1;
    return cell_element_[cell_index(i, j, k)];
  }

  NodeId node_at(int x, int y, int z) const {
    if (x < 0 || x > nx || y < 0 || y > ny || z < 0 || z > nz) return -1;
    return lattice_node_[lattice_index(x, y, z)];
  }

  int band_of_layer(int k) const {
    for (std::size_t b = 0; b < bands.size(); ++b)
      if (k >= bands[b].z0 && k < bands[b].z1) return static_cast<int>(b);
    return -1;
  }

  /// Element containing a physical point (half-open cells, clamped at the
  /// upper part boundary), or -1.
  ElementId locate(const Point3& p) const {
    auto cell = [](double v, double h, int n) {
      int c = static_cast<int>(std::floor(v / h + 1e-9));
      if (c == n && std::abs(v - n * h) <= 1e-9 * h * n) c = n - 1;
      return c;
    };
    return element_at_cell(cell(p.x, dx, nx), cell(p.y, dy, ny), cell(p.z, dz, nz));
  }

  /// Parametric coordinates of a point inside element `e`.
  std::array<double, 3> local_coordinates(ElementId e, const Point3& p) const {
    const auto& el = elements[e];
    return {2.0 * (p.x / dx - el.x0) / (el.x1 - el.x0) - 1.0,
            2.0 * (p.y / dy - el.y0) / (el.y1 - el.y0) - 1.0,
            2.0 * (p.z / dz - el.z0) / (el.z1 - el.z0) - 1.0};
  }

  std::size_t active_element_count() const {
    return static_cast<std::size_t>(
        std::count_if(elements.begin(), elements.end(), [](const Element& e) { return e.active; }));
  }

  // Builder access.
  void reset_lookup() {
    cell_element_.assign(static_cast<std::size_t>(nx) * ny * nz, -1);
    lattice_node_.assign(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1), -1);
  }
  void set_cell_element(int i, int j, int k, ElementId e) { cell_element_[cell_index(i, j, k)] = e; }
  void set_lattice_node(int x, int y, int z, NodeId n) { lattice_node_[lattice_index(x, y, z)] = n; }

 private:
  std::size_t cell_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  std::size_t lattice_index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * (ny + 1) + y) * (nx + 1) + x;
  }

  std::vector<ElementId> cell_element_;
  std::vector<NodeId> lattice_node_;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to build one mesh: the part, the band stack covering
/// layers [0, top), and how many bottom layers are already deposited.
struct MeshPlan {
  std::shared_ptr<const PartGeometry> part;
  LayoutSet layouts;
  std::vector<Band> bands;
  int active_layers = 0;
  MaterialTable materials;
};

namespace detail {

inline int segment_containing(const std::vector<int>& bounds, int x) {
  auto it = std::upper_bound(bounds.begin(), bounds.end(), x);
  int s = static_cast<int>(it - bounds.begin()) - 1;
  return std::clamp(s, 0, static_cast<int>(bounds.size()) - 2);
}

inline bool is_boundary(const std::vector<int>& bounds, int x) {
  return std::binary_search(bounds.begin(), bounds.end(), x);
}

inline void check_bands(const MeshPlan& plan) {
  if (plan.bands.empty()) throw MeshError("build_mesh: no bands");
  int z = 0;
  for (const auto& b : plan.bands) {
    if (b.z0 != z) throw MeshError("build_mesh: bands leave a gap or overlap at layer " + std::to_string(z));
    if (b.z1 <= b.z0) throw MeshError("build_mesh: empty band");
    if (b.level < 0 || b.level > plan.layouts.max_level())
      throw MeshError("build_mesh: band level out of range");
    if (b.thickness() != int_pow(plan.layouts.factor, b.level))
      throw MeshError("build_mesh: band thickness does not match its level");
    if (b.level > 0 && b.z1 > plan.active_layers)
      throw MeshError("build_mesh: coarse band above the deposited layers");
    z = b.z1;
  }
  if (z > plan.part->nz()) throw MeshError("build_mesh: bands exceed the part height");
}

}  // namespace detail

/// Bilinear constraints for fine nodes lying on faces of the coarser band at
/// each horizontal band interface.
inline void build_constraints(HexMesh& m) {
  m.constraints.clear();
  m.node_constraint.assign(m.nodes.size(), -1);
  for (std::size_t b = 0; b + 1 < m.bands.size(); ++b) {
    const Band& lo = m.bands[b];
    const Band& hi = m.bands[b + 1];
    if (lo.level == hi.level) continue;
    const Band& coarse = lo.level > hi.level ? lo : hi;
    const int z = lo.z1;
    const auto bx = m.layouts.x[coarse.level].boundaries();
    const auto by = m.layouts.y[coarse.level].boundaries();
    for (int y = 0; y <= m.ny; ++y) {
      for (int x = 0; x <= m.nx; ++x) {
        const NodeId n = m.node_at(x, y, z);
        if (n < 0) continue;
        const bool ax = detail::is_boundary(bx, x);
        const bool ay = detail::is_boundary(by, y);
        if (ax && ay) continue;
        // candidate coarse cells whose closed face contains (x, y)
        std::vector<int> sxs{detail::segment_containing(bx, x)};
        if (ax && sxs[0] > 0 && bx[sxs[0]] == x) sxs.push_back(sxs[0] - 1);
        std::vector<int> sys{detail::segment_containing(by, y)};
        if (ay && sys[0] > 0 && by[sys[0]] == y) sys.push_back(sys[0] - 1);
        ElementId host = -1;
        for (int sx : sxs) {
          for (int sy : sys) {
            ElementId e = m.element_at_cell(bx[sx], by[sy], coarse.z0);
            if (e >= 0 && m.elements[e].level == coarse.level) {
              host = e;
              break;
            }
          }
          if (host >= 0) break;
        }
        if (host < 0) continue;
        const Element& he = m.elements[host];
        const double u = static_cast<double>(x - he.x0) / (he.x1 - he.x0);
        const double v = static_cast<double>(y - he.y0) / (he.y1 - he.y0);
        const std::array<std::pair<int, int>, 4> corners{
            {{he.x0, he.y0}, {he.x1, he.y0}, {he.x1, he.y1}, {he.x0, he.y1}}};
        const std::array<double, 4> w{(1 - u) * (1 - v), u * (1 - v), u * v, (1 - u) * v};
        ConstraintEquation ce;
        ce.dependent = n;
        for (int c = 0; c < 4; ++c) {
          if (w[c] == 0.0) continue;
          const NodeId master = m.node_at(corners[c].first, corners[c].second, z);
          if (master < 0) throw MeshError("build_constraints: missing master node");
          ce.masters[ce.count] = master;
          ce.weights[ce.count] = w[c];
          ++ce.count;
        }
        m.node_constraint[n] = static_cast<int>(m.constraints.size());
        m.constraints.push_back(ce);
      }
    }
  }
}

namespace detail {

inline FaceKind neighbour_status(const HexMesh& m, int i, int j, int k) {
  if (k < 0) return FaceKind::bed;
  if (!m.part->in_part(i, j, k)) return FaceKind::permanent;
  const ElementId e = m.element_at_cell(i, j, k);
  if (e >= 0 && m.elements[e].active) return FaceKind::interior;
  return FaceKind::temporary;
}

}  // namespace detail

/// Boundary patches of one element face, merged into a single patch when the
/// whole face shares one neighbour status; interior parts are omitted.
inline void face_patches(const HexMesh& m, ElementId id, int face, std::vector<FacePatch>& out) {
  const Element& e = m.elements[id];
  const int axis = face_axis(face);
  const int lo[3] = {e.x0, e.y0, e.z0};
  const int hi[3] = {e.x1, e.y1, e.z1};
  const int ua = axis == 0 ? 1 : 0;
  const int va = axis == 2 ? 1 : 2;
  const int across = face_side(face) < 0 ? lo[axis] - 1 : hi[axis];

  const int nu = hi[ua] - lo[ua];
  const int nv = hi[va] - lo[va];
  std::vector<FaceKind> kinds;
  kinds.reserve(static_cast<std::size_t>(nu) * nv);
  bool uniform = true;
  for (int b = lo[va]; b < hi[va]; ++b) {
    for (int a = lo[ua]; a < hi[ua]; ++a) {
      int c[3];
      c[axis] = across;
      c[ua] = a;
      c[va] = b;
      kinds.push_back(detail::neighbour_status(m, c[0], c[1], c[2]));
      if (kinds.back() != kinds.front()) uniform = false;
    }
  }
  if (uniform) {
    if (kinds.front() != FaceKind::interior)
      out.push_back({id, face, lo[ua], hi[ua], lo[va], hi[va], kinds.front()});
    return;
  }
  std::size_t n = 0;
  for (int b = lo[va]; b < hi[va]; ++b)
    for (int a = lo[ua]; a < hi[ua]; ++a, ++n)
      if (kinds[n] != FaceKind::interior) out.push_back({id, face, a, a + 1, b, b + 1, kinds[n]});
}

inline std::vector<FacePatch> element_boundary(const HexMesh& m, ElementId id) {
  std::vector<FacePatch> out;
  if (!m.elements[id].active) return out;
  for (int f = 0; f < 6; ++f) face_patches(m, id, f, out);
  return out;
}

/// Bed, permanent free and temporary free faces of the active elements.
inline FaceSets classify_faces(const HexMesh& m) {
  FaceSets sets;
  std::vector<FacePatch> patches;
  for (std::size_t e = 0; e < m.elements.size(); ++e) {
    patches.clear();
    if (!m.elements[e].active) continue;
    for (int f = 0; f < 6; ++f) face_patches(m, static_cast<ElementId>(e), f, patches);
    for (const auto& p : patches) {
      switch (p.kind) {
        case FaceKind::bed: sets.bed.push_back(p); break;
        case FaceKind::permanent: sets.permanent.push_back(p); break;
        case FaceKind::temporary: sets.temporary.push_back(p); break;
        case FaceKind::interior: break;
      }
    }
  }
  return sets;
}

inline void classify_faces_in_place(HexMesh& m) { m.faces = classify_faces(m); }

/// Builds the mesh for a band stack. Fine bands take per-cell materials from
/// the part; coarse bands get one effective-medium element per layout cell.
inline HexMesh build_mesh(const MeshPlan& plan) {
  if (!plan.part) throw MeshError("build_mesh: no part geometry");
  detail::check_bands(plan);
  const PartGeometry& g = *plan.part;

  HexMesh m;
  m.part = plan.part;
  m.layouts = plan.layouts;
  m.materials = plan.materials;
  m.bands = plan.bands;
  m.nx = g.nx();
  m.ny = g.ny();
  m.nz = plan.bands.back().z1;
  m.active_layers = plan.active_layers;
  m.dx = g.dx();
  m.dy = g.dy();
  m.dz = g.dz();
  m.reset_lookup();
  if (m.layouts.x.empty() || m.layouts.x.front().total() != m.nx ||
      m.layouts.y.front().total() != m.ny)
    throw MeshError("build_mesh: layouts do not match the part extents");

  for (const Band& band : plan.bands) {
    if (band.level == 0) {
      const int k = band.z0;
      for (int j = 0; j < m.ny; ++j) {
        for (int i = 0; i < m.nx; ++i) {
          const CellMaterial cm = g.at(i, j, k);
          if (cm == CellMaterial::empty) continue;
          Element e;
          e.x0 = i, e.x1 = i + 1, e.y0 = j, e.y1 = j + 1, e.z0 = k, e.z1 = k + 1;
          e.level = 0;
          e.material = cm == CellMaterial::air ? ElementMaterial::air : ElementMaterial::polymer;
          e.active = k < plan.active_layers;
          m.set_cell_element(i, j, k, static_cast<ElementId>(m.elements.size()));
          m.elements.push_back(e);
        }
      }
      continue;
    }
    const auto bx = m.layouts.x[band.level].boundaries();
    const auto by = m.layouts.y[band.level].boundaries();
    for (std::size_t sy = 0; sy + 1 < by.size(); ++sy) {
      for (std::size_t sx = 0; sx + 1 < bx.size(); ++sx) {
        int covered = 0, cells = 0;
        for (int k = band.z0; k < band.z1; ++k)
          for (int j = by[sy]; j < by[sy + 1]; ++j)
            for (int i = bx[sx]; i < bx[sx + 1]; ++i, ++cells)
              if (g.in_part(i, j, k)) ++covered;
        if (covered == 0) continue;
        if (covered != cells)
          throw MeshError("build_mesh: footprint of band [" + std::to_string(band.z0) + "," +
                          std::to_string(band.z1) + ") is not aligned with the level-" +
                          std::to_string(band.level) + " layout");
        Element e;
        e.x0 = bx[sx], e.x1 = bx[sx + 1], e.y0 = by[sy], e.y1 = by[sy + 1];
        e.z0 = band.z0, e.z1 = band.z1;
        e.level = band.level;
        e.material = ElementMaterial::effective;
        e.active = true;
        const auto id = static_cast<ElementId>(m.elements.size());
        for (int k = e.z0; k < e.z1; ++k)
          for (int j = e.y0; j < e.y1; ++j)
            for (int i = e.x0; i < e.x1; ++i) m.set_cell_element(i, j, k, id);
        m.elements.push_back(e);
      }
    }
  }

  // Mark used lattice points, then number them in (z, y, x) order.
  for (const auto& e : m.elements)
    for (int a = 0; a < 8; ++a) {
      const auto& s = kCornerSigns[a];
      m.set_lattice_node(s[0] < 0 ? e.x0 : e.x1, s[1] < 0 ? e.y0 : e.y1, s[2] < 0 ? e.z0 : e.z1, 0);
    }
  for (int z = 0; z <= m.nz; ++z)
    for (int y = 0; y <= m.ny; ++y)
      for (int x = 0; x <= m.nx; ++x)
        if (m.node_at(x, y, z) == 0) {
          m.set_lattice_node(x, y, z, static_cast<NodeId>(m.nodes.size()) + 1);
          m.nodes.push_back({x, y, z});
        }
  for (int z = 0; z <= m.nz; ++z)
    for (int y = 0; y <= m.ny; ++y)
      for (int x = 0; x <= m.nx; ++x) {
        const NodeId n = m.node_at(x, y, z);
        m.set_lattice_node(x, y, z, n > 0 ? n - 1 : -1);
      }
  for (auto& e : m.elements)
    for (int a = 0; a < 8; ++a) {
      const auto& s = kCornerSigns[a];
      e.nodes[a] = m.node_at(s[0] < 0 ? e.x0 : e.x1, s[1] < 0 ? e.y0 : e.y1, s[2] < 0 ? e.z0 : e.z1);
    }

  build_constraints(m);
  classify_faces_in_place(m);
  return m;
}

inline MeshPlan plan_of(const HexMesh& m) {
  return {m.part, m.layouts, m.bands, m.active_layers, m.materials};
}

/// Plain-text summary: node/element/constraint counts per level.
inline std::string mesh_report(const HexMesh& m) {
  std::map<int, std::size_t> elements, constraints;
  std::map<int, std::size_t> bands;
  for (const auto& e : m.elements) ++elements[e.level];
  for (const auto& b : m.bands) ++bands[b.level];
  for (const auto& c : m.constraints) {
    const int z = m.nodes[c.dependent].z;
    int level = 0;
    for (const auto& b : m.bands)
      if (b.z0 == z || b.z1 == z) level = std::max(level, b.level);
    ++constraints[level];
  }
  std::ostringstream os;
  os << "nodes " << m.node_count() << " elements " << m.element_count() << " hanging "
     << m.hanging_count() << " layers " << m.nz << "\n";
  for (const auto& [level, count] : elements) {
    os << "level " << level << ": bands " << bands[level] << " elements " << count
       << " constraints " << constraints[level] << "\n";
  }
  return os.str();
}

}  // namespace fffsim
