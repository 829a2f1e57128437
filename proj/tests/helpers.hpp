#pragma once

// Small fixtures shared by the unit tests.

#include <memory>
#include <vector>

#include "fffsim/mesh.hpp"
#include "fffsim/toolpath.hpp"

namespace fffsim::testing {

inline std::shared_ptr<const PartGeometry> dense_part(int nx, int ny, int nz, double dx = 0.5e-3,
                                                      double dy = 0.5e-3, double dz = 0.2e-3) {
  auto g = std::make_shared<PartGeometry>(nx, ny, nz, dx, dy, dz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) g->set(i, j, k, CellMaterial::polymer);
  return g;
}

/// Band stack from a list of levels, bottom up.
inline std::vector<Band> stack(const std::vector<int>& levels, int factor = 2) {
  std::vector<Band> out;
  int z = 0;
  for (int l : levels) {
    const int t = int_pow(factor, l);
    out.push_back({z, z + t, l});
    z += t;
  }
  return out;
}

inline HexMesh make_mesh(std::shared_ptr<const PartGeometry> part, const std::vector<int>& levels,
                         int active_layers, int max_levels = 3, int factor = 2) {
  MeshPlan plan{part, LayoutSet::make(part->nx(), part->ny(), factor, max_levels), stack(levels, factor),
                active_layers, {}};
  return build_mesh(plan);
}

}  // namespace fffsim::testing
