#pragma once

// Rule-of-mixtures properties for coarse elements over sparse infill.

#include <stdexcept>

#include "fffsim/config.hpp"
#include "fffsim/mesh.hpp"
#include "fffsim/toolpath.hpp"

namespace fffsim {

inline double volumetric_capacity(double density, double specific_heat) {
  if (!(density > 0.0) || !(specific_heat > 0.0))
    throw std::invalid_argument("volumetric_capacity: non-positive input");
  return density * specific_heat;
}

inline double compute_alpha(double v_polymer, double v_air) {
  if (v_polymer < 0.0 || v_air < 0.0) throw std::invalid_argument("compute_alpha: negative volume");
  if (!(v_polymer + v_air > 0.0)) throw std::invalid_argument("compute_alpha: both volumes zero");
  return v_polymer / (v_air + v_polymer);
}

/// As-built polymer fraction of the whole part, perimeters included.
inline double compute_alpha(const PartGeometry& g) {
  const double cell = g.dx() * g.dy() * g.dz();
  return compute_alpha(static_cast<double>(g.count(CellMaterial::polymer)) * cell,
                       static_cast<double>(g.count(CellMaterial::air)) * cell);
}

struct EffectiveMedium {
  double alpha = 1.0;
  double conductivity = 0.0;          // W/(m K)
  double volumetric_capacity = 0.0;   // J/(m^3 K)
};

inline EffectiveMedium effective_medium(double alpha, const Material& air_medium,
                                        const Material& polymer) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("effective_medium: alpha outside [0,1]");
  return {alpha, (1.0 - alpha) * air_medium.conductivity + alpha * polymer.conductivity,
          (1.0 - alpha) * air_medium.volumetric_capacity() + alpha * polymer.volumetric_capacity()};
}

/// Effective material with unit density, so specific_heat carries C_eff.
/// The endpoints return the pure materials unchanged.
inline Material effective_material(double alpha, const Material& air_medium, const Material& polymer) {
  if (alpha == 1.0) return polymer;
  if (alpha == 0.0) return air_medium;
  const auto m = effective_medium(alpha, air_medium, polymer);
  return {1.0, m.volumetric_capacity, m.conductivity};
}

/// Gives every coarse element of band `b` the part-level effective medium.
inline void assign_homogenized(HexMesh& mesh, int b, double alpha) {
  const Band& band = mesh.bands.at(static_cast<std::size_t>(b));
  mesh.materials.effective = effective_material(alpha, mesh.materials.air_medium, mesh.materials.polymer);
  if (band.level == 0) return;
  for (auto& e : mesh.elements)
    if (e.z0 == band.z0 && e.z1 == band.z1) e.material = ElementMaterial::effective;
}

}  // namespace fffsim
