#pragma once

// Trilinear 8-node hexahedron on axis-aligned boxes: shape functions,
// conduction and capacitance matrices (2x2x2 Gauss), and face convection.
//
// Local node order: bottom face (z-) counterclockwise from (x-,y-), then the
// top face in the same order.

#include <array>
#include <cmath>
#include <stdexcept>

namespace fffsim {

using Matrix8 = std::array<std::array<double, 8>, 8>;
using Matrix4 = std::array<std::array<double, 4>, 4>;

struct BoxDims {
  double lx = 0.0;
  double ly = 0.0;
  double lz = 0.0;

  double volume() const { return lx * ly * lz; }
  bool operator==(const BoxDims&) const = default;
};

inline constexpr std::array<std::array<int, 3>, 8> kCornerSigns{{{-1, -1, -1},
                                                                 {1, -1, -1},
                                                                 {1, 1, -1},
                                                                 {-1, 1, -1},
                                                                 {-1, -1, 1},
                                                                 {1, -1, 1},
                                                                 {1, 1, 1},
                                                                 {-1, 1, 1}}};

/// Faces: 0 x-, 1 x+, 2 y-, 3 y+, 4 z- (bottom), 5 z+ (top).
enum Face : int { x_minus = 0, x_plus, y_minus, y_plus, z_minus, z_plus };

inline constexpr int face_axis(int face) { return face / 2; }
inline constexpr int face_side(int face) { return face % 2 == 0 ? -1 : 1; }

/// Local node ids on each face.
inline constexpr std::array<std::array<int, 4>, 6> kFaceNodes{{{0, 3, 7, 4},
                                                               {1, 2, 6, 5},
                                                               {0, 1, 5, 4},
                                                               {3, 2, 6, 7},
                                                               {0, 1, 2, 3},
                                                               {4, 5, 6, 7}}};

inline double shape(int a, double xi, double eta, double zeta) {
  const auto& s = kCornerSigns[a];
  return 0.125 * (1.0 + s[0] * xi) * (1.0 + s[1] * eta) * (1.0 + s[2] * zeta);
}

inline std::array<double, 8> shape_values(double xi, double eta, double zeta) {
  std::array<double, 8> n{};
  for (int a = 0; a < 8; ++a) n[a] = shape(a, xi, eta, zeta);
  return n;
}

/// Physical gradients of all shape functions at a parametric point.
inline std::array<std::array<double, 3>, 8> shape_gradients(const BoxDims& d, double xi,
                                                            double eta, double zeta) {
  std::array<std::array<double, 3>, 8> g{};
  for (int a = 0; a < 8; ++a) {
    const auto& s = kCornerSigns[a];
    g[a][0] = 0.125 * s[0] * (1.0 + s[1] * eta) * (1.0 + s[2] * zeta) * (2.0 / d.lx);
    g[a][1] = 0.125 * s[1] * (1.0 + s[0] * xi) * (1.0 + s[2] * zeta) * (2.0 / d.ly);
    g[a][2] = 0.125 * s[2] * (1.0 + s[0] * xi) * (1.0 + s[1] * eta) * (2.0 / d.lz);
  }
  return g;
}

/// Trilinear interpolation of corner values at local coordinates in [-1,1]^3.
inline double interpolate_coarse(const std::array<double, 8>& corner_values, double xi,
                                 double eta, double zeta) {
  double t = 0.0;
  for (int a = 0; a < 8; ++a) t += shape(a, xi, eta, zeta) * corner_values[a];
  return t;
}

namespace detail {

inline constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

inline void require_box(const BoxDims& d) {
  if (!(d.lx > 0.0) || !(d.ly > 0.0) || !(d.lz > 0.0))
    throw std::invalid_argument("degenerate hexahedron: non-positive edge length");
}

}  // namespace detail

/// Conduction matrix of a box element with isotropic conductivity.
inline Matrix8 element_conductance(const BoxDims& d, double conductivity) {
  detail::require_box(d);
  if (!(conductivity > 0.0)) throw std::invalid_argument("element_conductance: conductivity <= 0");
  Matrix8 k{};
  const double det_j = d.volume() / 8.0;
  for (int gp = 0; gp < 8; ++gp) {
    const auto& s = kCornerSigns[gp];
    auto g = shape_gradients(d, s[0] * detail::kGauss, s[1] * detail::kGauss, s[2] * detail::kGauss);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        k[a][b] += conductivity * det_j * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
  }
  return k;
}

/// Consistent (or row-sum lumped) capacitance matrix; entries sum to rho*cp*V.
inline Matrix8 element_capacitance(const BoxDims& d, double density, double specific_heat,
                                   bool lumped = false) {
  detail::require_box(d);
  if (!(density > 0.0) || !(specific_heat > 0.0))
    throw std::invalid_argument("element_capacitance: non-positive density or specific heat");
  Matrix8 c{};
  const double det_j = d.volume() / 8.0;
  const double rc = density * specific_heat;
  for (int gp = 0; gp < 8; ++gp) {
    const auto& s = kCornerSigns[gp];
    auto n = shape_values(s[0] * detail::kGauss, s[1] * detail::kGauss, s[2] * detail::kGauss);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) c[a][b] += rc * det_j * n[a] * n[b];
  }
  if (lumped) {
    for (int a = 0; a < 8; ++a) {
      double row = 0.0;
      for (int b = 0; b < 8; ++b) {
        row += c[a][b];
        c[a][b] = 0.0;
      }
      c[a][a] = row;
    }
  }
  return c;
}

/// Convection on (part of) a box face: surface matrix H over the face's four
/// nodes and the load h*T_ref*int(N). `u`/`v` bound the covered sub-rectangle
/// in the face's parametric coordinates (the two non-normal axes in x,y,z
/// order), each within [-1,1].
struct FaceConvection {
  std::array<int, 4> nodes{};
  Matrix4 matrix{};
  std::array<double, 4> load{};
};

inline FaceConvection face_convection(const BoxDims& d, int face, double h, double t_ref,
                                      std::array<double, 2> u = {-1.0, 1.0},
                                      std::array<double, 2> v = {-1.0, 1.0}) {
  detail::require_box(d);
  if (!(h >= 0.0)) throw std::invalid_argument("face_convection: negative film coefficient");
  FaceConvection out;
  out.nodes = kFaceNodes[face];
  const int axis = face_axis(face);
  const int ua = axis == 0 ? 1 : 0;
  const int va = axis == 2 ? 1 : 2;
  const double len[3] = {d.lx, d.ly, d.lz};
  const double area_jac = (len[ua] / 2.0) * (len[va] / 2.0);
  const double hu = 0.5 * (u[1] - u[0]), cu = 0.5 * (u[1] + u[0]);
  const double hv = 0.5 * (v[1] - v[0]), cv = 0.5 * (v[1] + v[0]);
  for (int gu = -1; gu <= 1; gu += 2) {
    for (int gv = -1; gv <= 1; gv += 2) {
      double p[3];
      p[axis] = face_side(face);
      p[ua] = cu + hu * gu * detail::kGauss;
      p[va] = cv + hv * gv * detail::kGauss;
      const double w = area_jac * hu * hv;
      std::array<double, 4> n{};
      for (int a = 0; a < 4; ++a) n[a] = shape(out.nodes[a], p[0], p[1], p[2]);
      for (int a = 0; a < 4; ++a) {
        out.load[a] += h * t_ref * n[a] * w;
        for (int b = 0; b < 4; ++b) out.matrix[a][b] += h * n[a] * n[b] * w;
      }
    }
  }
  return out;
}

}  // namespace fffsim
