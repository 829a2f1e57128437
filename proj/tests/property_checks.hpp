#pragma once

// Randomized invariants over small meshes, shared by the unit tests and the
// acceptance run. Each check returns an empty string on success and a
// description of the first violation otherwise.

#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fffsim/activation.hpp"
#include "fffsim/coarsen.hpp"
#include "fffsim/femcore.hpp"

namespace fffsim::testing {

struct RandomMesh {
  std::shared_ptr<const PartGeometry> part;
  HexMesh mesh;
};

/// Part with random extents and optional air cells, and a random valid band
/// stack under a random number of deposited layers.
inline RandomMesh random_mesh(std::mt19937& rng) {
  std::uniform_int_distribution<int> ext(1, 6), height(2, 9), coin(0, 1);
  const int nx = ext(rng), ny = ext(rng), nz = height(rng);
  auto g = std::make_shared<PartGeometry>(nx, ny, nz, 0.5e-3, 0.5e-3, 0.2e-3);
  const bool sparse = coin(rng) == 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        g->set(i, j, k, sparse && ((k % 2 ? i : j) % 2 == 1) ? CellMaterial::air : CellMaterial::polymer);
  const int active = std::uniform_int_distribution<int>(1, nz)(rng);
  std::vector<Band> bands;
  int z = 0;
  while (z < nz) {
    std::vector<int> ok{0};
    for (int l = 1; l <= 3; ++l)
      if (z + (1 << l) <= active) ok.push_back(l);
    const int l = ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    bands.push_back({z, z + (1 << l), l});
    z += 1 << l;
  }
  MeshPlan plan{g, LayoutSet::make(nx, ny, 2, 3), bands, active, {}};
  return {g, build_mesh(plan)};
}

namespace detail {

template <class... Args>
std::string describe(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

inline std::string check_conductance_rows(int cases, unsigned seed = 11) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> len(1e-5, 1e-2), k(1e-3, 10.0);
  for (int c = 0; c < cases; ++c) {
    const BoxDims d{len(rng), len(rng), len(rng)};
    const auto ke = element_conductance(d, k(rng));
    for (int a = 0; a < 8; ++a) {
      double row = 0.0;
      for (int b = 0; b < 8; ++b) row += ke[a][b];
      if (!(std::abs(row) <= 1e-12 * ke[a][a])) return detail::describe("case ", c, ": row ", a, " sums to ", row);
    }
  }
  return {};
}

inline std::string check_capacitance_totals(int cases, unsigned seed = 12) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> len(1e-5, 1e-2), rho(0.5, 5000.0), cp(100.0, 4000.0);
  for (int c = 0; c < cases; ++c) {
    const BoxDims d{len(rng), len(rng), len(rng)};
    const double r = rho(rng), s = cp(rng);
    const double expect = r * s * d.volume();
    for (bool lumped : {false, true}) {
      const auto ce = element_capacitance(d, r, s, lumped);
      double sum = 0.0;
      for (const auto& row : ce)
        for (double v : row) sum += v;
      if (!(std::abs(sum - expect) <= 1e-12 * expect))
        return detail::describe("case ", c, ": total ", sum, " expected ", expect);
    }
  }
  return {};
}

inline std::string check_constraint_weights(int cases, unsigned seed = 13) {
  std::mt19937 rng(seed);
  std::size_t constraints = 0;
  for (int c = 0; c < cases; ++c) {
    const auto rm = random_mesh(rng);
    const auto& m = rm.mesh;
    for (const auto& ce : m.constraints) {
      double w = 0.0;
      for (int k = 0; k < ce.count; ++k) {
        w += ce.weights[k];
        if (!(ce.weights[k] > 0.0)) return detail::describe("case ", c, ": non-positive weight");
        if (m.is_hanging(ce.masters[k])) return detail::describe("case ", c, ": hanging master");
      }
      if (!(std::abs(w - 1.0) <= 1e-14)) return detail::describe("case ", c, ": weights sum to ", w);
      ++constraints;
    }
  }
  if (constraints == 0) return "no constraint was generated";
  return {};
}

inline std::string check_volume_across_coarsening(int cases, unsigned seed = 14) {
  std::mt19937 rng(seed);
  int merges = 0;
  for (int c = 0; c < cases; ++c) {
    const auto rm = random_mesh(rng);
    const HexMesh& m = rm.mesh;
    const double part_volume = static_cast<double>(m.nx * m.ny * m.nz) * m.dx * m.dy * m.dz;
    if (!(std::abs(m.total_volume() - part_volume) <= 1e-12 * part_volume))
      return detail::describe("case ", c, ": mesh volume ", m.total_volume(), " part ", part_volume);
    const auto cand = next_candidate(m, m.active_layers, 3);
    if (!cand) continue;
    const auto pot = build_potential_mesh(m, *cand);
    if (!(std::abs(pot.total_volume() - m.total_volume()) <= 1e-12 * part_volume))
      return detail::describe("case ", c, ": coarsened volume ", pot.total_volume());
    const auto mapped = map_solution(m, initial_state(m, {}), pot, {});
    if (mapped.T.size() != pot.node_count()) return detail::describe("case ", c, ": mapped size mismatch");
    ++merges;
  }
  if (merges <= cases / 4) return detail::describe("only ", merges, " coarsenings exercised");
  return {};
}

/// Solves one step with the production engine and recomputes the residual of
/// (C/dt + K) T_new = C T_old / dt + f on the free rows from the matrices.
inline std::string check_step_residual(int cases, unsigned seed = 15) {
  std::mt19937 rng(seed);
  const ProcessParameters p;
  const double dt = 1.0 / 60.0;
  for (int c = 0; c < cases; ++c) {
    auto rm = random_mesh(rng);
    HexMesh& m = rm.mesh;
    SolverOptions opts;
    opts.lumped_capacitance = c % 5 == 0;
    ThermalEngine engine(m, p, opts, dt);
    ThermalState s = initial_state(m, p);
    // deposit the first cell of the next layer, if any
    if (m.active_layers < m.nz) {
      const auto schedule = build_schedule(*rm.part, dt);
      activate(engine, s, schedule.events[static_cast<std::size_t>(schedule.layer_begin[m.active_layers])],
               175.0);
    }
    const int n = engine.dof_count();
    const auto& dof = engine.dof_of_node();
    std::vector<double> told(n), tnew(n), b(n);
    for (std::size_t node = 0; node < m.node_count(); ++node)
      if (dof[node] >= 0) told[dof[node]] = s.T[node];
    std::vector<std::uint8_t> locked(n, 0);
    for (const auto& l : s.locks)
      if (dof[l.node] >= 0) locked[dof[l.node]] = 1;

    const auto rep = engine.step(s);
    for (std::size_t node = 0; node < m.node_count(); ++node)
      if (dof[node] >= 0) tnew[dof[node]] = s.T[node];

    const auto& cm = engine.capacitance();
    const auto& km = engine.conductance();
    cm.multiply(told.data(), b.data());
    double r2 = 0.0, l2 = 0.0;
    for (int i = 0; i < n; ++i) {
      if (locked[i]) continue;
      double a = 0.0, lock_part = 0.0;
      for (int k = cm.row_ptr[i]; k < cm.row_ptr[i + 1]; ++k) {
        const double aij = cm.vals[k] / dt + km.vals[k];
        a += aij * tnew[cm.cols[k]];
        if (locked[cm.cols[k]]) lock_part += aij * tnew[cm.cols[k]];
      }
      const double rhs = b[i] / dt + engine.load()[i];
      r2 += (a - rhs) * (a - rhs);
      l2 += (rhs - lock_part) * (rhs - lock_part);
    }
    // every row locked leaves nothing to solve
    const double rel = l2 > 0.0 ? std::sqrt(r2) / std::sqrt(l2) : std::sqrt(r2);
    if (!(rel <= 1e-10 * (1.0 + 1e-6))) return detail::describe("case ", c, ": residual ", rel);
    if (!(rep.relative_residual() <= 1e-10))
      return detail::describe("case ", c, ": reported residual ", rep.relative_residual());
  }
  return {};
}

}  // namespace fffsim::testing
