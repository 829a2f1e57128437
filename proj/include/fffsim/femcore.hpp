#pragma once

// Global thermal system: reference assembly with constraint and Dirichlet
// elimination, backward-Euler stepping, heat flux, and an incremental engine
// that updates matrix values in place as elements switch on.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fffsim/config.hpp"
#include "fffsim/element.hpp"
#include "fffsim/mesh.hpp"
#include "fffsim/sparse.hpp"

namespace fffsim {

struct Lock {
  NodeId node = -1;
  double value = 0.0;
  bool persistent = false;  // bed locks stay for the whole run
};

struct ThermalState {
  std::vector<double> T;
  double time = 0.0;
  std::vector<Lock> locks;

  const Lock* find_lock(NodeId n) const {
    for (const auto& l : locks)
      if (l.node == n) return &l;
    return nullptr;
  }
};

/// Adds a lock unless the node already carries a persistent one; the state
/// value is set to the prescribed temperature.
inline void add_lock(ThermalState& s, NodeId n, double value, bool persistent) {
  for (auto& l : s.locks) {
    if (l.node != n) continue;
    if (l.persistent) return;
    l.value = value;
    l.persistent = persistent;
    s.T[n] = value;
    return;
  }
  s.locks.push_back({n, value, persistent});
  s.T[n] = value;
}

inline void release_transient_locks(ThermalState& s) {
  std::erase_if(s.locks, [](const Lock& l) { return !l.persistent; });
}

/// Dependent nodes take the weighted sum of their masters.
inline void enforce_constraints(const HexMesh& m, std::vector<double>& T) {
  for (const auto& c : m.constraints) {
    double v = 0.0;
    for (int k = 0; k < c.count; ++k) v += c.weights[k] * T[c.masters[k]];
    T[c.dependent] = v;
  }
}

/// Fresh state: every node at T_a, z=0 nodes locked to T_b.
inline ThermalState initial_state(const HexMesh& m, const ProcessParameters& p) {
  ThermalState s;
  s.T.assign(m.node_count(), p.ambient_temperature);
  for (std::size_t n = 0; n < m.nodes.size(); ++n)
    if (m.nodes[n].z == 0 && !m.is_hanging(static_cast<NodeId>(n)))
      add_lock(s, static_cast<NodeId>(n), p.bed_temperature, true);
  return s;
}

namespace detail {

struct Expansion {
  int count = 0;
  std::array<NodeId, 4> nodes{};
  std::array<double, 4> weights{};
};

inline Expansion expand(const HexMesh& m, NodeId n) {
  Expansion e;
  const int c = m.node_constraint[n];
  if (c < 0) {
    e.count = 1;
    e.nodes[0] = n;
    e.weights[0] = 1.0;
    return e;
  }
  const auto& ce = m.constraints[c];
  e.count = ce.count;
  e.nodes = ce.masters;
  e.weights = ce.weights;
  return e;
}

/// Face convection of a patch in element-local parametric coordinates.
inline FaceConvection patch_convection(const HexMesh& m, const FacePatch& p, double h, double t_ref) {
  const Element& e = m.elements[p.element];
  const int axis = face_axis(p.face);
  const int lo[3] = {e.x0, e.y0, e.z0};
  const int hi[3] = {e.x1, e.y1, e.z1};
  const int ua = axis == 0 ? 1 : 0;
  const int va = axis == 2 ? 1 : 2;
  auto param = [](int v, int l, int h) { return -1.0 + 2.0 * (v - l) / static_cast<double>(h - l); };
  return face_convection(m.dims(e), p.face, h, t_ref,
                         {param(p.a0, lo[ua], hi[ua]), param(p.a1, lo[ua], hi[ua])},
                         {param(p.b0, lo[va], hi[va]), param(p.b1, lo[va], hi[va])});
}

inline Matrix8 element_conductance_of(const HexMesh& m, const Element& e) {
  return element_conductance(m.dims(e), m.materials.conductivity(e));
}

inline Matrix8 element_capacitance_of(const HexMesh& m, const Element& e, bool lumped) {
  // density 1 with the volumetric capacity as specific heat keeps the product exact
  return element_capacitance(m.dims(e), 1.0, m.materials.capacity(e), lumped);
}

}  // namespace detail

/// Reduced system over free dofs (hanging and locked nodes eliminated). The
/// free-locked coupling blocks are kept for the load correction in `step`.
struct SystemMatrices {
  std::vector<int> dof;  // node -> free dof index, -1 if hanging or locked
  std::vector<NodeId> free_nodes;
  std::vector<NodeId> locked_nodes;
  std::vector<double> locked_values;
  Eigen::SparseMatrix<double> C, K;        // free x free; K includes convection
  Eigen::SparseMatrix<double> C_fl, K_fl;  // free x locked
  Eigen::VectorXd f;                       // convection load on free dofs

  int size() const { return static_cast<int>(free_nodes.size()); }
};

/// Sums element and face contributions, eliminates constraints and locks.
inline SystemMatrices assemble(const HexMesh& m, const ProcessParameters& p, const ThermalState& s,
                               bool lumped = false) {
  if (m.active_element_count() == 0) throw std::runtime_error("assemble: mesh has no active element");
  SystemMatrices sys;
  const auto nn = m.node_count();
  sys.dof.assign(nn, -1);
  std::vector<int> locked_index(nn, -1);
  for (const auto& l : s.locks) {
    if (m.is_hanging(l.node)) continue;
    locked_index[l.node] = static_cast<int>(sys.locked_nodes.size());
    sys.locked_nodes.push_back(l.node);
    sys.locked_values.push_back(l.value);
  }
  for (std::size_t n = 0; n < nn; ++n) {
    const auto id = static_cast<NodeId>(n);
    if (m.is_hanging(id) || locked_index[n] >= 0) continue;
    sys.dof[n] = static_cast<int>(sys.free_nodes.size());
    sys.free_nodes.push_back(id);
  }
  const int nf = sys.size();
  const int nl = static_cast<int>(sys.locked_nodes.size());

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> c_ff, k_ff, c_fl, k_fl;
  sys.f = Eigen::VectorXd::Zero(nf);

  auto scatter = [&](const NodeId* nodes, int count, auto entry, std::vector<Triplet>& ff,
                     std::vector<Triplet>& fl) {
    for (int a = 0; a < count; ++a) {
      const auto ea = detail::expand(m, nodes[a]);
      for (int b = 0; b < count; ++b) {
        const double v = entry(a, b);
        if (v == 0.0) continue;
        const auto eb = detail::expand(m, nodes[b]);
        for (int i = 0; i < ea.count; ++i) {
          const int r = sys.dof[ea.nodes[i]];
          if (r < 0) continue;
          for (int j = 0; j < eb.count; ++j) {
            const double w = ea.weights[i] * eb.weights[j] * v;
            if (const int c = sys.dof[eb.nodes[j]]; c >= 0)
              ff.emplace_back(r, c, w);
            else if (const int l = locked_index[eb.nodes[j]]; l >= 0)
              fl.emplace_back(r, l, w);
          }
        }
      }
    }
  };

  for (const auto& e : m.elements) {
    const auto ke = detail::element_conductance_of(m, e);
    const auto ce = detail::element_capacitance_of(m, e, lumped);
    scatter(e.nodes.data(), 8, [&](int a, int b) { return ke[a][b]; }, k_ff, k_fl);
    scatter(e.nodes.data(), 8, [&](int a, int b) { return ce[a][b]; }, c_ff, c_fl);
  }
  const double h = p.convection_coefficient;
  const double t_ref = p.ambient_temperature;
  for (const auto* set : {&m.faces.permanent, &m.faces.temporary}) {
    for (const auto& patch : *set) {
      const auto fc = detail::patch_convection(m, patch, h, t_ref);
      std::array<NodeId, 4> nodes{};
      for (int a = 0; a < 4; ++a) nodes[a] = m.elements[patch.element].nodes[fc.nodes[a]];
      scatter(nodes.data(), 4, [&](int a, int b) { return fc.matrix[a][b]; }, k_ff, k_fl);
      for (int a = 0; a < 4; ++a) {
        const auto ea = detail::expand(m, nodes[a]);
        for (int i = 0; i < ea.count; ++i)
          if (const int r = sys.dof[ea.nodes[i]]; r >= 0) sys.f[r] += ea.weights[i] * fc.load[a];
      }
    }
  }
  sys.C.resize(nf, nf);
  sys.K.resize(nf, nf);
  sys.C_fl.resize(nf, nl);
  sys.K_fl.resize(nf, nl);
  sys.C.setFromTriplets(c_ff.begin(), c_ff.end());
  sys.K.setFromTriplets(k_ff.begin(), k_ff.end());
  sys.C_fl.setFromTriplets(c_fl.begin(), c_fl.end());
  sys.K_fl.setFromTriplets(k_fl.begin(), k_fl.end());
  return sys;
}

struct StepReport {
  int iterations = 0;
  double residual = 0.0;
  double load_norm = 0.0;

  double relative_residual() const { return load_norm > 0.0 ? residual / load_norm : 0.0; }
};

/// Backward Euler on the reduced system: (C/dt + K) T_new = C/dt T_old + f,
/// with the locked columns moved to the right-hand side.
inline ThermalState step(const HexMesh& m, const SystemMatrices& sys, const ThermalState& s, double dt,
                         double tol = 1e-10, StepReport* report = nullptr) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: time step must be positive");
  const int nf = sys.size();
  const int nl = static_cast<int>(sys.locked_nodes.size());
  Eigen::VectorXd t_old(nf), tl_old(nl), tl_new(nl);
  for (int i = 0; i < nf; ++i) t_old[i] = s.T[sys.free_nodes[i]];
  for (int l = 0; l < nl; ++l) {
    tl_old[l] = s.T[sys.locked_nodes[l]];
    tl_new[l] = sys.locked_values[l];
  }
  ThermalState out = s;
  out.time = s.time + dt;
  if (nf > 0) {
    const Eigen::VectorXd b = sys.C * t_old / dt + sys.C_fl * (tl_old - tl_new) / dt + sys.f -
                              sys.K_fl * tl_new;
    const Eigen::SparseMatrix<double> a = sys.C / dt + sys.K;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(tol);
    cg.setMaxIterations(std::max(1000, 10 * nf));
    cg.compute(a);
    const Eigen::VectorXd x = cg.solveWithGuess(b, t_old);
    if (cg.info() != Eigen::Success) throw std::runtime_error("step: linear solver did not converge");
    for (int i = 0; i < nf; ++i) out.T[sys.free_nodes[i]] = x[i];
    if (report) {
      report->iterations = static_cast<int>(cg.iterations());
      report->load_norm = b.norm();
      report->residual = (b - a * x).norm();
    }
  }
  for (int l = 0; l < nl; ++l) out.T[sys.locked_nodes[l]] = tl_new[l];
  enforce_constraints(m, out.T);
  return out;
}

/// q = -k grad T at the element centroid (quiet elements use scaled k).
inline std::array<double, 3> heat_flux(const HexMesh& m, const ThermalState& s, ElementId id) {
  const Element& e = m.elements[id];
  const auto g = shape_gradients(m.dims(e), 0.0, 0.0, 0.0);
  const double k = m.materials.conductivity(e);
  std::array<double, 3> q{};
  for (int a = 0; a < 8; ++a)
    for (int d = 0; d < 3; ++d) q[d] -= k * g[a][d] * s.T[e.nodes[a]];
  return q;
}

inline std::vector<std::array<double, 3>> heat_flux(const HexMesh& m, const ThermalState& s) {
  std::vector<std::array<double, 3>> out(m.element_count(), {0.0, 0.0, 0.0});
  for (std::size_t e = 0; e < m.elements.size(); ++e)
    if (m.elements[e].active) out[e] = heat_flux(m, s, static_cast<ElementId>(e));
  return out;
}

/// Production solver for one mesh. Keeps C, K (+ convection) and the
/// iteration matrix C/dt + K over the non-hanging nodes, and patches their
/// values when elements activate instead of re-assembling.
class ThermalEngine {
 public:
  ThermalEngine(HexMesh& mesh, const ProcessParameters& process, const SolverOptions& options,
                double dt)
      : mesh_(mesh), process_(process), options_(options), dt_(dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("ThermalEngine: time step must be positive");
    dof_.assign(mesh_.node_count(), -1);
    for (std::size_t n = 0; n < mesh_.node_count(); ++n)
      if (!mesh_.is_hanging(static_cast<NodeId>(n))) {
        dof_[n] = static_cast<int>(dof_nodes_.size());
        dof_nodes_.push_back(static_cast<NodeId>(n));
      }
    PatternBuilder pattern(static_cast<int>(dof_nodes_.size()));
    std::vector<int> dofs;
    for (const auto& e : mesh_.elements) {
      dofs.clear();
      for (NodeId n : e.nodes) {
        const auto ex = detail::expand(mesh_, n);
        for (int i = 0; i < ex.count; ++i) {
          const int d = dof_[ex.nodes[i]];
          if (std::find(dofs.begin(), dofs.end(), d) == dofs.end()) dofs.push_back(d);
        }
      }
      pattern.add_clique(dofs.data(), static_cast<int>(dofs.size()));
    }
    c_ = pattern.finish();
    k_ = c_;
    a_ = c_;
    f_.assign(dof_nodes_.size(), 0.0);
    patches_.resize(mesh_.element_count());
    for (std::size_t e = 0; e < mesh_.element_count(); ++e) add_element(static_cast<ElementId>(e), 1.0);
    for (std::size_t e = 0; e < mesh_.element_count(); ++e) refresh_faces(static_cast<ElementId>(e));
  }

  int dof_count() const { return static_cast<int>(dof_nodes_.size()); }
  const std::vector<int>& dof_of_node() const { return dof_; }
  const CsrMatrix& capacitance() const { return c_; }
  const CsrMatrix& conductance() const { return k_; }
  const std::vector<double>& load() const { return f_; }
  HexMesh& mesh() { return mesh_; }
  const HexMesh& mesh() const { return mesh_; }

  /// Switches elements on and refreshes the convection patches around them.
  void activate(const std::vector<ElementId>& ids) {
    for (ElementId id : ids) {
      if (mesh_.elements[id].active) throw std::logic_error("ThermalEngine: element already active");
      // base properties replace the quiet-scaled ones
      add_element(id, -1.0);
      mesh_.elements[id].active = true;
      add_element(id, 1.0);
    }
    std::vector<ElementId> touched;
    for (ElementId id : ids) {
      touched.push_back(id);
      neighbours(id, touched);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (ElementId id : touched) refresh_faces(id);
  }

  /// Applied boundary patches, for consistency checks against classify_faces.
  FaceSets faces() const {
    FaceSets sets;
    for (const auto& list : patches_)
      for (const auto& p : list) {
        if (p.kind == FaceKind::bed) sets.bed.push_back(p);
        if (p.kind == FaceKind::permanent) sets.permanent.push_back(p);
        if (p.kind == FaceKind::temporary) sets.temporary.push_back(p);
      }
    return sets;
  }

  /// One backward-Euler step with the state's locks held fixed.
  StepReport step(ThermalState& s) {
    const int n = dof_count();
    t_old_.resize(n);
    rhs_.resize(n);
    for (int i = 0; i < n; ++i) t_old_[i] = s.T[dof_nodes_[i]];
    c_.multiply(t_old_.data(), rhs_.data());
    for (int i = 0; i < n; ++i) rhs_[i] = rhs_[i] / dt_ + f_[i];

    locked_.assign(n, 0);
    std::vector<double>& x = t_old_;
    for (const auto& l : s.locks) {
      const int d = dof_[l.node];
      if (d < 0) continue;
      locked_[d] = 1;
      x[d] = l.value;
    }
    const auto r = solve_masked_ssor(a_, rhs_, x, locked_, options_.tolerance, options_.max_iterations, ws_);
    if (!r.converged) throw std::runtime_error("ThermalEngine: linear solver did not converge");
    for (int i = 0; i < n; ++i) s.T[dof_nodes_[i]] = x[i];
    enforce_constraints(mesh_, s.T);
    s.time += dt_;
    return {r.iterations, r.residual, r.load_norm};
  }

 private:
  template <class Entry>
  void scatter(const NodeId* nodes, int count, Entry entry, CsrMatrix& m, double a_factor) {
    for (int a = 0; a < count; ++a) {
      const auto ea = detail::expand(mesh_, nodes[a]);
      for (int b = 0; b < count; ++b) {
        const double v = entry(a, b);
        if (v == 0.0) continue;
        const auto eb = detail::expand(mesh_, nodes[b]);
        for (int i = 0; i < ea.count; ++i) {
          const int r = dof_[ea.nodes[i]];
          for (int j = 0; j < eb.count; ++j) {
            const int pos = m.find(r, dof_[eb.nodes[j]]);
            const double w = ea.weights[i] * eb.weights[j] * v;
            m.vals[pos] += w;
            a_.vals[pos] += a_factor * w;
          }
        }
      }
    }
  }

  void add_element(ElementId id, double sign) {
    const Element& e = mesh_.elements[id];
    const auto ke = detail::element_conductance_of(mesh_, e);
    const auto ce = detail::element_capacitance_of(mesh_, e, options_.lumped_capacitance);
    scatter(e.nodes.data(), 8, [&](int a, int b) { return sign * ke[a][b]; }, k_, 1.0);
    scatter(e.nodes.data(), 8, [&](int a, int b) { return sign * ce[a][b]; }, c_, 1.0 / dt_);
  }

  void add_patch(const FacePatch& p, double sign) {
    if (p.kind != FaceKind::permanent && p.kind != FaceKind::temporary) return;
    const auto fc = detail::patch_convection(mesh_, p, process_.convection_coefficient,
                                             process_.ambient_temperature);
    std::array<NodeId, 4> nodes{};
    for (int a = 0; a < 4; ++a) nodes[a] = mesh_.elements[p.element].nodes[fc.nodes[a]];
    scatter(nodes.data(), 4, [&](int a, int b) { return sign * fc.matrix[a][b]; }, k_, 1.0);
    for (int a = 0; a < 4; ++a) {
      const auto ea = detail::expand(mesh_, nodes[a]);
      for (int i = 0; i < ea.count; ++i) f_[dof_[ea.nodes[i]]] += sign * ea.weights[i] * fc.load[a];
    }
  }

  void refresh_faces(ElementId id) {
    for (const auto& p : patches_[id]) add_patch(p, -1.0);
    patches_[id] = element_boundary(mesh_, id);
    for (const auto& p : patches_[id]) add_patch(p, 1.0);
  }

  void neighbours(ElementId id, std::vector<ElementId>& out) const {
    const Element& e = mesh_.elements[id];
    auto push = [&](int i, int j, int k) {
      const ElementId n = mesh_.element_at_cell(i, j, k);
      if (n >= 0 && n != id) out.push_back(n);
    };
    for (int k = e.z0; k < e.z1; ++k)
      for (int j = e.y0; j < e.y1; ++j) {
        push(e.x0 - 1, j, k);
        push(e.x1, j, k);
      }
    for (int k = e.z0; k < e.z1; ++k)
      for (int i = e.x0; i < e.x1; ++i) {
        push(i, e.y0 - 1, k);
        push(i, e.y1, k);
      }
    for (int j = e.y0; j < e.y1; ++j)
      for (int i = e.x0; i < e.x1; ++i) {
        push(i, j, e.z0 - 1);
        push(i, j, e.z1);
      }
  }

  HexMesh& mesh_;
  ProcessParameters process_;
  SolverOptions options_;
  double dt_;
  std::vector<int> dof_;
  std::vector<NodeId> dof_nodes_;
  CsrMatrix c_, k_, a_;
  std::vector<double> f_;
  std::vector<std::vector<FacePatch>> patches_;
  std::vector<double> t_old_, rhs_;
  std::vector<std::uint8_t> locked_;
  SsorWorkspace ws_;
};

}  // namespace fffsim
