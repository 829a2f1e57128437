#pragma once

// Compressed sparse rows with a fixed pattern and in-place value updates, plus
// conjugate gradient solvers that keep masked rows fixed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fffsim {

struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> cols;
  std::vector<double> vals;

  /// Position of entry (r, c) in `vals`; the entry must be in the pattern.
  int find(int r, int c) const {
    auto b = cols.begin() + row_ptr[r];
    auto e = cols.begin() + row_ptr[r + 1];
    auto it = std::lower_bound(b, e, c);
    if (it == e || *it != c) throw std::logic_error("CsrMatrix::find: entry outside pattern");
    return static_cast<int>(it - cols.begin());
  }

  double at(int r, int c) const {
    auto b = cols.begin() + row_ptr[r];
    auto e = cols.begin() + row_ptr[r + 1];
    auto it = std::lower_bound(b, e, c);
    return (it == e || *it != c) ? 0.0 : vals[static_cast<std::size_t>(it - cols.begin())];
  }

  void multiply(const double* x, double* y) const {
    const int* rp = row_ptr.data();
    const int* ci = cols.data();
    const double* v = vals.data();
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int p = rp[r]; p < rp[r + 1]; ++p) s += v[p] * x[ci[p]];
      y[r] = s;
    }
  }
};

/// Collects the nonzero pattern row by row, then freezes it into CSR.
class PatternBuilder {
 public:
  explicit PatternBuilder(int n) : rows_(static_cast<std::size_t>(n)) {}

  void add_clique(const int* dofs, int count) {
    for (int a = 0; a < count; ++a) {
      auto& row = rows_[static_cast<std::size_t>(dofs[a])];
      for (int b = 0; b < count; ++b) {
        const int c = dofs[b];
        if (std::find(row.begin(), row.end(), c) == row.end()) row.push_back(c);
      }
    }
  }

  CsrMatrix finish() {
    CsrMatrix m;
    m.n = static_cast<int>(rows_.size());
    std::size_t nnz = 0;
    for (const auto& r : rows_) nnz += r.size();
    m.cols.reserve(nnz);
    m.row_ptr.reserve(rows_.size() + 1);
    for (auto& r : rows_) {
      std::sort(r.begin(), r.end());
      m.cols.insert(m.cols.end(), r.begin(), r.end());
      m.row_ptr.push_back(static_cast<int>(m.cols.size()));
      std::vector<int>().swap(r);
    }
    m.vals.assign(m.cols.size(), 0.0);
    return m;
  }

 private:
  std::vector<std::vector<int>> rows_;
};

struct PcgResult {
  int iterations = 0;
  double residual = 0.0;   // final residual norm over free rows
  double load_norm = 0.0;  // norm of the effective load over free rows
  bool converged = false;
};

/// Solves A x = b on rows with locked[r] == 0, holding x fixed on locked
/// rows. Converges when |r| <= tol * |b - A x_locked| over the free rows.
/// `x` carries the initial guess on free rows.
inline PcgResult solve_masked_pcg(const CsrMatrix& a, const std::vector<double>& b,
                                  std::vector<double>& x, const std::vector<std::uint8_t>& locked,
                                  double tol, int max_iterations) {
  const int n = a.n;
  PcgResult res;
  std::vector<double> r(n), z(n), p(n), q(n), inv_diag(n, 0.0);

  // effective load: b - A x_L restricted to free rows (A is symmetric, so
  // scatter from locked rows)
  std::vector<double> load(b);
  for (int l = 0; l < n; ++l) {
    if (!locked[l] || x[l] == 0.0) continue;
    for (int k = a.row_ptr[l]; k < a.row_ptr[l + 1]; ++k) load[a.cols[k]] -= a.vals[k] * x[l];
  }
  double load2 = 0.0;
  for (int i = 0; i < n; ++i)
    if (!locked[i]) load2 += load[i] * load[i];
  res.load_norm = std::sqrt(load2);

  for (int i = 0; i < n; ++i) {
    if (locked[i]) continue;
    const double d = a.at(i, i);
    if (!(d > 0.0)) throw std::runtime_error("solve_masked_pcg: non-positive diagonal");
    inv_diag[i] = 1.0 / d;
  }
  if (res.load_norm == 0.0) {
    for (int i = 0; i < n; ++i)
      if (!locked[i]) x[i] = 0.0;
    res.converged = true;
    return res;
  }
  const double target = tol * res.load_norm;

  // The recurred residual drifts from the true one near the tolerance, so
  // restart from a recomputed residual until the true residual passes.
  for (int restart = 0; restart < 4; ++restart) {
  a.multiply(x.data(), q.data());
  double rz = 0.0, rr = 0.0;
  for (int i = 0; i < n; ++i) {
    if (locked[i]) {
      r[i] = z[i] = p[i] = 0.0;
      continue;
    }
    r[i] = b[i] - q[i];
    z[i] = inv_diag[i] * r[i];
    p[i] = z[i];
    rz += r[i] * z[i];
    rr += r[i] * r[i];
  }
  res.residual = std::sqrt(rr);
  while (res.residual > target) {
    if (res.iterations >= max_iterations) return res;
    a.multiply(p.data(), q.data());
    double pq = 0.0;
    for (int i = 0; i < n; ++i)
      if (!locked[i]) pq += p[i] * q[i];
    if (!(pq > 0.0)) throw std::runtime_error("solve_masked_pcg: matrix not positive definite");
    const double alpha = rz / pq;
    double rz_new = 0.0;
    rr = 0.0;
    for (int i = 0; i < n; ++i) {
      if (locked[i]) continue;
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = inv_diag[i] * r[i];
      rz_new += r[i] * z[i];
      rr += r[i] * r[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i)
      if (!locked[i]) p[i] = z[i] + beta * p[i];
    ++res.iterations;
    res.residual = std::sqrt(rr);
  }
  a.multiply(x.data(), q.data());
  rr = 0.0;
  for (int i = 0; i < n; ++i)
    if (!locked[i]) rr += (b[i] - q[i]) * (b[i] - q[i]);
  res.residual = std::sqrt(rr);
  if (res.residual <= target) {
    res.converged = true;
    return res;
  }
  }
  return res;
}

/// Reusable buffers and the cached diagonal layout for solve_masked_ssor.
struct SsorWorkspace {
  std::vector<int> diag;  // position of (i, i) in the pattern
  std::vector<double> d, r, rh, z, p, q, t, y;
  const CsrMatrix* pattern = nullptr;

  void bind(const CsrMatrix& a) {
    const std::size_t n = static_cast<std::size_t>(a.n);
    if (pattern != &a || diag.size() != n) {
      diag.resize(n);
      for (int i = 0; i < a.n; ++i) diag[static_cast<std::size_t>(i)] = a.find(i, i);
      pattern = &a;
    }
    for (auto* v : {&d, &r, &rh, &z, &p, &q, &t, &y}) v->assign(n, 0.0);
  }
};

/// Same contract as solve_masked_pcg, preconditioned with symmetric
/// Gauss-Seidel. The split form L^-1 A L^-T (L = D + strict lower part) is
/// iterated directly, so one product costs a forward and a backward sweep,
/// about one matrix-vector product.
inline PcgResult solve_masked_ssor(const CsrMatrix& a, const std::vector<double>& b, std::vector<double>& x,
                                   const std::vector<std::uint8_t>& locked, double tol, int max_iterations,
                                   SsorWorkspace& ws) {
  const int n = a.n;
  ws.bind(a);
  const int* rp = a.row_ptr.data();
  const int* ci = a.cols.data();
  const double* v = a.vals.data();
  const int* dg = ws.diag.data();
  double* d = ws.d.data();
  PcgResult res;

  for (int i = 0; i < n; ++i) {
    if (locked[i]) continue;
    d[i] = v[dg[i]];
    if (!(d[i] > 0.0)) throw std::runtime_error("solve_masked_ssor: non-positive diagonal");
  }

  // (D + L) out = in over free rows; locked entries of `out` stay zero
  auto forward = [&](const double* in, double* out) {
    for (int i = 0; i < n; ++i) {
      if (locked[i]) {
        out[i] = 0.0;
        continue;
      }
      double s = in[i];
      for (int k = rp[i]; k < dg[i]; ++k) s -= v[k] * out[ci[k]];
      out[i] = s / d[i];
    }
  };
  auto backward = [&](const double* in, double* out) {
    for (int i = n - 1; i >= 0; --i) {
      if (locked[i]) {
        out[i] = 0.0;
        continue;
      }
      double s = in[i];
      for (int k = dg[i] + 1; k < rp[i + 1]; ++k) s -= v[k] * out[ci[k]];
      out[i] = s / d[i];
    }
  };
  // true residual norm from the split residual: |(D + L) rh|
  auto unsplit_norm = [&](const double* rh) {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      if (locked[i]) continue;
      double s = d[i] * rh[i];
      for (int k = rp[i]; k < dg[i]; ++k) s += v[k] * rh[ci[k]];
      s2 += s * s;
    }
    return std::sqrt(s2);
  };
  auto true_residual = [&](double* r) {
    a.multiply(x.data(), r);
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      r[i] = locked[i] ? 0.0 : b[i] - r[i];
      s2 += r[i] * r[i];
    }
    return std::sqrt(s2);
  };

  // effective load b - A x_L over free rows
  {
    double* load = ws.q.data();
    std::copy(b.begin(), b.end(), load);
    for (int l = 0; l < n; ++l) {
      if (!locked[l] || x[l] == 0.0) continue;
      for (int k = rp[l]; k < rp[l + 1]; ++k) load[ci[k]] -= v[k] * x[l];
    }
    double s2 = 0.0;
    for (int i = 0; i < n; ++i)
      if (!locked[i]) s2 += load[i] * load[i];
    res.load_norm = std::sqrt(s2);
  }
  if (res.load_norm == 0.0) {
    for (int i = 0; i < n; ++i)
      if (!locked[i]) x[i] = 0.0;
    res.converged = true;
    return res;
  }
  const double target = tol * res.load_norm;

  double* r = ws.r.data();
  double* rh = ws.rh.data();
  double* z = ws.z.data();
  double* p = ws.p.data();
  double* q = ws.q.data();
  double* t = ws.t.data();
  double* y = ws.y.data();
  res.residual = true_residual(r);

  for (int restart = 0; restart < 4 && res.residual > target; ++restart) {
    // correction x += L^-T y with L^-1 A L^-T y = L^-1 r
    forward(r, rh);
    double rz = 0.0, rh2 = 0.0;
    for (int i = 0; i < n; ++i) {
      y[i] = 0.0;
      z[i] = d[i] * rh[i];
      p[i] = z[i];
      rz += rh[i] * z[i];
      rh2 += rh[i] * rh[i];
    }
    double ratio = res.residual / std::sqrt(rh2);  // |r| / |rh|, refreshed on checks
    while (true) {
      if (ratio * std::sqrt(rh2) <= target) {
        const double rn = unsplit_norm(rh);
        ratio = rn / std::sqrt(rh2);
        if (rn <= target) break;
      }
      if (res.iterations >= max_iterations) break;
      backward(p, t);
      for (int i = 0; i < n; ++i) z[i] = p[i] - d[i] * t[i];
      forward(z, q);
      double pq = 0.0;
      for (int i = 0; i < n; ++i) {
        q[i] += t[i];
        pq += p[i] * q[i];
      }
      if (!(pq > 0.0)) throw std::runtime_error("solve_masked_ssor: matrix not positive definite");
      const double alpha = rz / pq;
      double rz_new = 0.0;
      rh2 = 0.0;
      for (int i = 0; i < n; ++i) {
        y[i] += alpha * p[i];
        rh[i] -= alpha * q[i];
        z[i] = d[i] * rh[i];
        rz_new += rh[i] * z[i];
        rh2 += rh[i] * rh[i];
      }
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
      ++res.iterations;
    }
    backward(y, t);
    for (int i = 0; i < n; ++i)
      if (!locked[i]) x[i] += t[i];
    res.residual = true_residual(r);
    if (res.iterations >= max_iterations) break;
  }
  res.converged = res.residual <= target;
  return res;
}


}  // namespace fffsim
