#pragma once

// Shared test utilities and independent oracles. Everything here must stay
// independent of the implementation paths it is used to check.

#include <cmath>
#include <vector>

#include "sgdd/rng.hpp"
#include "sgdd/tensor.hpp"

namespace sgdd::test {

inline Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Random symmetric positive definite matrix R R^T + ridge I.
inline Tensor random_spd(int n, Rng& rng, double ridge = 0.5) {
  Tensor r = random_tensor(n, n, rng);
  Tensor m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += r.at(i, k) * r.at(j, k);
      m.at(i, j) = s;
    }
  for (int i = 0; i < n; ++i) m.at(i, i) += ridge;
  return m;
}

// Naive double-loop Gaussian KDE, unnormalized then normalized over the grid.
inline std::vector<double> naive_kde(const std::vector<double>& samples, double h,
                                     const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  const double norm = 1.0 / (samples.size() * h * std::sqrt(2.0 * 3.14159265358979323846));
  for (size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (double s : samples) {
      const double u = (grid[i] - s) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out[i] = acc * norm;
  }
  double total = 0.0;
  for (double d : out) total += d;
  for (double& d : out) d /= total;
  return out;
}

// Direct base-2 JS divergence evaluation.
inline double naive_js(const std::vector<double>& p, const std::vector<double>& q) {
  double js = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return js;
}

// Gauss-Jordan inverse with partial pivoting; independent of the library's
// Cholesky route.
inline Tensor gj_inverse(const Tensor& m) {
  const int n = m.rows;
  Tensor a = m;
  Tensor inv = Tensor::identity(n);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (pivot != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a.at(col, j), a.at(pivot, j));
        std::swap(inv.at(col, j), inv.at(pivot, j));
      }
    const double d = a.at(col, col);
    for (int j = 0; j < n; ++j) {
      a.at(col, j) /= d;
      inv.at(col, j) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a.at(r, j) -= f * a.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

// Denman-Beavers iteration for the principal matrix square root. No
// eigendecomposition involved, so it is an independent route to sqrt(M).
inline Tensor db_sqrtm(const Tensor& m, int max_iters = 100) {
  Tensor y = m;
  Tensor z = Tensor::identity(m.rows);
  for (int it = 0; it < max_iters; ++it) {
    const Tensor yi = gj_inverse(y);
    const Tensor zi = gj_inverse(z);
    Tensor y_next(m.rows, m.rows), z_next(m.rows, m.rows);
    for (size_t i = 0; i < y.data.size(); ++i) {
      y_next.data[i] = 0.5 * (y.data[i] + zi.data[i]);
      z_next.data[i] = 0.5 * (z.data[i] + yi.data[i]);
    }
    const double delta = max_abs_diff(y, y_next);
    y = std::move(y_next);
    z = std::move(z_next);
    if (delta < 1e-14 * (1.0 + max_abs(y))) break;
  }
  return y;
}

inline double trace_of(const Tensor& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows; ++i) s += m.at(i, i);
  return s;
}

}  // namespace sgdd::test
