#include "sgdd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgdd/errors.hpp"

namespace sgdd::linalg {

void matmul(const double* a, int ra, int ca, const double* b, int cb, double* out) {
  std::fill(out, out + static_cast<size_t>(ra) * cb, 0.0);
  for (int i = 0; i < ra; ++i) {
    const double* arow = a + static_cast<size_t>(i) * ca;
    double* orow = out + static_cast<size_t>(i) * cb;
    for (int k = 0; k < ca; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;  // selection/one-hot operands are mostly zero
      const double* brow = b + static_cast<size_t>(k) * cb;
      for (int j = 0; j < cb; ++j) orow[j] += aik * brow[j];
    }
  }
}

void jacobi_eigen(int n, const std::vector<double>& a_in, std::vector<double>& vals,
                  std::vector<double>& vecs, int max_sweeps) {
  if (n <= 0) throw InputError("jacobi_eigen: empty matrix");
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a[static_cast<size_t>(i) * n + j] =
          0.5 * (a_in[static_cast<size_t>(i) * n + j] + a_in[static_cast<size_t>(j) * n + i]);

  vecs.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vecs[static_cast<size_t>(i) * n + i] = 1.0;
  vals.assign(n, 0.0);

  double frob = 0.0;
  for (double x : a) frob += x * x;
  frob = std::sqrt(frob);
  const double thresh_sq = std::pow(1e-13 * std::max(1e-30, frob), 2);

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off_sq = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off_sq += a[static_cast<size_t>(p) * n + q] * a[static_cast<size_t>(p) * n + q];
    if (off_sq <= thresh_sq) {
      converged = true;
      break;
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<size_t>(p) * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[static_cast<size_t>(p) * n + p];
        const double aqq = a[static_cast<size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J, column then row update.
        for (int k = 0; k < n; ++k) {
          double* col_p = &a[static_cast<size_t>(k) * n + p];
          double* col_q = &a[static_cast<size_t>(k) * n + q];
          const double akp = *col_p, akq = *col_q;
          *col_p = c * akp - s * akq;
          *col_q = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double* row_p = &a[static_cast<size_t>(p) * n + k];
          double* row_q = &a[static_cast<size_t>(q) * n + k];
          const double apk = *row_p, aqk = *row_q;
          *row_p = c * apk - s * aqk;
          *row_q = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double* v_p = &vecs[static_cast<size_t>(k) * n + p];
          double* v_q = &vecs[static_cast<size_t>(k) * n + q];
          const double vkp = *v_p, vkq = *v_q;
          *v_p = c * vkp - s * vkq;
          *v_q = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw NumericalError("jacobi_eigen: no convergence within sweep limit");

  for (int i = 0; i < n; ++i) vals[i] = a[static_cast<size_t>(i) * n + i];
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return vals[x] < vals[y]; });

  std::vector<double> sorted_vals(n);
  std::vector<double> sorted_vecs(static_cast<size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    sorted_vals[j] = vals[order[j]];
    for (int i = 0; i < n; ++i)
      sorted_vecs[static_cast<size_t>(i) * n + j] = vecs[static_cast<size_t>(i) * n + order[j]];
  }
  vals = std::move(sorted_vals);
  vecs = std::move(sorted_vecs);
}

std::vector<double> spd_inverse(int n, const std::vector<double>& k) {
  if (n <= 0) throw InputError("spd_inverse: empty matrix");
  const size_t nn = static_cast<size_t>(n) * n;
  if (k.size() != nn) throw InputError("spd_inverse: size mismatch");

  // Cholesky factor (lower triangle, row-major).
  std::vector<double> L(k);
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(k[static_cast<size_t>(i) * n + i]));
  const double pivot_floor = std::max(1e-300, max_diag * 1e-13);

  for (int j = 0; j < n; ++j) {
    double* lj = &L[static_cast<size_t>(j) * n];
    double d = lj[j];
    for (int t = 0; t < j; ++t) d -= lj[t] * lj[t];
    if (!(d > pivot_floor)) throw NumericalError("spd_inverse: matrix not positive definite");
    const double ljj = std::sqrt(d);
    lj[j] = ljj;
    for (int i = j + 1; i < n; ++i) {
      double* li = &L[static_cast<size_t>(i) * n];
      double s = li[j];
      for (int t = 0; t < j; ++t) s -= li[t] * lj[t];
      li[j] = s / ljj;
    }
  }

  // T = L^{-1}, stored column-major so both passes below stream contiguously:
  // tcm[j*n + i] = T[i][j].
  std::vector<double> tcm(nn, 0.0);
  for (int j = 0; j < n; ++j) {
    double* tcol = &tcm[static_cast<size_t>(j) * n];
    tcol[j] = 1.0 / L[static_cast<size_t>(j) * n + j];
    for (int i = j + 1; i < n; ++i) {
      const double* li = &L[static_cast<size_t>(i) * n];
      double s = 0.0;
      for (int t = j; t < i; ++t) s += li[t] * tcol[t];
      tcol[i] = -s / li[i];
    }
  }

  // K^{-1} = T^T T; entry (i,j) is the dot product of T's columns i and j.
  std::vector<double> out(nn, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* ci = &tcm[static_cast<size_t>(i) * n];
    for (int j = 0; j <= i; ++j) {
      const double* cj = &tcm[static_cast<size_t>(j) * n];
      double s = 0.0;
      for (int t = i; t < n; ++t) s += ci[t] * cj[t];
      out[static_cast<size_t>(i) * n + j] = s;
      out[static_cast<size_t>(j) * n + i] = s;
    }
  }
  return out;
}

}  // namespace sgdd::linalg
