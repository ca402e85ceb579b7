#include "sgdd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sgdd/errors.hpp"
#include "sgdd/linalg.hpp"

namespace sgdd {

Tensor::Tensor(int r, int c, double fill) : rows(r), cols(c) {
  if (r < 0 || c < 0) throw InputError("tensor: negative dimension");
  data.assign(static_cast<size_t>(r) * c, fill);
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::from(int r, int c, std::initializer_list<double> v) {
  Tensor t(r, c);
  if (v.size() != t.data.size()) throw InputError("tensor: initializer size mismatch");
  std::copy(v.begin(), v.end(), t.data.begin());
  return t;
}

Tensor Tensor::row_vector(const std::vector<double>& v) {
  Tensor t(1, static_cast<int>(v.size()));
  t.data = v;
  return t;
}

Tensor Tensor::col_vector(const std::vector<double>& v) {
  Tensor t(static_cast<int>(v.size()), 1);
  t.data = v;
  return t;
}

std::string Tensor::shape_str() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%dx%d", rows, cols);
  return buf;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw InputError("matmul: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows, b.cols);
  linalg::matmul(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, out.data.data());
  return out;
}

Tensor transposed(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor symmetrized(const Tensor& a) {
  if (a.rows != a.cols) throw InputError("symmetrized: matrix not square: " + a.shape_str());
  Tensor out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(i, j) = 0.5 * (a.at(i, j) + a.at(j, i));
  return out;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double x : a.data) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw InputError("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace sgdd
