#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace sgdd {

// Dense row-major 2-D tensor of 64-bit floats. The whole toolkit runs in
// double precision; eigendecomposition and second-order gradients are not
// stable enough in float at the matrix sizes we care about.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;  // same shape when present

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0);

  static Tensor zeros(int r, int c) { return Tensor(r, c, 0.0); }
  static Tensor ones(int r, int c) { return Tensor(r, c, 1.0); }
  static Tensor identity(int n);
  static Tensor from(int r, int c, std::initializer_list<double> v);
  static Tensor row_vector(const std::vector<double>& v);
  static Tensor col_vector(const std::vector<double>& v);

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
};

// Value-level helpers (no autodiff). Shapes are checked and throw InputError.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transposed(const Tensor& a);
Tensor symmetrized(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace sgdd
