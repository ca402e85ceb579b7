#pragma once

#include <vector>

namespace sgdd::linalg {

// out = a (ra x ca) * b (ca x cb), row-major. out must hold ra*cb doubles.
void matmul(const double* a, int ra, int ca, const double* b, int cb, double* out);

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
// Eigenvalues ascending; eigenvectors in the columns of `vecs` (also n x n).
// The input is treated as exactly symmetric (upper triangle mirrored).
// Throws NumericalError if the sweep limit is hit before convergence.
void jacobi_eigen(int n, const std::vector<double>& a, std::vector<double>& vals,
                  std::vector<double>& vecs, int max_sweeps = 64);

// Inverse of a symmetric positive definite matrix via Cholesky.
// Throws NumericalError if the matrix is not positive definite.
std::vector<double> spd_inverse(int n, const std::vector<double>& k);

}  // namespace sgdd::linalg
