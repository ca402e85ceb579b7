#pragma once

#include <vector>

#include "sgdd/graph.hpp"
#include "sgdd/tensor.hpp"

namespace sgdd {

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Tensor eigenvectors;              // orthonormal, one per column
  Tensor laplacian;                 // the decomposed matrix
};

// Full eigenpairs by cyclic Jacobi. Throws InputError when the input is not
// symmetric (max asymmetry > 1e-8).
SpectralDecomposition eigendecompose(const Tensor& laplacian);

// Per-eigenmode share of a signal's energy after the graph Fourier transform:
// eta_n = |x_hat_n|^2 / sum_i |x_hat_i|^2 with x_hat = U^T X. For d > 1 the
// squared l2 norm across feature columns is used. Throws InputError on an
// all-zero signal.
std::vector<double> led(const Tensor& x, const SpectralDecomposition& dec);

// h = 0.9 * min(sigma, IQR/1.34) * m^(-1/5), floored at 1e-4.
double silverman_bandwidth(const std::vector<double>& samples);

// Gaussian KDE evaluated on the grid and renormalized to sum 1 (a discrete
// distribution, ready for the JS divergence). Grid must be strictly
// increasing; optional nonnegative weights reweight the kernel sum.
std::vector<double> kde_density(const std::vector<double>& samples, double h,
                                const std::vector<double>& grid);
std::vector<double> kde_density_weighted(const std::vector<double>& samples,
                                         const std::vector<double>& weights, double h,
                                         const std::vector<double>& grid);

// Jensen-Shannon divergence with base-2 logarithm, so the range is [0, 1].
// Inputs must be same-length distributions summing to 1 within 1e-9.
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct LedProfile {
  std::vector<double> eta;      // energy shares, sum 1
  std::vector<double> samples;  // the values fed to the KDE
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;  // normalized over the grid
};

// What gets smoothed by the KDE. The default follows the shift-coefficient
// formula literally (kernels over the LED masses themselves); the
// eigenvalue-weighted variant is a diagnostic alternative.
enum class LedKdeMode { Masses, EnergyWeightedEigenvalues };

struct ScResult {
  double sc = 0.0;
  LedKdeMode mode = LedKdeMode::Masses;
  LedProfile a, b;
};

// LED shift coefficient: JS divergence between the KDE-smoothed LED profiles
// of two graphs on a shared 512-point grid spanning [min-3h, max+3h], with a
// Silverman bandwidth computed on the pooled samples. Deterministic; 0 for
// identical inputs.
ScResult shift_coefficient_matrices(const Tensor& lap_a, const Tensor& feat_a,
                                    const Tensor& lap_b, const Tensor& feat_b,
                                    LedKdeMode mode = LedKdeMode::Masses);
ScResult shift_coefficient(const Graph& g, const CondensedGraph& s, const Tensor& features_g,
                           const Tensor& features_s, LedKdeMode mode = LedKdeMode::Masses);

inline constexpr int kScGridPoints = 512;

}  // namespace sgdd
