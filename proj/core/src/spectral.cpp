#include "sgdd/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "sgdd/errors.hpp"
#include "sgdd/linalg.hpp"

namespace sgdd {

SpectralDecomposition eigendecompose(const Tensor& laplacian) {
  if (laplacian.rows != laplacian.cols || laplacian.rows == 0)
    throw InputError("eigendecompose: matrix not square: " + laplacian.shape_str());
  double asym = 0.0;
  for (int i = 0; i < laplacian.rows; ++i)
    for (int j = i + 1; j < laplacian.cols; ++j)
      asym = std::max(asym, std::abs(laplacian.at(i, j) - laplacian.at(j, i)));
  if (asym > 1e-8)
    throw InputError("eigendecompose: matrix not symmetric (max asymmetry " +
                     std::to_string(asym) + ")");

  SpectralDecomposition dec;
  dec.laplacian = laplacian;
  std::vector<double> vecs;
  linalg::jacobi_eigen(laplacian.rows, laplacian.data, dec.eigenvalues, vecs);
  dec.eigenvectors = Tensor(laplacian.rows, laplacian.rows);
  dec.eigenvectors.data = std::move(vecs);
  return dec;
}

std::vector<double> led(const Tensor& x, const SpectralDecomposition& dec) {
  const int n = dec.eigenvectors.rows;
  if (x.rows != n)
    throw InputError("led: signal has " + std::to_string(x.rows) + " rows, expected " +
                     std::to_string(n));
  const Tensor xhat = matmul(transposed(dec.eigenvectors), x);
  std::vector<double> eta(n, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = 0.0;
    for (int j = 0; j < xhat.cols; ++j) e += xhat.at(i, j) * xhat.at(i, j);
    eta[i] = e;
    total += e;
  }
  if (!(total > 0.0)) throw InputError("led: all-zero signal, energy shares undefined");
  for (double& e : eta) e /= total;
  return eta;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  const size_t m = samples.size();
  if (m == 0) throw InputError("silverman_bandwidth: no samples");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  const double sigma = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;

  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(m - 1);
    const size_t lo = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    return lo + 1 < m ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
  };
  const double iqr = m > 1 ? quantile(0.75) - quantile(0.25) : 0.0;

  const double spread = std::min(sigma, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
  return std::max(h, 1e-4);
}

std::vector<double> kde_density_weighted(const std::vector<double>& samples,
                                         const std::vector<double>& weights, double h,
                                         const std::vector<double>& grid) {
  if (samples.empty()) throw InputError("kde_density: no samples");
  if (!(h > 0.0)) throw InputError("kde_density: bandwidth must be positive");
  if (!weights.empty() && weights.size() != samples.size())
    throw InputError("kde_density: weight count mismatch");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InputError("kde_density: grid not strictly increasing");

  constexpr double two_pi = 6.283185307179586476925286766559;
  const double inv_norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(two_pi));
  std::vector<double> density(grid.size(), 0.0);
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    double acc = 0.0;
    for (size_t si = 0; si < samples.size(); ++si) {
      const double u = (grid[gi] - samples[si]) / h;
      const double k = std::exp(-0.5 * u * u);
      acc += weights.empty() ? k : weights[si] * k;
    }
    density[gi] = acc * inv_norm;
  }
  double total = 0.0;
  for (double d : density) total += d;
  if (total > 0.0)
    for (double& d : density) d /= total;
  return density;
}

std::vector<double> kde_density(const std::vector<double>& samples, double h,
                                const std::vector<double>& grid) {
  return kde_density_weighted(samples, {}, h, grid);
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.empty())
    throw InputError("js_divergence: distributions must have equal nonzero length");
  double sp = 0.0, sq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw InputError("js_divergence: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw InputError("js_divergence: inputs must sum to 1 within 1e-9");

  const double inv_log2 = 1.0 / std::log(2.0);
  double js = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m) * inv_log2;
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m) * inv_log2;
  }
  return std::clamp(js, 0.0, 1.0);
}

namespace {

LedProfile make_profile(const std::vector<double>& eta, const std::vector<double>& eigenvalues,
                        LedKdeMode mode) {
  LedProfile prof;
  prof.eta = eta;
  prof.samples = mode == LedKdeMode::Masses ? eta : eigenvalues;
  return prof;
}

}  // namespace

ScResult shift_coefficient_matrices(const Tensor& lap_a, const Tensor& feat_a,
                                    const Tensor& lap_b, const Tensor& feat_b, LedKdeMode mode) {
  const SpectralDecomposition dec_a = eigendecompose(lap_a);
  const SpectralDecomposition dec_b = eigendecompose(lap_b);

  ScResult r;
  r.mode = mode;
  r.a = make_profile(led(feat_a, dec_a), dec_a.eigenvalues, mode);
  r.b = make_profile(led(feat_b, dec_b), dec_b.eigenvalues, mode);

  std::vector<double> pooled = r.a.samples;
  pooled.insert(pooled.end(), r.b.samples.begin(), r.b.samples.end());
  const double h = silverman_bandwidth(pooled);
  const double lo = *std::min_element(pooled.begin(), pooled.end()) - 3.0 * h;
  const double hi = *std::max_element(pooled.begin(), pooled.end()) + 3.0 * h;

  std::vector<double> grid(kScGridPoints);
  for (int i = 0; i < kScGridPoints; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (kScGridPoints - 1);

  for (LedProfile* prof : {&r.a, &r.b}) {
    prof->bandwidth = h;
    prof->grid = grid;
    prof->density = mode == LedKdeMode::Masses
                        ? kde_density(prof->samples, h, grid)
                        : kde_density_weighted(prof->samples, prof->eta, h, grid);
  }
  r.sc = js_divergence(r.a.density, r.b.density);
  return r;
}

ScResult shift_coefficient(const Graph& g, const CondensedGraph& s, const Tensor& features_g,
                           const Tensor& features_s, LedKdeMode mode) {
  return shift_coefficient_matrices(normalized_laplacian(g), features_g,
                                    normalized_laplacian(s), features_s, mode);
}

}  // namespace sgdd
