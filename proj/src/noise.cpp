#include "stealsim/noise.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

namespace stealsim {

Vector sample_iid_gaussian(int n, double variance, std::uint64_t seed) {
  if (n < 0) throw config_error("negative sample count");
  if (!(variance >= 0.0)) throw config_error("noise variance must be nonnegative");
  Vector out(n);
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

double hurst_from_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw config_error("long-range decay exponent must lie in (0,1)");
  return 1.0 - gamma / 2.0;
}

double fgn_autocovariance(double variance, double hurst, int lag) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw config_error("Hurst index must lie in (0,1)");
  if (!(variance >= 0.0)) throw config_error("noise variance must be nonnegative");
  if (lag < 0) lag = -lag;
  if (lag == 0) return variance;
  const double k = lag;
  const double h2 = 2.0 * hurst;
  return 0.5 * variance *
         (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(k - 1.0, h2));
}

Vector sample_fgn(int n, double variance, double hurst, std::uint64_t seed) {
  if (n < 0) throw config_error("negative sample count");
  if (n == 0) return Vector(0);
  if (variance == 0.0) return Vector::Zero(n);
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (n == 1) {
    Vector out(1);
    out[0] = std::sqrt(variance) * normal(rng);
    return out;
  }
  // Embed the n x n Toeplitz covariance in a circulant of even size m >= 2(n-1),
  // m a power of two so the transforms stay exact and fast.
  int m = 2;
  while (m < 2 * (n - 1)) m *= 2;
  const int half = m / 2;
  std::vector<std::complex<double>> row(m);
  for (int k = 0; k <= half; ++k) row[k] = fgn_autocovariance(variance, hurst, k);
  for (int k = half + 1; k < m; ++k) row[k] = row[m - k];

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> eig(m);
  fft.fwd(eig, row);

  double lam_max = 0.0;
  for (const auto& e : eig) lam_max = std::max(lam_max, e.real());
  std::vector<double> lam(m);
  for (int j = 0; j < m; ++j) {
    double v = eig[j].real();
    if (v < 0.0) {
      if (v < -1e-8 * std::max(lam_max, 1.0))
        throw calibration_error("circulant embedding is not nonnegative definite");
      v = 0.0;
    }
    lam[j] = v;
  }

  // Hermitian-symmetric complex Gaussian spectrum, then one forward transform.
  std::vector<std::complex<double>> w(m);
  w[0] = std::sqrt(lam[0] / m) * normal(rng);
  w[half] = std::sqrt(lam[half] / m) * normal(rng);
  for (int j = 1; j < half; ++j) {
    double a = normal(rng), b = normal(rng);
    double s = std::sqrt(lam[j] / (2.0 * m));
    w[j] = std::complex<double>(s * a, s * b);
    w[m - j] = std::conj(w[j]);
  }
  std::vector<std::complex<double>> x(m);
  fft.fwd(x, w);
  Vector out(n);
  for (int i = 0; i < n; ++i) out[i] = x[i].real();
  return out;
}

Vector sample_long_range(int n, double variance, double gamma, std::uint64_t seed) {
  return sample_fgn(n, variance, hurst_from_gamma(gamma), seed);
}

Vector assign_noise_by_query_order(const Vector& noise, const QuerySet& queries, int coord) {
  if (noise.size() != queries.n()) throw config_error("noise length must equal query count");
  if (coord < 0 || coord >= queries.d()) throw config_error("sort coordinate out of range");
  const int n = queries.n();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return queries.points(a, coord) < queries.points(b, coord);
  });
  Vector out(n);
  for (int i = 0; i < n; ++i) out[order[i]] = noise[i];
  return out;
}

}  // namespace stealsim
