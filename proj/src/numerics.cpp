#include "stealsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace stealsim {

Matrix polynomial_features(const Vector& x, int order) {
  if (order < 0) throw config_error("polynomial order must be nonnegative");
  const int n = static_cast<int>(x.size());
  Matrix phi(n, order + 1);
  phi.col(0).setOnes();
  for (int j = 1; j <= order; ++j) phi.col(j) = phi.col(j - 1).cwiseProduct(x);
  return phi;
}

Vector ols_solve(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw config_error("design and response sizes disagree");
  if (X.rows() < X.cols()) throw singular_design_error("fewer rows than columns in least squares");
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  const auto& R = qr.matrixR();
  const int k = static_cast<int>(X.cols());
  double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    double d = std::abs(R(j, j));
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  if (dmin == 0.0 || dmax / dmin > 1e12)
    throw singular_design_error("design matrix is numerically rank deficient");
  return qr.solve(y);
}

Vector project_onto_columns(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw config_error("projection dimensions disagree");
  if (X.cols() == 0) return Vector::Zero(y.size());
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
  return X * cod.solve(y);
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct CdResult {
  Vector beta;
  double kkt = 0.0;
  int sweeps = 0;
};

double cd_objective(const Vector& r, const Vector& beta, double l1, double l2, int n) {
  return r.squaredNorm() / (2.0 * n) + l1 * beta.lpNorm<1>() + 0.5 * l2 * beta.squaredNorm();
}

double cd_kkt(const Matrix& X, const Vector& r, const Vector& beta, double l1, double l2, int n) {
  Vector g = X.transpose() * r / n;  // = (1/n) X^T (y - X beta)
  double worst = 0.0;
  for (int j = 0; j < beta.size(); ++j) {
    double gap;
    if (beta[j] != 0.0) {
      gap = std::abs(-g[j] + l2 * beta[j] + l1 * (beta[j] > 0 ? 1.0 : -1.0));
    } else {
      gap = std::max(0.0, std::abs(g[j]) - l1);
    }
    worst = std::max(worst, gap);
  }
  return worst;
}

double kkt_from_gradient(const Vector& g, const Vector& beta, double l1, double l2) {
  double worst = 0.0;
  for (int j = 0; j < beta.size(); ++j) {
    double gap;
    if (beta[j] != 0.0) {
      gap = std::abs(-g[j] + l2 * beta[j] + l1 * (beta[j] > 0 ? 1.0 : -1.0));
    } else {
      gap = std::max(0.0, std::abs(g[j]) - l1);
    }
    worst = std::max(worst, gap);
  }
  return worst;
}

// Cyclic coordinate descent in covariance form: maintain the smooth-part
// gradient g = X^T(y - X beta)/n through precomputed Gram products, so each
// coordinate update and the per-sweep stationarity check cost O(d) instead of
// O(n d).  Preferred whenever the Gram matrix is small enough to keep around.
CdResult cd_solve_gram(const Matrix& X, const Vector& y, double l1, double l2, Vector beta,
                       int max_sweeps, double tol) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const Matrix G = X.transpose() * X / static_cast<double>(n);
  const Vector q = X.transpose() * y / static_cast<double>(n);
  const double c0 = y.squaredNorm() / (2.0 * n);
  Vector g = q - G * beta;
  auto objective = [&](void) {
    return c0 - 0.5 * beta.dot(q + g) + l1 * beta.lpNorm<1>() + 0.5 * l2 * beta.squaredNorm();
  };
  double prev_obj = objective();
  CdResult out;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (int j = 0; j < d; ++j) {
      const double vj = G(j, j);
      if (vj < 1e-300) {
        if (beta[j] != 0.0) {
          g += G.col(j) * beta[j];
          beta[j] = 0.0;
        }
        continue;
      }
      const double z = g[j] + vj * beta[j];
      const double nb = soft_threshold(z, l1) / (vj + l2);
      if (nb != beta[j]) {
        g -= G.col(j) * (nb - beta[j]);
        beta[j] = nb;
      }
    }
    // Exact coordinate minimization can never increase the objective; a rise
    // beyond float noise means the gradient bookkeeping broke.
    double obj = objective();
    if (obj > prev_obj + 1e-7 * (1.0 + std::abs(prev_obj)))
      throw std::logic_error("coordinate descent objective increased");
    prev_obj = obj;
    if (kkt_from_gradient(g, beta, l1, l2) <= tol) {
      g = q - G * beta;  // confirm against a freshly computed gradient
      double kkt = kkt_from_gradient(g, beta, l1, l2);
      if (kkt <= tol) {
        out.beta = std::move(beta);
        out.kkt = kkt;
        out.sweeps = sweep;
        return out;
      }
    }
    if (sweep % 64 == 0) g = q - G * beta;  // shed accumulated drift
  }
  throw convergence_error("coordinate descent did not reach the stationarity tolerance",
                          kkt_from_gradient(q - G * beta, beta, l1, l2));
}

// Residual-form fallback for designs too wide to hold a Gram matrix.
CdResult cd_solve_residual(const Matrix& X, const Vector& y, double l1, double l2, Vector beta,
                           int max_sweeps, double tol) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Vector colsq(d);
  for (int j = 0; j < d; ++j) colsq[j] = X.col(j).squaredNorm() / n;
  Vector r = y - X * beta;
  double prev_obj = cd_objective(r, beta, l1, l2, n);
  CdResult out;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (int j = 0; j < d; ++j) {
      const double vj = colsq[j];
      if (vj < 1e-300) {
        if (beta[j] != 0.0) {
          r += X.col(j) * beta[j];
          beta[j] = 0.0;
        }
        continue;
      }
      const double z = X.col(j).dot(r) / n + vj * beta[j];
      const double nb = soft_threshold(z, l1) / (vj + l2);
      if (nb != beta[j]) {
        r += X.col(j) * (beta[j] - nb);
        beta[j] = nb;
      }
    }
    // Exact coordinate minimization can never increase the objective; a rise
    // beyond float noise means the residual bookkeeping broke.
    double obj = cd_objective(r, beta, l1, l2, n);
    if (obj > prev_obj + 1e-7 * (1.0 + std::abs(prev_obj)))
      throw std::logic_error("coordinate descent objective increased");
    prev_obj = obj;
    double kkt = cd_kkt(X, r, beta, l1, l2, n);
    if (kkt <= tol) {
      out.beta = std::move(beta);
      out.kkt = kkt;
      out.sweeps = sweep;
      return out;
    }
    if (sweep % 64 == 0) r = y - X * beta;  // shed accumulated drift
  }
  throw convergence_error("coordinate descent did not reach the stationarity tolerance",
                          cd_kkt(X, y - X * beta, beta, l1, l2, n));
}

CdResult cd_solve(const Matrix& X, const Vector& y, double l1, double l2, Vector beta,
                  int max_sweeps, double tol) {
  if (X.cols() <= 512) return cd_solve_gram(X, y, l1, l2, std::move(beta), max_sweeps, tol);
  return cd_solve_residual(X, y, l1, l2, std::move(beta), max_sweeps, tol);
}

struct Standardized {
  Matrix Xs;
  Vector ys;
  Vector col_mean;
  Vector col_scale;  // sqrt of 1/n-variance; 0 marks a dead column
  double y_mean = 0.0;
};

Standardized standardize(const Matrix& X, const Vector& y) {
  Standardized s;
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  s.col_mean = X.colwise().mean();
  s.Xs = X.rowwise() - s.col_mean.transpose();
  s.col_scale.resize(d);
  for (int j = 0; j < d; ++j) {
    double v = s.Xs.col(j).squaredNorm() / n;
    double sc = std::sqrt(v);
    if (sc < 1e-12) {
      s.col_scale[j] = 0.0;
      s.Xs.col(j).setZero();
    } else {
      s.col_scale[j] = sc;
      s.Xs.col(j) /= sc;
    }
  }
  s.y_mean = y.mean();
  s.ys = y.array() - s.y_mean;
  return s;
}

EnetFit back_transform(const Standardized& s, CdResult cd) {
  EnetFit fit;
  const int d = static_cast<int>(s.col_scale.size());
  fit.beta.resize(d);
  for (int j = 0; j < d; ++j)
    fit.beta[j] = s.col_scale[j] > 0.0 ? cd.beta[j] / s.col_scale[j] : 0.0;
  fit.intercept = s.y_mean - fit.beta.dot(s.col_mean);
  fit.kkt_residual = cd.kkt;
  fit.sweeps = cd.sweeps;
  return fit;
}

}  // namespace

EnetFit coordinate_descent_enet(const Matrix& X, const Vector& y, double lambda1, double lambda2,
                                bool standardize_data, int max_sweeps, double tol) {
  if (X.rows() != y.size()) throw config_error("design and response sizes disagree");
  if (X.rows() == 0 || X.cols() == 0) throw config_error("empty design in elastic net");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw config_error("penalties must be nonnegative");
  const int d = static_cast<int>(X.cols());
  if (!standardize_data) {
    CdResult cd = cd_solve(X, y, lambda1, lambda2, Vector::Zero(d), max_sweeps, tol);
    EnetFit fit;
    fit.beta = std::move(cd.beta);
    fit.intercept = 0.0;
    fit.kkt_residual = cd.kkt;
    fit.sweeps = cd.sweeps;
    return fit;
  }
  Standardized s = standardize(X, y);
  CdResult cd = cd_solve(s.Xs, s.ys, lambda1, lambda2, Vector::Zero(d), max_sweeps, tol);
  return back_transform(s, std::move(cd));
}

double enet_lambda_max(const Matrix& X, const Vector& y) {
  Standardized s = standardize(X, y);
  const int n = static_cast<int>(X.rows());
  double m = (s.Xs.transpose() * s.ys).cwiseAbs().maxCoeff() / n;
  return std::max(m, 1e-12);
}

std::vector<double> default_lambda_grid(const Matrix& X, const Vector& y, int count,
                                        double min_ratio) {
  if (count < 1) throw config_error("lambda grid needs at least one value");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw config_error("lambda min ratio out of range");
  double lmax = enet_lambda_max(X, y);
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lmax;
    return grid;
  }
  double step = std::log(min_ratio) / (count - 1);
  for (int i = 0; i < count; ++i) grid[i] = lmax * std::exp(step * i);
  return grid;
}

CvChoice kfold_cv_enet(const Matrix& X, const Vector& y, const std::vector<double>& lambda1_grid,
                       const std::vector<double>& lambda2_ratios, int folds, std::uint64_t seed) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (folds < 2) throw config_error("cross-validation needs at least 2 folds");
  if (n < folds) throw config_error("fewer observations than folds");
  if (lambda1_grid.empty() || lambda2_ratios.empty())
    throw config_error("cross-validation grids must be non-empty");
  // Grids are expected sorted; the path below walks lambda1 largest-first.
  std::vector<double> l1s = lambda1_grid;
  std::sort(l1s.begin(), l1s.end(), std::greater<>());

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const size_t nc = l1s.size() * lambda2_ratios.size();
  std::vector<double> err(nc, 0.0);
  std::vector<bool> valid(nc, true);

  for (int f = 0; f < folds; ++f) {
    const int lo = static_cast<int>(static_cast<long long>(f) * n / folds);
    const int hi = static_cast<int>(static_cast<long long>(f + 1) * n / folds);
    const int nho = hi - lo;
    const int ntr = n - nho;
    Matrix Xtr(ntr, d), Xho(nho, d);
    Vector ytr(ntr), yho(nho);
    int ti = 0;
    for (int i = 0; i < n; ++i) {
      if (i >= lo && i < hi) {
        Xho.row(i - lo) = X.row(perm[i]);
        yho[i - lo] = y[perm[i]];
      } else {
        Xtr.row(ti) = X.row(perm[i]);
        ytr[ti] = y[perm[i]];
        ++ti;
      }
    }
    Standardized s = standardize(Xtr, ytr);
    for (size_t r2 = 0; r2 < lambda2_ratios.size(); ++r2) {
      Vector warm = Vector::Zero(d);
      for (size_t i1 = 0; i1 < l1s.size(); ++i1) {
        const size_t c = r2 * l1s.size() + i1;
        const double l1 = l1s[i1];
        const double l2 = l1 * lambda2_ratios[r2];
        CdResult cd;
        try {
          cd = cd_solve(s.Xs, s.ys, l1, l2, warm, 100000, 1e-6);
        } catch (const convergence_error&) {
          valid[c] = false;
          warm.setZero();
          continue;
        }
        warm = cd.beta;
        EnetFit fit = back_transform(s, cd);
        Vector pred = (Xho * fit.beta).array() + fit.intercept;
        if (valid[c]) err[c] += (pred - yho).squaredNorm() / nho;
      }
    }
  }

  CvChoice choice;
  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  int skipped = 0;
  for (size_t r2 = 0; r2 < lambda2_ratios.size(); ++r2) {
    for (size_t i1 = 0; i1 < l1s.size(); ++i1) {
      const size_t c = r2 * l1s.size() + i1;
      if (!valid[c]) {
        ++skipped;
        continue;
      }
      const double mean_err = err[c] / folds;
      const double l1 = l1s[i1];
      const double l2 = l1 * lambda2_ratios[r2];
      bool better = !found || mean_err < best ||
                    (mean_err == best &&
                     (l1 > choice.lambda1 || (l1 == choice.lambda1 && l2 > choice.lambda2)));
      if (better) {
        found = true;
        best = mean_err;
        choice.lambda1 = l1;
        choice.lambda2 = l2;
        choice.cv_error = mean_err;
      }
    }
  }
  if (!found)
    throw convergence_error("every cross-validation grid point failed to converge", 0.0);
  choice.skipped = skipped;
  choice.fit = coordinate_descent_enet(X, y, choice.lambda1, choice.lambda2, true, 100000);
  return choice;
}

}  // namespace stealsim
