#pragma once

#include "stealsim/common.hpp"

#include <cstdint>
#include <vector>

namespace stealsim {

// Vandermonde-style design: column j holds x^j for j = 0..order.
Matrix polynomial_features(const Vector& x, int order);

// Least squares via column-pivoted QR. Throws singular_design_error when the
// design is numerically rank deficient (R-diagonal ratio above 1e12).
Vector ols_solve(const Matrix& X, const Vector& y);

// Orthogonal projection of y onto the column span of X (rank-deficient X is
// fine; minimum-norm coefficients are used internally).
Vector project_onto_columns(const Matrix& X, const Vector& y);

// --- Elastic net -----------------------------------------------------------
//
// Minimises (1/(2n)) * ||y - X b - b0||^2 + lambda1 * ||b||_1
//           + (lambda2/2) * ||b||_2^2
// by cyclic coordinate descent with exact soft-threshold updates. With
// standardize=true the solver centers y, scales columns to unit 1/n-variance,
// solves in the scaled space, and back-transforms (the penalties apply to the
// standardized coefficients, as is conventional); an intercept is returned.
// With standardize=false the problem is solved as stated with b0 fixed at 0.

struct EnetFit {
  Vector beta;
  double intercept = 0.0;
  double kkt_residual = 0.0;  // max over coordinates of the stationarity gap
  int sweeps = 0;
};

EnetFit coordinate_descent_enet(const Matrix& X, const Vector& y, double lambda1, double lambda2,
                                bool standardize = true, int max_sweeps = 10000,
                                double tol = 1e-6);

// Smallest lambda1 that zeroes every coefficient (on standardized columns).
double enet_lambda_max(const Matrix& X, const Vector& y);

// Log-spaced lambda1 grid of `count` values from lambda_max down to
// min_ratio * lambda_max.
std::vector<double> default_lambda_grid(const Matrix& X, const Vector& y, int count,
                                        double min_ratio);

struct CvChoice {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  EnetFit fit;          // refit on the full data at the chosen pair
  double cv_error = 0.0;
  int skipped = 0;      // grid points dropped because a fold failed to converge
};

// K-fold cross-validation over the (lambda1, lambda2) grid. Folds are a
// seeded shuffle split into contiguous blocks; candidates are scored by mean
// held-out squared error. Ties go to the larger lambda1, then larger lambda2.
// lambda2 values are given as ratios multiplying lambda1.
CvChoice kfold_cv_enet(const Matrix& X, const Vector& y, const std::vector<double>& lambda1_grid,
                       const std::vector<double>& lambda2_ratios, int folds, std::uint64_t seed);

}  // namespace stealsim
