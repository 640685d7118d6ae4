#pragma once

#include "stealsim/core.hpp"

#include <cstdint>
#include <utility>
#include <variant>

namespace stealsim {

// Query-generating distributions used by the built-in scenarios.
struct BetaDist {
  double alpha = 1.0;
  double beta = 1.0;
};

struct UniformCube {
  int dim = 1;  // uniform on [0,1]^dim
};

struct StandardNormal {
  int dim = 1;
};

// Grouped correlated design: d=40; columns 1-5, 6-10, 11-15 share one latent
// standard normal each (per row) plus N(0, 0.01) jitter; columns 16-40 are
// independent standard normals.
struct HighDimGrouped {};

using QueryDistribution = std::variant<BetaDist, UniformCube, StandardNormal, HighDimGrouped>;

int query_dim(const QueryDistribution& dist);
void validate_distribution(const QueryDistribution& dist);

QuerySet sample_queries(const QueryDistribution& dist, int n, std::uint64_t seed);

// The quadratic regression target (2x-1)^2, coefficients (1, -4, 4).
PolynomialModel make_poly_scenario_target();

// Sparse linear target for the grouped design: beta_i = 3 for i <= 15, else 0.
LinearModel make_highdim_model();

// Grouped-design training set (n=50, d=40) paired with the sparse target.
std::pair<QuerySet, LinearModel> make_highdim_example1(std::uint64_t seed);

// Var of the grouped-design target output (closed form), used to scale budgets.
double highdim_signal_variance();

// Synthetic softmax probability classifier with seeded standard-normal
// weights; stand-in target for the probability-response defenses.
ProbClassifierModel make_prob_classifier(int d, int K, std::uint64_t seed);

}  // namespace stealsim
