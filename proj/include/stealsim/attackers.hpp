#pragma once

#include "stealsim/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace stealsim {

// --- Attack specifications --------------------------------------------------

struct KnnAttack {
  std::optional<int> k;  // fixed k; empty = pick the best k over the grid
                         // using clean held-out validation data
  std::vector<int> grid;  // empty = default geometric grid for the sample size
  int n_validation = 500;
};

struct PolyGicAttack {
  enum class Penalty { Aic, Bic };
  enum class VarianceRule { LargestModel, PerModel };
  Penalty penalty = Penalty::Aic;
  VarianceRule variance_rule = VarianceRule::LargestModel;
  std::optional<int> max_order;     // default: ceil(n^(1/3))
  std::optional<double> lambda;     // overrides the penalty rule when set
};

struct LassoAttack {
  int folds = 5;
  int n_lambda = 50;
  double lambda_min_ratio = 1e-3;
  bool elastic_net = false;  // adds the lambda2 = 0.5*lambda1 column to the grid
};

struct LinearErmAttack {};

struct NoAttack {};

using AttackSpec = std::variant<KnnAttack, PolyGicAttack, LassoAttack, LinearErmAttack, NoAttack>;

void validate_attack(const AttackSpec& spec);
std::string attack_label(const AttackSpec& spec);

// --- Fit operations ---------------------------------------------------------

// k-nearest-neighbor regressor: predict the mean response of the k queries
// nearest in Euclidean norm; distance ties break toward the smaller index.
FittedModel knn_fit(const QuerySet& queries, const ResponseVector& responses, int k);

// Geometric grid of candidate k values in [1, n].
std::vector<int> default_k_grid(int n);

// Pick the k minimizing squared error against clean validation responses
// (attacker-favorable oracle choice), then return that fit.
FittedModel knn_best_over_grid(const QuerySet& queries, const ResponseVector& responses,
                               const std::vector<int>& grid, const QuerySet& validation_queries,
                               const Vector& validation_values);

// Polynomial regression with information-criterion order selection: for each
// order q up to the cap, score = RSS_q/n + lambda * sigma2 * q / n; the fit
// minimizing the score wins, ties toward smaller q.
FittedModel poly_gic_fit(const QuerySet& queries, const ResponseVector& responses,
                         const PolyGicAttack& spec = {});

// L1/L1+L2-penalized linear regression with k-fold cross-validated penalties;
// metadata records the selected variable set (1-based nonzero coefficients).
FittedModel lasso_fit(const QuerySet& queries, const ResponseVector& responses,
                      const LassoAttack& spec, std::uint64_t seed);

// Approximate empirical-risk-minimizing halfspace through the origin:
// logistic-loss gradient descent, then a seeded local search that only ever
// lowers the training zero-one error.
FittedModel linear_class_erm_fit(const QuerySet& queries, const ResponseVector& labels,
                                 std::uint64_t seed);

}  // namespace stealsim
