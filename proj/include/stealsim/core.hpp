#pragma once

#include "stealsim/common.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace stealsim {

// A batch of query points, one per row.
struct QuerySet {
  Matrix points;  // n x d

  int n() const { return static_cast<int>(points.rows()); }
  int d() const { return static_cast<int>(points.cols()); }
  Vector row(int i) const { return points.row(i).transpose(); }
};

void validate_queries(const QuerySet& q);

// What the defended responses mean. Regression values, hard labels in {0,1},
// or per-class probability rows.
enum class ResponseKind { Regression, Labels, Probabilities };

struct ResponseVector {
  ResponseKind kind = ResponseKind::Regression;
  Vector values;  // used by Regression and Labels
  Matrix probs;   // used by Probabilities: n x K rows on the simplex

  int size() const {
    return kind == ResponseKind::Probabilities ? static_cast<int>(probs.rows())
                                               : static_cast<int>(values.size());
  }
  static ResponseVector regression(Vector v);
  static ResponseVector labels(Vector v);
  static ResponseVector probabilities(Matrix p);
};

void validate_responses(const ResponseVector& r, int expected_n);

// --- Target models ---------------------------------------------------------

// Univariate polynomial f(x) = sum_j coeffs[j] * x^j.
struct PolynomialModel {
  Vector coeffs;  // degree = coeffs.size() - 1

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  double value(double x) const;
};

// Linear regression f(x) = beta . x (no intercept; designs carry their own
// centering if needed).
struct LinearModel {
  Vector beta;
};

// Halfspace classifier: label(x) = 1{beta . x + intercept >= 0}.
struct LinearClassifierModel {
  Vector beta;
  double intercept = 0.0;

  double label(const Vector& x) const { return beta.dot(x) + intercept >= 0.0 ? 1.0 : 0.0; }
};

// Softmax probability model over K classes: p(x) = softmax(W x + b).
struct ProbClassifierModel {
  Matrix weights;  // K x d
  Vector bias;     // K
  // Generator provenance, set when the model comes from the seeded factory;
  // lets scenario configs carrying such a target round-trip through text.
  int gen_dim = 0;
  int gen_classes = 0;
  std::uint64_t gen_seed = 0;

  int num_classes() const { return static_cast<int>(weights.rows()); }
  Vector probs(const Vector& x) const;
};

using TargetModel =
    std::variant<PolynomialModel, LinearModel, LinearClassifierModel, ProbClassifierModel>;

int model_input_dim(const TargetModel& m);
void validate_target(const TargetModel& m);
bool is_regression_target(const TargetModel& m);
bool is_label_target(const TargetModel& m);
bool is_prob_target(const TargetModel& m);

// Clean (undefended) responses of the target on a query batch.
ResponseVector evaluate_target(const TargetModel& m, const QuerySet& q);

// --- Losses and budgets -----------------------------------------------------

enum class LossFunction { SquaredError, ZeroOne, ProbSquaredError };

LossFunction default_utility_loss(const TargetModel& m);

// Mean per-query utility loss between clean and perturbed responses.
double empirical_utility_loss(const ResponseVector& clean, const ResponseVector& perturbed,
                              LossFunction loss);

struct UtilityBudget {
  double u_n = 0.0;  // mean per-query utility loss the defender may spend
};

void validate_budget(const UtilityBudget& b);

// --- Fitted models ----------------------------------------------------------

// Everything an attacker reports besides the predictor itself.
struct FitMetadata {
  std::optional<int> selected_order;           // polynomial attacks
  std::optional<std::vector<int>> selected_vars;  // sparse attacks, 1-based
  std::optional<int> knn_k;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::vector<double> scores;  // per-candidate selection scores, if any
  bool warning = false;        // soft convergence trouble, fit still returned
};

struct FittedModel {
  std::function<double(const Vector&)> predict;
  FitMetadata meta;
};

Vector predict_all(const FittedModel& fm, const QuerySet& q);

}  // namespace stealsim
