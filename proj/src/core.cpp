#include "stealsim/core.hpp"

#include <cmath>

namespace stealsim {

void validate_queries(const QuerySet& q) {
  if (q.points.rows() == 0 || q.points.cols() == 0)
    throw config_error("query set must be non-empty with at least one coordinate");
  if (!q.points.allFinite()) throw config_error("query set contains non-finite values");
}

ResponseVector ResponseVector::regression(Vector v) {
  ResponseVector r;
  r.kind = ResponseKind::Regression;
  r.values = std::move(v);
  return r;
}

ResponseVector ResponseVector::labels(Vector v) {
  ResponseVector r;
  r.kind = ResponseKind::Labels;
  r.values = std::move(v);
  return r;
}

ResponseVector ResponseVector::probabilities(Matrix p) {
  ResponseVector r;
  r.kind = ResponseKind::Probabilities;
  r.probs = std::move(p);
  return r;
}

void validate_responses(const ResponseVector& r, int expected_n) {
  if (r.size() != expected_n) throw config_error("response count does not match query count");
  switch (r.kind) {
    case ResponseKind::Regression:
      if (!r.values.allFinite()) throw config_error("regression responses must be finite");
      break;
    case ResponseKind::Labels:
      for (int i = 0; i < r.values.size(); ++i) {
        double v = r.values[i];
        if (v != 0.0 && v != 1.0) throw config_error("label responses must lie in {0,1}");
      }
      break;
    case ResponseKind::Probabilities: {
      if (r.probs.cols() < 2) throw config_error("probability responses need at least 2 classes");
      for (int i = 0; i < r.probs.rows(); ++i) {
        double s = r.probs.row(i).sum();
        if (r.probs.row(i).minCoeff() < -1e-12 || std::abs(s - 1.0) > 1e-9)
          throw config_error("probability rows must be nonnegative and sum to 1");
      }
      break;
    }
  }
}

double PolynomialModel::value(double x) const {
  // Horner evaluation.
  double acc = 0.0;
  for (int j = static_cast<int>(coeffs.size()) - 1; j >= 0; --j) acc = acc * x + coeffs[j];
  return acc;
}

Vector ProbClassifierModel::probs(const Vector& x) const {
  Vector z = weights * x + bias;
  double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  return e / e.sum();
}

int model_input_dim(const TargetModel& m) {
  return std::visit(
      [](const auto& mm) -> int {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, PolynomialModel>) return 1;
        if constexpr (std::is_same_v<T, LinearModel>) return static_cast<int>(mm.beta.size());
        if constexpr (std::is_same_v<T, LinearClassifierModel>)
          return static_cast<int>(mm.beta.size());
        if constexpr (std::is_same_v<T, ProbClassifierModel>)
          return static_cast<int>(mm.weights.cols());
      },
      m);
}

void validate_target(const TargetModel& m) {
  if (const auto* poly = std::get_if<PolynomialModel>(&m)) {
    if (poly->coeffs.size() == 0) throw config_error("polynomial target needs coefficients");
    if (!poly->coeffs.allFinite()) throw config_error("polynomial coefficients must be finite");
    if (poly->order() >= 1 && poly->coeffs[poly->order()] == 0.0)
      throw config_error("polynomial leading coefficient must be nonzero");
  } else if (const auto* lin = std::get_if<LinearModel>(&m)) {
    if (lin->beta.size() == 0 || !lin->beta.allFinite())
      throw config_error("linear target needs finite coefficients");
  } else if (const auto* cls = std::get_if<LinearClassifierModel>(&m)) {
    if (cls->beta.size() == 0 || !cls->beta.allFinite() || !std::isfinite(cls->intercept))
      throw config_error("classifier target needs finite coefficients");
  } else if (const auto* pm = std::get_if<ProbClassifierModel>(&m)) {
    if (pm->num_classes() < 2) throw config_error("probability target needs at least 2 classes");
    if (pm->weights.cols() < 1 || pm->bias.size() != pm->num_classes())
      throw config_error("probability target weight/bias shapes disagree");
  }
}

bool is_regression_target(const TargetModel& m) {
  return std::holds_alternative<PolynomialModel>(m) || std::holds_alternative<LinearModel>(m);
}
bool is_label_target(const TargetModel& m) {
  return std::holds_alternative<LinearClassifierModel>(m);
}
bool is_prob_target(const TargetModel& m) {
  return std::holds_alternative<ProbClassifierModel>(m);
}

ResponseVector evaluate_target(const TargetModel& m, const QuerySet& q) {
  validate_queries(q);
  if (q.d() != model_input_dim(m))
    throw config_error("query dimension does not match target input dimension");
  const int n = q.n();
  if (is_prob_target(m)) {
    const auto& pm = std::get<ProbClassifierModel>(m);
    Matrix p(n, pm.num_classes());
    for (int i = 0; i < n; ++i) p.row(i) = pm.probs(q.row(i)).transpose();
    return ResponseVector::probabilities(std::move(p));
  }
  Vector v(n);
  if (const auto* poly = std::get_if<PolynomialModel>(&m)) {
    for (int i = 0; i < n; ++i) v[i] = poly->value(q.points(i, 0));
    return ResponseVector::regression(std::move(v));
  }
  if (const auto* lin = std::get_if<LinearModel>(&m)) {
    v = q.points * lin->beta;
    return ResponseVector::regression(std::move(v));
  }
  const auto& cls = std::get<LinearClassifierModel>(m);
  for (int i = 0; i < n; ++i) v[i] = cls.label(q.row(i));
  return ResponseVector::labels(std::move(v));
}

LossFunction default_utility_loss(const TargetModel& m) {
  if (is_prob_target(m)) return LossFunction::ProbSquaredError;
  if (is_label_target(m)) return LossFunction::ZeroOne;
  return LossFunction::SquaredError;
}

double empirical_utility_loss(const ResponseVector& clean, const ResponseVector& perturbed,
                              LossFunction loss) {
  if (clean.size() != perturbed.size())
    throw config_error("utility loss requires equally sized response vectors");
  if (clean.size() == 0) throw config_error("utility loss of empty responses");
  const int n = clean.size();
  switch (loss) {
    case LossFunction::SquaredError: {
      if (clean.kind == ResponseKind::Probabilities || perturbed.kind == ResponseKind::Probabilities)
        throw config_error("squared-error utility loss expects scalar responses");
      return (clean.values - perturbed.values).squaredNorm() / n;
    }
    case LossFunction::ZeroOne: {
      if (clean.kind != ResponseKind::Labels || perturbed.kind != ResponseKind::Labels)
        throw config_error("zero-one utility loss expects label responses");
      double miss = 0.0;
      for (int i = 0; i < n; ++i)
        if (clean.values[i] != perturbed.values[i]) miss += 1.0;
      return miss / n;
    }
    case LossFunction::ProbSquaredError: {
      if (clean.kind != ResponseKind::Probabilities ||
          perturbed.kind != ResponseKind::Probabilities)
        throw config_error("probability utility loss expects probability responses");
      if (clean.probs.cols() != perturbed.probs.cols())
        throw config_error("probability responses disagree on class count");
      return (clean.probs - perturbed.probs).squaredNorm() / n;
    }
  }
  throw config_error("unknown loss function");
}

void validate_budget(const UtilityBudget& b) {
  if (!(b.u_n >= 0.0) || !std::isfinite(b.u_n))
    throw config_error("utility budget must be finite and nonnegative");
}

Vector predict_all(const FittedModel& fm, const QuerySet& q) {
  Vector out(q.n());
  for (int i = 0; i < q.n(); ++i) out[i] = fm.predict(q.row(i));
  return out;
}

}  // namespace stealsim
