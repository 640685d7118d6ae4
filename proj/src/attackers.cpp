#include "stealsim/attackers.hpp"

#include "stealsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

namespace stealsim {

void validate_attack(const AttackSpec& spec) {
  if (const auto* k = std::get_if<KnnAttack>(&spec)) {
    if (k->k && *k->k < 1) throw config_error("neighbor count must be >= 1");
    for (int g : k->grid)
      if (g < 1) throw config_error("neighbor grid entries must be >= 1");
    if (k->n_validation < 1) throw config_error("validation size must be >= 1");
  } else if (const auto* p = std::get_if<PolyGicAttack>(&spec)) {
    if (p->max_order && *p->max_order < 0) throw config_error("max order must be >= 0");
    if (p->lambda && !(*p->lambda >= 0.0)) throw config_error("penalty weight must be >= 0");
  } else if (const auto* l = std::get_if<LassoAttack>(&spec)) {
    if (l->folds < 2) throw config_error("cross-validation needs at least 2 folds");
    if (l->n_lambda < 1) throw config_error("lambda grid needs at least one value");
    if (!(l->lambda_min_ratio > 0.0 && l->lambda_min_ratio <= 1.0))
      throw config_error("lambda min ratio out of range");
  }
}

std::string attack_label(const AttackSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KnnAttack>)
          return s.k ? "knn_" + std::to_string(*s.k) : "knn_best";
        if constexpr (std::is_same_v<T, PolyGicAttack>)
          return s.penalty == PolyGicAttack::Penalty::Aic ? "poly_gic_aic" : "poly_gic_bic";
        if constexpr (std::is_same_v<T, LassoAttack>)
          return s.elastic_net ? "enet_cv" : "lasso_cv";
        if constexpr (std::is_same_v<T, LinearErmAttack>) return "linear_erm";
        if constexpr (std::is_same_v<T, NoAttack>) return "none";
      },
      spec);
}

namespace {

struct KnnData {
  Matrix points;
  Vector values;
};

// Indices of training points by ascending distance to x; ties toward the
// smaller index.
std::vector<int> knn_order(const Matrix& points, const Vector& x) {
  const int n = static_cast<int>(points.rows());
  Vector d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (points.row(i).transpose() - x).squaredNorm();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    return a < b;
  });
  return idx;
}

}  // namespace

FittedModel knn_fit(const QuerySet& queries, const ResponseVector& responses, int k) {
  validate_queries(queries);
  validate_responses(responses, queries.n());
  if (responses.kind == ResponseKind::Probabilities)
    throw config_error("nearest-neighbor attack expects scalar responses");
  if (k < 1 || k > queries.n()) throw config_error("neighbor count must lie in [1, n]");
  auto data = std::make_shared<KnnData>();
  data->points = queries.points;
  data->values = responses.values;
  FittedModel fm;
  fm.meta.knn_k = k;
  fm.predict = [data, k](const Vector& x) {
    std::vector<int> idx = knn_order(data->points, x);
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += data->values[idx[j]];
    return acc / k;
  };
  return fm;
}

std::vector<int> default_k_grid(int n) {
  if (n < 1) throw config_error("sample size must be >= 1");
  std::vector<int> grid;
  const int steps = 24;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    int k = static_cast<int>(std::llround(std::pow(static_cast<double>(n), t)));
    k = std::clamp(k, 1, n);
    if (grid.empty() || grid.back() != k) grid.push_back(k);
  }
  return grid;
}

FittedModel knn_best_over_grid(const QuerySet& queries, const ResponseVector& responses,
                               const std::vector<int>& grid, const QuerySet& validation_queries,
                               const Vector& validation_values) {
  validate_queries(queries);
  validate_responses(responses, queries.n());
  if (grid.empty()) throw config_error("neighbor grid must be non-empty");
  if (validation_queries.n() != validation_values.size())
    throw config_error("validation queries and values disagree in length");
  const int n = queries.n();
  std::vector<int> ks = grid;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks)
    if (k < 1 || k > n) throw config_error("neighbor grid entry outside [1, n]");

  // One neighbor ordering per validation point serves every candidate k via
  // prefix sums.
  std::vector<double> sse(ks.size(), 0.0);
  const int nv = validation_queries.n();
  for (int v = 0; v < nv; ++v) {
    Vector x = validation_queries.row(v);
    std::vector<int> idx = knn_order(queries.points, x);
    double prefix = 0.0;
    size_t gi = 0;
    for (int j = 0; j < n && gi < ks.size(); ++j) {
      prefix += responses.values[idx[j]];
      while (gi < ks.size() && ks[gi] == j + 1) {
        double pred = prefix / ks[gi];
        double diff = pred - validation_values[v];
        sse[gi] += diff * diff;
        ++gi;
      }
    }
  }
  size_t best = 0;
  for (size_t i = 1; i < ks.size(); ++i)
    if (sse[i] < sse[best]) best = i;
  FittedModel fm = knn_fit(queries, responses, ks[best]);
  fm.meta.scores.assign(sse.begin(), sse.end());
  for (double& s : fm.meta.scores) s /= nv;
  return fm;
}

FittedModel poly_gic_fit(const QuerySet& queries, const ResponseVector& responses,
                         const PolyGicAttack& spec) {
  validate_queries(queries);
  validate_responses(responses, queries.n());
  validate_attack(AttackSpec{spec});
  if (queries.d() != 1) throw config_error("polynomial attack needs univariate queries");
  if (responses.kind != ResponseKind::Regression)
    throw config_error("polynomial attack expects regression responses");
  const int n = queries.n();
  int qn;
  if (spec.max_order) {
    qn = *spec.max_order;
    if (qn + 1 > n) throw config_error("max order must satisfy q+1 <= n");
  } else {
    qn = std::min(static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n)))), n - 1);
  }
  const double lambda =
      spec.lambda ? *spec.lambda
                  : (spec.penalty == PolyGicAttack::Penalty::Aic ? 2.0 : std::log(n));

  const Vector& y = responses.values;
  const Vector x = queries.points.col(0);
  struct Candidate {
    bool ok = false;
    Vector coeffs;
    double rss = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Candidate> cands(qn + 1);
  Matrix phi_full = polynomial_features(x, qn);
  double last_rss = std::numeric_limits<double>::infinity();
  bool any_skipped = false;
  for (int q = 0; q <= qn; ++q) {
    Matrix phi = phi_full.leftCols(q + 1);
    try {
      cands[q].coeffs = ols_solve(phi, y);
    } catch (const singular_design_error&) {
      any_skipped = true;
      continue;
    }
    cands[q].ok = true;
    cands[q].rss = (y - phi * cands[q].coeffs).squaredNorm();
    // Nested least squares cannot raise the residual as q grows.
    if (cands[q].rss > last_rss + 1e-8 * (1.0 + last_rss))
      throw std::logic_error("residual sum of squares increased with model order");
    last_rss = cands[q].rss;
  }

  int q_top = -1;
  for (int q = qn; q >= 0; --q)
    if (cands[q].ok) {
      q_top = q;
      break;
    }
  if (q_top < 0) throw fit_error("every candidate order had a rank-deficient design");

  auto sigma2_at = [&](int q) {
    double denom = std::max(1, n - q - 1);
    return std::clamp(cands[q].rss / denom, 1e-8, 100.0);
  };
  const double sigma2_common = sigma2_at(q_top);

  FitMetadata meta;
  meta.warning = any_skipped;
  meta.scores.assign(qn + 1, std::numeric_limits<double>::quiet_NaN());
  int best_q = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int q = 0; q <= qn; ++q) {
    if (!cands[q].ok) continue;
    double s2 = spec.variance_rule == PolyGicAttack::VarianceRule::LargestModel ? sigma2_common
                                                                                : sigma2_at(q);
    double score = cands[q].rss / n + lambda * s2 * q / n;
    meta.scores[q] = score;
    if (score < best_score) {  // strict: ties keep the smaller order
      best_score = score;
      best_q = q;
    }
  }
  meta.selected_order = best_q;

  PolynomialModel fit;
  fit.coeffs = cands[best_q].coeffs;
  FittedModel fm;
  fm.meta = std::move(meta);
  fm.predict = [fit](const Vector& x_point) { return fit.value(x_point[0]); };
  return fm;
}

FittedModel lasso_fit(const QuerySet& queries, const ResponseVector& responses,
                      const LassoAttack& spec, std::uint64_t seed) {
  validate_queries(queries);
  validate_responses(responses, queries.n());
  validate_attack(AttackSpec{spec});
  if (responses.kind != ResponseKind::Regression)
    throw config_error("penalized regression expects regression responses");
  if (queries.n() < spec.folds) throw config_error("fewer observations than folds");

  const Matrix& X = queries.points;
  const Vector& y = responses.values;
  std::vector<double> l1_grid = default_lambda_grid(X, y, spec.n_lambda, spec.lambda_min_ratio);
  std::vector<double> l2_ratios = spec.elastic_net ? std::vector<double>{0.0, 0.5}
                                                   : std::vector<double>{0.0};
  CvChoice choice = kfold_cv_enet(X, y, l1_grid, l2_ratios, spec.folds, seed);

  FittedModel fm;
  fm.meta.lambda1 = choice.lambda1;
  fm.meta.lambda2 = choice.lambda2;
  fm.meta.warning = choice.skipped > 0;
  std::vector<int> sel;
  for (int j = 0; j < choice.fit.beta.size(); ++j)
    if (choice.fit.beta[j] != 0.0) sel.push_back(j + 1);
  fm.meta.selected_vars = std::move(sel);
  Vector beta = choice.fit.beta;
  double intercept = choice.fit.intercept;
  fm.predict = [beta, intercept](const Vector& x) { return beta.dot(x) + intercept; };
  return fm;
}

namespace {

double zero_one_training_error(const Matrix& X, const Vector& labels, const Vector& beta) {
  const int n = static_cast<int>(X.rows());
  int miss = 0;
  for (int i = 0; i < n; ++i) {
    double lab = X.row(i).dot(beta) >= 0.0 ? 1.0 : 0.0;
    if (lab != labels[i]) ++miss;
  }
  return static_cast<double>(miss) / n;
}

}  // namespace

FittedModel linear_class_erm_fit(const QuerySet& queries, const ResponseVector& labels,
                                 std::uint64_t seed) {
  validate_queries(queries);
  validate_responses(labels, queries.n());
  if (labels.kind != ResponseKind::Labels)
    throw config_error("halfspace attack expects {0,1} label responses");
  const Matrix& X = queries.points;
  const Vector& y = labels.values;
  const int n = queries.n();
  const int d = queries.d();

  // Uniform labels defeat any homogeneous halfspace on centered data; the
  // risk minimizer is the constant classifier.
  if (y.minCoeff() == y.maxCoeff()) {
    const double c = y[0];
    FittedModel fm;
    fm.predict = [c](const Vector&) { return c; };
    return fm;
  }

  // Logistic warm start (gradient descent with a Lipschitz-safe step).
  Vector beta = Vector::Zero(d);
  const double lip = std::max(X.squaredNorm() / (4.0 * n), 1e-12);
  const double step = 1.0 / lip;
  bool converged = false;
  for (int it = 0; it < 2000; ++it) {
    Vector z = X * beta;
    Vector sig = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Vector grad = X.transpose() * (sig - y) / n;
    if (grad.norm() <= 1e-6) {
      converged = true;
      break;
    }
    beta -= step * grad;
  }

  // Seeded local search on the training zero-one loss; moves only on strict
  // improvement, so the result is never worse than the logistic direction.
  double best_err = zero_one_training_error(X, y, beta);
  Vector best = beta;
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double base_scale = best.norm() > 0.0 ? best.norm() : 1.0;
  double radius = base_scale;
  for (int round = 0; round < 48 && best_err > 0.0; ++round) {
    for (int c = 0; c < 24; ++c) {
      Vector cand = best;
      for (int j = 0; j < d; ++j) cand[j] += radius * normal(rng) / std::sqrt(double(d));
      double err = zero_one_training_error(X, y, cand);
      if (err < best_err) {
        best_err = err;
        best = cand;
      }
    }
    radius *= 0.85;
  }

  FittedModel fm;
  fm.meta.warning = !converged;
  Vector b = best;
  fm.predict = [b](const Vector& x) { return b.dot(x) >= 0.0 ? 1.0 : 0.0; };
  return fm;
}

}  // namespace stealsim
