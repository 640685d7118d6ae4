#include "stealsim/defenses.hpp"

#include "stealsim/noise.hpp"
#include "stealsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <vector>

namespace stealsim {

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

const PolynomialModel& require_polynomial(const TargetModel& m, const char* who) {
  if (const auto* p = std::get_if<PolynomialModel>(&m)) return *p;
  throw config_error(std::string(who) + " requires a polynomial target");
}

const LinearModel& require_linear(const TargetModel& m, const char* who) {
  if (const auto* p = std::get_if<LinearModel>(&m)) return *p;
  throw config_error(std::string(who) + " requires a linear regression target");
}

const LinearClassifierModel& require_classifier(const TargetModel& m, const char* who) {
  if (const auto* p = std::get_if<LinearClassifierModel>(&m)) return *p;
  throw config_error(std::string(who) + " requires a halfspace classifier target");
}

const ProbClassifierModel& require_prob(const TargetModel& m, const char* who) {
  if (const auto* p = std::get_if<ProbClassifierModel>(&m)) return *p;
  throw config_error(std::string(who) + " requires a probability classifier target");
}

void require_regression(const TargetModel& m, const char* who) {
  if (!is_regression_target(m))
    throw config_error(std::string(who) + " requires a regression target");
}

}  // namespace

void validate_defense(const DefenseSpec& spec) {
  if (const auto* c = std::get_if<ConstantNoising>(&spec)) {
    if (c->sign != 1 && c->sign != -1) throw config_error("constant noising sign must be +1 or -1");
  } else if (const auto* lr = std::get_if<LongRangeNoising>(&spec)) {
    if (!(lr->gamma > 0.0 && lr->gamma < 1.0))
      throw config_error("long-range decay exponent must lie in (0,1)");
  } else if (const auto* od = std::get_if<OrderDisguiseDefense>(&spec)) {
    if (od->target_order && *od->target_order < 1)
      throw config_error("disguise order must be >= 1");
  } else if (const auto* mv = std::get_if<MvpDefense>(&spec)) {
    if (!(mv->rho > 0.0 && mv->rho <= 1.0))
      throw config_error("projection sampling ratio must lie in (0,1]");
  } else if (const auto* rs = std::get_if<RandomShuffleDefense>(&spec)) {
    if (!(rs->xi >= 0.0 && rs->xi <= 1.0))
      throw config_error("shuffle probability must lie in [0,1]");
  } else if (const auto* ms = std::get_if<MisleadingShiftDefense>(&spec)) {
    if (!(ms->delta >= 0.0)) throw config_error("shift scale must be nonnegative");
  }
}

std::string defense_label(const DefenseSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoDefense>) return "no_defense";
        if constexpr (std::is_same_v<T, IidNoising>) return "iid_noise";
        if constexpr (std::is_same_v<T, ConstantNoising>)
          return s.sign >= 0 ? "constant_noise+" : "constant_noise-";
        if constexpr (std::is_same_v<T, LongRangeNoising>) return "long_range_g" + fmt_num(s.gamma);
        if constexpr (std::is_same_v<T, OrderDisguiseDefense>)
          return s.target_order ? "order_disguise_k" + std::to_string(*s.target_order)
                               : "order_disguise";
        if constexpr (std::is_same_v<T, MvpDefense>) return "mvp_r" + fmt_num(s.rho);
        if constexpr (std::is_same_v<T, RandomShuffleDefense>)
          return "random_shuffle_x" + fmt_num(s.xi);
        if constexpr (std::is_same_v<T, LabelFlipDefense>) return "label_flip";
        if constexpr (std::is_same_v<T, BoundaryShiftDefense>)
          return s.shift ? "boundary_shift_s" + fmt_num(*s.shift) : "boundary_shift_auto";
        if constexpr (std::is_same_v<T, MisleadingShiftDefense>)
          return "misleading_shift_d" + fmt_num(s.delta);
      },
      spec);
}

bool defense_budget_is_exact(const DefenseSpec& spec) {
  return std::holds_alternative<ConstantNoising>(spec) ||
         std::holds_alternative<OrderDisguiseDefense>(spec) ||
         std::holds_alternative<MvpDefense>(spec);
}

int default_max_order(int n) {
  if (n < 1) throw config_error("sample size must be >= 1");
  return static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n))));
}

int default_disguise_order(int p, int n) {
  int qn = default_max_order(n);
  int k = std::min(qn - 1, std::max(p + 1, static_cast<int>(std::ceil(4.0 * std::log(n)))));
  return k;
}

ResponseVector order_disguise(const PolynomialModel& model, const QuerySet& queries,
                              const UtilityBudget& budget, int target_order) {
  validate_queries(queries);
  validate_budget(budget);
  if (queries.d() != 1) throw config_error("order disguise needs univariate queries");
  const int p = model.order();
  const int k = target_order;
  if (k < p) throw config_error("disguise order must be at least the target's order");
  if (k + 1 > queries.n()) throw singular_design_error("disguise order exceeds query count");
  ResponseVector clean = evaluate_target(model, queries);
  if (budget.u_n == 0.0) return clean;

  const int n = queries.n();
  Matrix phi = polynomial_features(queries.points.col(0), k);
  Eigen::HouseholderQR<Matrix> qr(phi);
  Matrix R = qr.matrixQR().topRows(k + 1).triangularView<Eigen::Upper>();
  double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= k; ++j) {
    double d = std::abs(R(j, j));
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  if (dmin == 0.0 || dmax / dmin > 1e12)
    throw singular_design_error("polynomial design is rank deficient at the disguise order");

  // e1 = Phi u is the raw top-degree column; e2 = Phi (Phi^T Phi)^{-1} u is the
  // same direction filtered through the Gram inverse. Via the thin QR,
  // e2 = Q R^{-T} u, so only one triangular solve is needed.
  Vector u = Vector::Unit(k + 1, k);
  Vector e1 = phi.col(k);
  Vector w = R.transpose().triangularView<Eigen::Lower>().solve(u);
  Matrix qthin = qr.householderQ() * Matrix::Identity(n, k + 1);
  Vector e2 = qthin * w;

  Vector e = e1 / e1.norm() + e2 / e2.norm();
  e *= std::sqrt(n * budget.u_n) / e.norm();
  return ResponseVector::regression(clean.values + e);
}

ResponseVector mvp(const LinearModel& model, const QuerySet& queries, const UtilityBudget& budget,
                   double rho, std::uint64_t seed) {
  validate_queries(queries);
  validate_budget(budget);
  if (!(rho > 0.0 && rho <= 1.0)) throw config_error("projection sampling ratio must lie in (0,1]");
  if (queries.d() != model.beta.size())
    throw config_error("query dimension does not match target input dimension");
  ResponseVector clean = evaluate_target(model, queries);
  const int n = queries.n();
  const double b = std::sqrt(n * budget.u_n);
  if (b == 0.0) return clean;

  std::vector<int> zero_cols;
  for (int j = 0; j < model.beta.size(); ++j)
    if (model.beta[j] == 0.0) zero_cols.push_back(j);
  if (zero_cols.empty())
    throw config_error("projection defense needs at least one zero-coefficient column");
  auto rng = make_rng(seed);
  std::shuffle(zero_cols.begin(), zero_cols.end(), rng);
  const int keep = std::max(1, static_cast<int>(std::llround(rho * zero_cols.size())));
  zero_cols.resize(std::min<size_t>(keep, zero_cols.size()));
  std::sort(zero_cols.begin(), zero_cols.end());

  Matrix xs(n, static_cast<int>(zero_cols.size()));
  for (size_t j = 0; j < zero_cols.size(); ++j) xs.col(j) = queries.points.col(zero_cols[j]);

  const Vector& ystar = clean.values;
  Vector proj = project_onto_columns(xs, ystar);
  Vector u = proj - ystar;
  const double c = u.norm();
  Vector e;
  if (b <= c) {
    e = (b / c) * u;
  } else {
    const double ynorm = ystar.norm();
    if (ynorm == 0.0)
      throw degenerate_target_error("cannot top up the projection perturbation on zero responses");
    Vector v = ystar / ynorm;
    // Pick t >= 0 with ||u + t v|| = b; the root is real because c <= b.
    const double uv = u.dot(v);
    const double t = -uv + std::sqrt(uv * uv + b * b - c * c);
    e = u + t * v;
  }
  return ResponseVector::regression(ystar + e);
}

ResponseVector random_shuffle(const ProbClassifierModel& model, const QuerySet& queries, double xi,
                              std::uint64_t seed) {
  validate_queries(queries);
  if (!(xi >= 0.0 && xi <= 1.0)) throw config_error("shuffle probability must lie in [0,1]");
  ResponseVector out = evaluate_target(model, queries);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int K = static_cast<int>(out.probs.cols());
  std::vector<double> row(K);
  for (int i = 0; i < out.probs.rows(); ++i) {
    if (unif(rng) >= xi) continue;
    for (int j = 0; j < K; ++j) row[j] = out.probs(i, j);
    std::shuffle(row.begin(), row.end(), rng);
    for (int j = 0; j < K; ++j) out.probs(i, j) = row[j];
  }
  return out;
}

ResponseVector misleading_shift(const ProbClassifierModel& model, const QuerySet& queries,
                                double delta) {
  validate_queries(queries);
  if (!(delta >= 0.0)) throw config_error("shift scale must be nonnegative");
  ResponseVector out = evaluate_target(model, queries);
  const int n = static_cast<int>(out.probs.rows());
  const int K = static_cast<int>(out.probs.cols());
  // Dominating class: the argmax class of the largest number of rows.
  std::vector<int> votes(K, 0);
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int j = 1; j < K; ++j)
      if (out.probs(i, j) > out.probs(i, arg)) arg = j;
    ++votes[arg];
  }
  int shift_class = 0;
  for (int j = 1; j < K; ++j)
    if (votes[j] > votes[shift_class]) shift_class = j;

  for (int i = 0; i < n; ++i) {
    Vector logp(K);
    for (int j = 0; j < K; ++j) logp[j] = std::log(std::max(out.probs(i, j), 1e-12));
    logp[shift_class] += delta;
    double m = logp.maxCoeff();
    Vector e = (logp.array() - m).exp();
    out.probs.row(i) = (e / e.sum()).transpose();
  }
  return out;
}

ResponseVector label_flip(const LinearClassifierModel& model, const QuerySet& queries, double u_n,
                          std::uint64_t seed) {
  validate_queries(queries);
  if (!(u_n >= 0.0 && u_n <= 1.0)) throw config_error("flip probability must lie in [0,1]");
  ResponseVector out = evaluate_target(model, queries);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < out.values.size(); ++i)
    if (unif(rng) < u_n) out.values[i] = 1.0 - out.values[i];
  return out;
}

ResponseVector boundary_shift(const LinearClassifierModel& model, const QuerySet& queries,
                              double shift) {
  validate_queries(queries);
  if (queries.d() != model.beta.size())
    throw config_error("query dimension does not match target input dimension");
  Vector v(queries.n());
  for (int i = 0; i < queries.n(); ++i)
    v[i] = model.beta.dot(queries.row(i)) + model.intercept + shift >= 0.0 ? 1.0 : 0.0;
  return ResponseVector::labels(std::move(v));
}

double calibrate_boundary_shift(const LinearClassifierModel& model, const QueryDistribution& dist,
                                double target_u, double tolerance, int mc_queries,
                                std::uint64_t seed) {
  if (!(target_u >= 0.0 && target_u < 0.5))
    throw calibration_error("boundary-shift budget must lie in [0, 0.5)");
  if (!(tolerance > 0.0)) throw config_error("calibration tolerance must be positive");
  if (mc_queries < 1) throw config_error("calibration needs at least one Monte Carlo query");
  if (target_u == 0.0) return 0.0;
  QuerySet mc = sample_queries(dist, mc_queries, seed);
  if (mc.d() != model.beta.size())
    throw config_error("query distribution dimension does not match the classifier");
  Vector clean(mc_queries);
  for (int i = 0; i < mc_queries; ++i) clean[i] = model.label(mc.row(i));
  auto flip_fraction = [&](double s) {
    int flips = 0;
    for (int i = 0; i < mc_queries; ++i) {
      double lab = model.beta.dot(mc.row(i)) + model.intercept + s >= 0.0 ? 1.0 : 0.0;
      if (lab != clean[i]) ++flips;
    }
    return static_cast<double>(flips) / mc_queries;
  };
  // Negative-shift convention: grow |s| until the flip fraction reaches the
  // target, then bisect.
  double hi = 1.0;
  double f_hi = flip_fraction(-hi);
  int grow = 0;
  while (f_hi < target_u && grow < 60) {
    hi *= 2.0;
    f_hi = flip_fraction(-hi);
    ++grow;
  }
  if (f_hi < target_u)
    throw calibration_error("flip fraction saturates at " + std::to_string(f_hi) +
                            " below the requested budget");
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double f = flip_fraction(-mid);
    if (std::abs(f - target_u) <= tolerance) return -mid;
    if (f < target_u)
      lo = mid;
    else
      hi = mid;
  }
  throw calibration_error("bisection failed to reach the budget within tolerance");
}

ResponseVector defend(const DefenseSpec& spec, const TargetModel& model, const QuerySet& queries,
                      const UtilityBudget& budget, std::uint64_t seed) {
  validate_defense(spec);
  validate_queries(queries);
  validate_budget(budget);
  return std::visit(
      [&](const auto& s) -> ResponseVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoDefense>) {
          return evaluate_target(model, queries);
        } else if constexpr (std::is_same_v<T, IidNoising>) {
          require_regression(model, "iid noising");
          ResponseVector out = evaluate_target(model, queries);
          out.values += sample_iid_gaussian(queries.n(), budget.u_n, seed);
          return out;
        } else if constexpr (std::is_same_v<T, ConstantNoising>) {
          require_regression(model, "constant noising");
          ResponseVector out = evaluate_target(model, queries);
          out.values.array() += s.sign * std::sqrt(budget.u_n);
          return out;
        } else if constexpr (std::is_same_v<T, LongRangeNoising>) {
          require_regression(model, "long-range noising");
          ResponseVector out = evaluate_target(model, queries);
          Vector noise = sample_long_range(queries.n(), budget.u_n, s.gamma, seed);
          out.values += assign_noise_by_query_order(noise, queries);
          return out;
        } else if constexpr (std::is_same_v<T, OrderDisguiseDefense>) {
          const auto& poly = require_polynomial(model, "order disguise");
          int k = s.target_order ? *s.target_order
                                 : default_disguise_order(poly.order(), queries.n());
          return order_disguise(poly, queries, budget, k);
        } else if constexpr (std::is_same_v<T, MvpDefense>) {
          return mvp(require_linear(model, "misleading variable projection"), queries, budget,
                     s.rho, seed);
        } else if constexpr (std::is_same_v<T, RandomShuffleDefense>) {
          return random_shuffle(require_prob(model, "random shuffle"), queries, s.xi, seed);
        } else if constexpr (std::is_same_v<T, LabelFlipDefense>) {
          return label_flip(require_classifier(model, "label flip"), queries, budget.u_n, seed);
        } else if constexpr (std::is_same_v<T, BoundaryShiftDefense>) {
          if (!s.shift)
            throw config_error(
                "boundary shift needs a concrete shift; calibrate against the query distribution "
                "first");
          return boundary_shift(require_classifier(model, "boundary shift"), queries, *s.shift);
        } else {
          static_assert(std::is_same_v<T, MisleadingShiftDefense>);
          return misleading_shift(require_prob(model, "misleading shift"), queries, s.delta);
        }
      },
      spec);
}

}  // namespace stealsim
