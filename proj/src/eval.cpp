#include "stealsim/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

namespace stealsim {

void validate_cell(const CellSpec& cell) {
  if (cell.n < 1) throw config_error("cell sample size must be >= 1");
  if (cell.n_test < 1) throw config_error("cell needs at least one test point");
  if (cell.replicates < 1) throw config_error("cell needs at least one replicate");
  validate_target(cell.model);
  validate_defense(cell.defense);
  validate_attack(cell.attack);
  validate_distribution(cell.dist);
  if (query_dim(cell.dist) != model_input_dim(cell.model))
    throw config_error("query distribution dimension does not match the target");
  validate_budget(UtilityBudget{cell.u_n});
  if (is_label_target(cell.model) && cell.u_n > 1.0)
    throw config_error("zero-one budgets cannot exceed 1");

  // Attack/target pairing: which response kinds each attacker consumes.
  const bool regression = is_regression_target(cell.model);
  const bool labels = is_label_target(cell.model);
  if (std::holds_alternative<NoAttack>(cell.attack)) return;
  if (std::holds_alternative<LinearErmAttack>(cell.attack)) {
    if (!labels) throw config_error("halfspace attack needs a hard-label classifier target");
    return;
  }
  if (!regression)
    throw config_error("regression attacks need a regression target");
  if (std::holds_alternative<PolyGicAttack>(cell.attack) && model_input_dim(cell.model) != 1)
    throw config_error("polynomial attack needs a univariate target");
}

namespace {

FittedModel dispatch_attack(const CellSpec& cell, const QuerySet& queries,
                            const ResponseVector& defended, std::uint64_t attack_seed,
                            std::uint64_t validation_seed) {
  if (const auto* knn = std::get_if<KnnAttack>(&cell.attack)) {
    if (knn->k) return knn_fit(queries, defended, std::min(*knn->k, queries.n()));
    std::vector<int> grid = knn->grid.empty() ? default_k_grid(queries.n()) : knn->grid;
    QuerySet vq = sample_queries(cell.dist, knn->n_validation, validation_seed);
    Vector vy = evaluate_target(cell.model, vq).values;
    return knn_best_over_grid(queries, defended, grid, vq, vy);
  }
  if (const auto* gic = std::get_if<PolyGicAttack>(&cell.attack))
    return poly_gic_fit(queries, defended, *gic);
  if (const auto* lasso = std::get_if<LassoAttack>(&cell.attack))
    return lasso_fit(queries, defended, *lasso, attack_seed);
  return linear_class_erm_fit(queries, defended, attack_seed);
}

ReplicateOutcome run_replicate(const CellSpec& cell, const DefenseSpec& defense, int replicate) {
  ReplicateOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t rep = static_cast<std::uint64_t>(replicate);
  const std::uint64_t nn = static_cast<std::uint64_t>(cell.n);
  try {
    QuerySet queries =
        sample_queries(cell.dist, cell.n, derive_seed(cell.master_seed, nn, cell.u_n, rep,
                                                      SeedRole::Queries));
    ResponseVector clean = evaluate_target(cell.model, queries);
    ResponseVector defended =
        defend(defense, cell.model, queries, UtilityBudget{cell.u_n},
               derive_seed(cell.master_seed, nn, cell.u_n, rep, SeedRole::Defense));
    out.utility = empirical_utility_loss(clean, defended, default_utility_loss(cell.model));

    if (!std::holds_alternative<NoAttack>(cell.attack)) {
      FittedModel fit = dispatch_attack(
          cell, queries, defended,
          derive_seed(cell.master_seed, nn, cell.u_n, rep, SeedRole::Attack),
          derive_seed(cell.master_seed, nn, cell.u_n, rep, SeedRole::Validation));
      out.meta = fit.meta;

      QuerySet test = sample_queries(
          cell.dist, cell.n_test,
          derive_seed(cell.master_seed, nn, cell.u_n, rep, SeedRole::TestPoints));
      if (is_label_target(cell.model)) {
        out.privacy = zero_one_error(fit, cell.model, test);
      } else {
        Vector truth = evaluate_target(cell.model, test).values;
        Vector pred = predict_all(fit, test);
        out.privacy = (pred - truth).squaredNorm() / test.n();
      }

      if (fit.meta.selected_vars) {
        if (const auto* lin = std::get_if<LinearModel>(&cell.model)) {
          std::vector<int> s_true;
          for (int j = 0; j < lin->beta.size(); ++j)
            if (lin->beta[j] != 0.0) s_true.push_back(j + 1);
          out.sym_diff = symmetric_difference(s_true, *fit.meta.selected_vars);
        }
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

std::vector<ReplicateOutcome> run_cell(const CellSpec& cell, int jobs) {
  validate_cell(cell);
  // Resolve budget-calibrated defenses once per cell so every replicate sees
  // the same concrete mechanism.
  DefenseSpec defense = cell.defense;
  if (const auto* bs = std::get_if<BoundaryShiftDefense>(&defense); bs && !bs->shift) {
    const auto& cls = std::get<LinearClassifierModel>(cell.model);
    double s = calibrate_boundary_shift(cls, cell.dist, cell.u_n, 0.005, 100000,
                                        derive_seed(cell.master_seed, 0, cell.u_n, 0,
                                                    SeedRole::Calibration));
    defense = BoundaryShiftDefense{s};
  }

  std::vector<ReplicateOutcome> out(cell.replicates);
  const int workers = std::max(1, std::min(jobs, cell.replicates));
  if (workers == 1) {
    for (int r = 0; r < cell.replicates; ++r) out[r] = run_replicate(cell, defense, r);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < cell.replicates; r = next.fetch_add(1))
        out[r] = run_replicate(cell, defense, r);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

PrivacyEstimate privacy_level_estimate(const TargetModel& model, const DefenseSpec& defense,
                                       const AttackSpec& attack, const QueryDistribution& dist,
                                       int n, double u_n, int n_test, int replicates,
                                       std::uint64_t seed, int jobs) {
  CellSpec cell;
  cell.model = model;
  cell.dist = dist;
  cell.defense = defense;
  cell.attack = attack;
  cell.n = n;
  cell.u_n = u_n;
  cell.n_test = n_test;
  cell.replicates = replicates;
  cell.master_seed = seed;
  std::vector<ReplicateOutcome> rows = run_cell(cell, jobs);
  PrivacyEstimate est;
  for (const auto& row : rows) {
    if (!row.ok()) {
      ++est.failed;
      continue;
    }
    est.samples.push_back(row.privacy);
  }
  if (est.samples.empty()) {
    est.mean = std::numeric_limits<double>::quiet_NaN();
    est.se = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double m = static_cast<double>(est.samples.size());
  double mean = 0.0;
  for (double s : est.samples) mean += s;
  mean /= m;
  double var = 0.0;
  for (double s : est.samples) var += (s - mean) * (s - mean);
  var = m > 1 ? var / (m - 1) : 0.0;
  est.mean = mean;
  est.se = std::sqrt(var / m);
  return est;
}

int symmetric_difference(const std::vector<int>& s_true, const std::vector<int>& s_hat) {
  std::set<int> a(s_true.begin(), s_true.end());
  std::set<int> b(s_hat.begin(), s_hat.end());
  int diff = 0;
  for (int v : a)
    if (!b.count(v)) ++diff;
  for (int v : b)
    if (!a.count(v)) ++diff;
  return diff;
}

double zero_one_error(const FittedModel& fitted, const TargetModel& truth,
                      const QuerySet& test_queries) {
  ResponseVector labels = evaluate_target(truth, test_queries);
  if (labels.kind != ResponseKind::Labels)
    throw config_error("zero-one error needs a hard-label target");
  int miss = 0;
  for (int i = 0; i < test_queries.n(); ++i) {
    double pred = fitted.predict(test_queries.row(i)) >= 0.5 ? 1.0 : 0.0;
    if (pred != labels.values[i]) ++miss;
  }
  return static_cast<double>(miss) / test_queries.n();
}

}  // namespace stealsim
