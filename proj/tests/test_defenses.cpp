#include <doctest.h>

#include "stealsim/defenses.hpp"
#include "stealsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace stealsim;

namespace {

PolynomialModel quad() {
  PolynomialModel m;
  m.coeffs = Vector(3);
  m.coeffs << 1.0, -4.0, 4.0;
  return m;
}

QuerySet beta_queries(int n, std::uint64_t seed) {
  return sample_queries(BetaDist{1.0, 3.0}, n, seed);
}

Vector clean_values(const TargetModel& m, const QuerySet& q) {
  return evaluate_target(m, q).values;
}

}  // namespace

TEST_SUITE("defenses") {
  TEST_CASE("no defense returns the clean responses bit for bit") {
    QuerySet q = beta_queries(50, 1);
    ResponseVector out = defend(NoDefense{}, TargetModel{quad()}, q, UtilityBudget{0.25}, 7);
    CHECK((out.values - clean_values(TargetModel{quad()}, q)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("constant noising adds exactly the square root of the budget") {
    QuerySet q = beta_queries(40, 2);
    Vector f = clean_values(TargetModel{quad()}, q);
    ResponseVector plus =
        defend(ConstantNoising{+1}, TargetModel{quad()}, q, UtilityBudget{0.25}, 7);
    CHECK((plus.values - f).minCoeff() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK((plus.values - f).maxCoeff() == doctest::Approx(0.5).epsilon(1e-15));
    ResponseVector minus =
        defend(ConstantNoising{-1}, TargetModel{quad()}, q, UtilityBudget{0.25}, 7);
    CHECK((minus.values - f).maxCoeff() == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(empirical_utility_loss(ResponseVector::regression(f), plus,
                                 LossFunction::SquaredError) ==
          doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("iid noising spends the budget on average") {
    const int n = 10000;
    QuerySet q = beta_queries(n, 3);
    Vector f = clean_values(TargetModel{quad()}, q);
    ResponseVector out = defend(IidNoising{}, TargetModel{quad()}, q, UtilityBudget{0.25}, 11);
    double u = empirical_utility_loss(ResponseVector::regression(f), out,
                                      LossFunction::SquaredError);
    // Mean of squared N(0, 0.25) draws: SE = sqrt(2 * 0.25^2 / n).
    double se = std::sqrt(2.0 * 0.25 * 0.25 / n);
    CHECK(std::abs(u - 0.25) < 3.0 * se);
  }

  TEST_CASE("long-range noise is tied to sorted query order") {
    const int n = 64;
    QuerySet sorted;
    {
      QuerySet raw = beta_queries(n, 4);
      std::vector<double> xs(raw.points.data(), raw.points.data() + n);
      std::sort(xs.begin(), xs.end());
      sorted.points = Matrix(n, 1);
      for (int i = 0; i < n; ++i) sorted.points(i, 0) = xs[i];
    }
    QuerySet shuffled;
    shuffled.points = Matrix(n, 1);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(5);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n; ++i) shuffled.points(i, 0) = sorted.points(order[i], 0);

    LongRangeNoising lr{0.2};
    Vector noise_sorted =
        defend(lr, TargetModel{quad()}, sorted, UtilityBudget{0.25}, 77).values -
        clean_values(TargetModel{quad()}, sorted);
    Vector noise_shuffled =
        defend(lr, TargetModel{quad()}, shuffled, UtilityBudget{0.25}, 77).values -
        clean_values(TargetModel{quad()}, shuffled);
    // The i-th smallest query carries the same noise value either way.
    for (int i = 0; i < n; ++i)
      CHECK(noise_shuffled[i] == doctest::Approx(noise_sorted[order[i]]).epsilon(1e-12));
  }

  TEST_CASE("order disguise at zero budget is a no-op") {
    QuerySet q = beta_queries(30, 6);
    ResponseVector out =
        defend(OrderDisguiseDefense{}, TargetModel{quad()}, q, UtilityBudget{0.0}, 9);
    CHECK((out.values - clean_values(TargetModel{quad()}, q)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("order disguise spends the whole budget exactly") {
    for (std::uint64_t seed : {10u, 11u, 12u}) {
      QuerySet q = beta_queries(100, seed);
      Vector f = clean_values(TargetModel{quad()}, q);
      ResponseVector out =
          defend(OrderDisguiseDefense{}, TargetModel{quad()}, q, UtilityBudget{0.25}, seed);
      double spent = (out.values - f).squaredNorm();
      CHECK(spent == doctest::Approx(100 * 0.25).epsilon(1e-9));
    }
  }

  TEST_CASE("order disguise rules pick the advertised order") {
    // min(max_order - 1, max(p + 1, ceil(4 ln n))) with the order cap from the
    // attacker's n^(1/3) scan rule.
    CHECK(default_max_order(100) == 5);
    CHECK(default_disguise_order(2, 100) == 4);
    CHECK(default_max_order(1000) == 10);
    CHECK(default_disguise_order(2, 1000) == 9);
  }

  TEST_CASE("projection defense lands responses at the exact budget norm") {
    // Branch b <= c: the perturbation is the rescaled projection gap.
    LinearModel target;
    target.beta = Vector(3);
    target.beta << 2.0, 0.0, 0.0;
    QuerySet q = sample_queries(StandardNormal{3}, 25, 13);
    Vector f = q.points * target.beta;
    double u_small = 1e-4;
    ResponseVector small =
        defend(MvpDefense{1.0}, TargetModel{target}, q, UtilityBudget{u_small}, 21);
    CHECK((small.values - f).squaredNorm() == doctest::Approx(25 * u_small).epsilon(1e-9));

    // Branch b > c: still exact.
    double u_big = 400.0;
    ResponseVector big = defend(MvpDefense{1.0}, TargetModel{target}, q, UtilityBudget{u_big}, 21);
    CHECK((big.values - f).squaredNorm() == doctest::Approx(25 * u_big).epsilon(1e-9));
  }

  TEST_CASE("projection defense direction follows the projection gap") {
    LinearModel target;
    target.beta = Vector(2);
    target.beta << 3.0, 0.0;
    QuerySet q = sample_queries(StandardNormal{2}, 20, 14);
    Vector f = q.points * target.beta;
    // S can only be column 2; compute the gap directly.
    Vector proj = project_onto_columns(q.points.col(1), f);
    Vector gap = proj - f;
    double c2 = gap.squaredNorm();
    double b2 = 20 * 1e-6;  // well below c^2
    REQUIRE(b2 < c2);
    ResponseVector out = defend(MvpDefense{1.0}, TargetModel{target}, q, UtilityBudget{1e-6}, 15);
    Vector e = out.values - f;
    // Parallel: e = (b/c) * gap.
    Vector expected = gap * std::sqrt(b2 / c2);
    CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("responses already in the misleading span scale along themselves") {
    // Make the clean responses a multiple of the lone zero-coefficient column.
    LinearModel target;
    target.beta = Vector(2);
    target.beta << 1.0, 0.0;
    QuerySet q;
    q.points = Matrix(10, 2);
    for (int i = 0; i < 10; ++i) {
      double z = 0.1 * (i + 1);
      q.points(i, 1) = z;
      q.points(i, 0) = 2.0 * z;  // column 1 = 2 * column 2
    }
    Vector f = q.points * target.beta;  // = 2 * column 2, inside span(S)
    double u = 0.09;
    ResponseVector out = defend(MvpDefense{1.0}, TargetModel{target}, q, UtilityBudget{u}, 5);
    double b = std::sqrt(10 * u);
    Vector expected = f * (1.0 + b / f.norm());
    CHECK((out.values - expected).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("projection defense guards degenerate setups") {
    LinearModel no_zeros;
    no_zeros.beta = Vector(2);
    no_zeros.beta << 1.0, 2.0;
    QuerySet q = sample_queries(StandardNormal{2}, 10, 16);
    CHECK_THROWS_AS(defend(MvpDefense{1.0}, TargetModel{no_zeros}, q, UtilityBudget{0.1}, 3),
                    config_error);

    LinearModel all_zero;
    all_zero.beta = Vector::Zero(2);
    CHECK_THROWS_AS(defend(MvpDefense{1.0}, TargetModel{all_zero}, q, UtilityBudget{0.1}, 3),
                    degenerate_target_error);
  }

  TEST_CASE("shuffle defense with zero probability is the identity") {
    ProbClassifierModel m = make_prob_classifier(3, 4, 21);
    QuerySet q = sample_queries(StandardNormal{3}, 30, 22);
    ResponseVector clean = evaluate_target(TargetModel{m}, q);
    ResponseVector out = defend(RandomShuffleDefense{0.0}, TargetModel{m}, q, UtilityBudget{0.3}, 8);
    CHECK((out.probs - clean.probs).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("full shuffle over two classes keeps or swaps each row") {
    ProbClassifierModel m = make_prob_classifier(2, 2, 23);
    QuerySet q = sample_queries(StandardNormal{2}, 200, 24);
    ResponseVector clean = evaluate_target(TargetModel{m}, q);
    ResponseVector out = defend(RandomShuffleDefense{1.0}, TargetModel{m}, q, UtilityBudget{0.3}, 9);
    int swapped = 0;
    for (int i = 0; i < 200; ++i) {
      bool kept = std::abs(out.probs(i, 0) - clean.probs(i, 0)) < 1e-15 &&
                  std::abs(out.probs(i, 1) - clean.probs(i, 1)) < 1e-15;
      bool flip = std::abs(out.probs(i, 0) - clean.probs(i, 1)) < 1e-15 &&
                  std::abs(out.probs(i, 1) - clean.probs(i, 0)) < 1e-15;
      CHECK((kept || flip));
      swapped += flip ? 1 : 0;
    }
    CHECK(swapped > 0);  // a 200-row batch without a single swap is ~2^-200
  }

  TEST_CASE("shuffle rate matches the configured probability") {
    // Two classes with distinct values: a modified row is visible iff the
    // non-identity permutation was drawn, probability xi/2.
    const int n = 10000;
    ProbClassifierModel m = make_prob_classifier(2, 2, 25);
    QuerySet q = sample_queries(StandardNormal{2}, n, 26);
    ResponseVector clean = evaluate_target(TargetModel{m}, q);
    ResponseVector out =
        defend(RandomShuffleDefense{0.3}, TargetModel{m}, q, UtilityBudget{0.3}, 10);
    int changed = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(out.probs(i, 0) - clean.probs(i, 0)) > 1e-15) ++changed;
    double p = 0.3 * 0.5;
    double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(changed / static_cast<double>(n) - p) < 3.0 * se);
  }

  TEST_CASE("logit shift at zero scale is the identity") {
    ProbClassifierModel m = make_prob_classifier(3, 3, 27);
    QuerySet q = sample_queries(StandardNormal{3}, 40, 28);
    ResponseVector clean = evaluate_target(TargetModel{m}, q);
    ResponseVector out = defend(MisleadingShiftDefense{0.0}, TargetModel{m}, q, UtilityBudget{0}, 0);
    CHECK((out.probs - clean.probs).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("logit shift on a uniform binary row gives three-to-one odds") {
    // Zero weights make every clean row exactly (0.5, 0.5); shifting the
    // dominating class by ln 3 rescales to (1.5, 0.5)/2 = (0.75, 0.25).
    ProbClassifierModel m;
    m.weights = Matrix::Zero(2, 2);
    m.bias = Vector::Zero(2);
    QuerySet q = sample_queries(StandardNormal{2}, 5, 29);
    ResponseVector out = defend(MisleadingShiftDefense{std::log(3.0)}, TargetModel{m}, q,
                                UtilityBudget{0}, 0);
    for (int i = 0; i < 5; ++i) {
      CHECK(out.probs(i, 0) == doctest::Approx(0.75).epsilon(1e-12));
      CHECK(out.probs(i, 1) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }

  TEST_CASE("huge logit shift saturates to the dominating class") {
    ProbClassifierModel m = make_prob_classifier(2, 3, 30);
    QuerySet q = sample_queries(StandardNormal{2}, 50, 31);
    ResponseVector clean = evaluate_target(TargetModel{m}, q);
    // Identify the dominating class the same way the defense does.
    Vector mean_probs = clean.probs.colwise().mean();
    int k = 0;
    mean_probs.maxCoeff(&k);
    ResponseVector out =
        defend(MisleadingShiftDefense{500.0}, TargetModel{m}, q, UtilityBudget{0}, 0);
    for (int i = 0; i < 50; ++i) CHECK(out.probs(i, k) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("label flip hits its endpoints and its rate") {
    LinearClassifierModel h;
    h.beta = Vector(2);
    h.beta << 1.0, -1.0;
    QuerySet q = sample_queries(UniformCube{2}, 10000, 32);
    ResponseVector clean = evaluate_target(TargetModel{h}, q);

    ResponseVector none = defend(LabelFlipDefense{}, TargetModel{h}, q, UtilityBudget{0.0}, 33);
    CHECK((none.values - clean.values).cwiseAbs().maxCoeff() == 0.0);

    ResponseVector all = defend(LabelFlipDefense{}, TargetModel{h}, q, UtilityBudget{1.0}, 33);
    CHECK((all.values - clean.values).cwiseAbs().minCoeff() == 1.0);

    ResponseVector some = defend(LabelFlipDefense{}, TargetModel{h}, q, UtilityBudget{0.2}, 33);
    double flipped = (some.values - clean.values).cwiseAbs().sum() / 10000.0;
    double se = std::sqrt(0.2 * 0.8 / 10000.0);
    CHECK(std::abs(flipped - 0.2) < 3.0 * se);
  }

  TEST_CASE("boundary shift moves the decision threshold") {
    LinearClassifierModel h;
    h.beta = Vector(1);
    h.beta << 1.0;  // h(x) = 1{x >= 0}; every point in [0,1] is labeled 1
    QuerySet q = sample_queries(UniformCube{1}, 100000, 34);
    ResponseVector clean = evaluate_target(TargetModel{h}, q);

    ResponseVector same = defend(BoundaryShiftDefense{0.0}, TargetModel{h}, q, UtilityBudget{0}, 0);
    CHECK((same.values - clean.values).cwiseAbs().maxCoeff() == 0.0);

    LinearClassifierModel hneg;
    hneg.beta = Vector(1);
    hneg.beta << -1.0;  // labels 0 on (0,1]
    ResponseVector ones =
        defend(BoundaryShiftDefense{50.0}, TargetModel{hneg}, q, UtilityBudget{0}, 0);
    CHECK(ones.values.minCoeff() == 1.0);  // a large shift saturates every label

    // shift -0.3 relabels exactly the mass below 0.3.
    ResponseVector shifted =
        defend(BoundaryShiftDefense{-0.3}, TargetModel{h}, q, UtilityBudget{0}, 0);
    double flip = (shifted.values - clean.values).cwiseAbs().sum() / 100000.0;
    double se = std::sqrt(0.3 * 0.7 / 100000.0);
    CHECK(std::abs(flip - 0.3) < 3.0 * se);
  }

  TEST_CASE("boundary calibration finds the analytic shift") {
    LinearClassifierModel h;
    h.beta = Vector(1);
    h.beta << 1.0;
    CHECK(calibrate_boundary_shift(h, QueryDistribution{UniformCube{1}}, 0.0) == 0.0);
    double s = calibrate_boundary_shift(h, QueryDistribution{UniformCube{1}}, 0.1);
    CHECK(std::abs(s - (-0.1)) < 0.01);
    CHECK_THROWS_AS(calibrate_boundary_shift(h, QueryDistribution{UniformCube{1}}, 0.6),
                    calibration_error);
  }

  TEST_CASE("dispatcher rejects incompatible pairings and unresolved shifts") {
    QuerySet q1 = beta_queries(10, 35);
    LinearClassifierModel h;
    h.beta = Vector(1);
    h.beta << 1.0;
    QuerySet qc = sample_queries(UniformCube{1}, 10, 36);
    CHECK_THROWS_AS(defend(IidNoising{}, TargetModel{h}, qc, UtilityBudget{0.1}, 1), config_error);
    CHECK_THROWS_AS(defend(LabelFlipDefense{}, TargetModel{quad()}, q1, UtilityBudget{0.1}, 1),
                    config_error);
    CHECK_THROWS_AS(defend(MvpDefense{1.0}, TargetModel{quad()}, q1, UtilityBudget{0.1}, 1),
                    config_error);
    CHECK_THROWS_AS(defend(BoundaryShiftDefense{}, TargetModel{h}, qc, UtilityBudget{0.1}, 1),
                    config_error);
    CHECK_THROWS_AS(
        defend(MisleadingShiftDefense{1.0}, TargetModel{quad()}, q1, UtilityBudget{0.1}, 1),
        config_error);
  }

  TEST_CASE("budget exactness flags name the fixed-norm defenses") {
    CHECK(defense_budget_is_exact(ConstantNoising{}));
    CHECK(defense_budget_is_exact(OrderDisguiseDefense{}));
    CHECK(defense_budget_is_exact(MvpDefense{}));
    CHECK(!defense_budget_is_exact(NoDefense{}));
    CHECK(!defense_budget_is_exact(IidNoising{}));
    CHECK(!defense_budget_is_exact(LongRangeNoising{}));
    CHECK(!defense_budget_is_exact(LabelFlipDefense{}));
  }

  TEST_CASE("defense labels are stable identifiers") {
    CHECK(defense_label(NoDefense{}) == "no_defense");
    CHECK(defense_label(IidNoising{}) == "iid_noise");
    CHECK(defense_label(ConstantNoising{+1}) == "constant_noise+");
    CHECK(defense_label(ConstantNoising{-1}) == "constant_noise-");
    CHECK(defense_label(LongRangeNoising{0.2}) == "long_range_g0.2");
    CHECK(defense_label(OrderDisguiseDefense{}) == "order_disguise");
    CHECK(defense_label(OrderDisguiseDefense{7}) == "order_disguise_k7");
    CHECK(defense_label(MvpDefense{1.0}) == "mvp_r1");
    CHECK(defense_label(RandomShuffleDefense{0.3}) == "random_shuffle_x0.3");
    CHECK(defense_label(LabelFlipDefense{}) == "label_flip");
    CHECK(defense_label(BoundaryShiftDefense{}) == "boundary_shift_auto");
    CHECK(defense_label(BoundaryShiftDefense{-0.25}) == "boundary_shift_s-0.25");
    CHECK(defense_label(MisleadingShiftDefense{1.0}) == "misleading_shift_d1");
  }

  TEST_CASE("defense parameter validation") {
    CHECK_THROWS_AS(validate_defense(ConstantNoising{0}), config_error);
    CHECK_THROWS_AS(validate_defense(LongRangeNoising{1.5}), config_error);
    CHECK_THROWS_AS(validate_defense(MvpDefense{0.0}), config_error);
    CHECK_THROWS_AS(validate_defense(RandomShuffleDefense{1.2}), config_error);
    CHECK_THROWS_AS(validate_defense(MisleadingShiftDefense{-0.5}), config_error);
    CHECK_NOTHROW(validate_defense(LongRangeNoising{0.2}));
  }

  TEST_CASE("defended responses are deterministic in the seed") {
    QuerySet q = beta_queries(64, 40);
    for (const DefenseSpec& spec :
         {DefenseSpec{IidNoising{}}, DefenseSpec{LongRangeNoising{0.2}},
          DefenseSpec{OrderDisguiseDefense{}}}) {
      ResponseVector a = defend(spec, TargetModel{quad()}, q, UtilityBudget{0.25}, 1234);
      ResponseVector b = defend(spec, TargetModel{quad()}, q, UtilityBudget{0.25}, 1234);
      CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}
