#pragma once

#include "stealsim/core.hpp"
#include "stealsim/targets.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace stealsim {

// --- Defense specifications -------------------------------------------------

struct NoDefense {};

// Add IID N(0, U_n) noise to regression responses.
struct IidNoising {};

// Add the constant +/- sqrt(U_n) to every regression response.
struct ConstantNoising {
  int sign = +1;
};

// Add stationary long-range correlated Gaussian noise (variance U_n,
// correlation decay exponent gamma), assigned in sorted-query order.
struct LongRangeNoising {
  double gamma = 0.2;
};

// Spend the whole budget on a perturbation aligned with a degree-k polynomial
// direction, luring order-selecting attackers into overfitting.
struct OrderDisguiseDefense {
  std::optional<int> target_order;  // default: order rule below
};

// Misleading variable projection: pull responses toward the span of a seeded
// rho-subsample of the target's zero-coefficient columns.
struct MvpDefense {
  double rho = 1.0;
};

// With probability xi, replace a probability row by a uniformly random
// permutation of its coordinates.
struct RandomShuffleDefense {
  double xi = 0.0;
};

// Flip each binary label independently with probability U_n.
struct LabelFlipDefense {};

// Report labels of the shifted halfspace 1{beta.x + intercept + shift >= 0}.
// Without an explicit shift the harness calibrates one to the budget.
struct BoundaryShiftDefense {
  std::optional<double> shift;
};

// Add delta to the log-probability of the globally dominating class, then
// re-normalize each row.
struct MisleadingShiftDefense {
  double delta = 0.0;
};

using DefenseSpec =
    std::variant<NoDefense, IidNoising, ConstantNoising, LongRangeNoising, OrderDisguiseDefense,
                 MvpDefense, RandomShuffleDefense, LabelFlipDefense, BoundaryShiftDefense,
                 MisleadingShiftDefense>;

void validate_defense(const DefenseSpec& spec);
std::string defense_label(const DefenseSpec& spec);

// True when the defense consumes the budget with a fixed-norm perturbation,
// making the empirical utility loss equal U_n exactly on every draw.
bool defense_budget_is_exact(const DefenseSpec& spec);

// Dispatcher: checks spec/model compatibility and produces the perturbed
// responses. Deterministic variants ignore the seed.
ResponseVector defend(const DefenseSpec& spec, const TargetModel& model, const QuerySet& queries,
                      const UtilityBudget& budget, std::uint64_t seed);

// --- Variant-specific operations -------------------------------------------

// Default cap on the polynomial orders an order-selecting attacker scans.
int default_max_order(int n);

// Disguise order rule: min(max_order - 1, max(p + 1, ceil(4 ln n))).
int default_disguise_order(int p, int n);

ResponseVector order_disguise(const PolynomialModel& model, const QuerySet& queries,
                              const UtilityBudget& budget, int target_order);

ResponseVector mvp(const LinearModel& model, const QuerySet& queries, const UtilityBudget& budget,
                   double rho, std::uint64_t seed);

ResponseVector random_shuffle(const ProbClassifierModel& model, const QuerySet& queries, double xi,
                              std::uint64_t seed);

ResponseVector misleading_shift(const ProbClassifierModel& model, const QuerySet& queries,
                                double delta);

ResponseVector label_flip(const LinearClassifierModel& model, const QuerySet& queries, double u_n,
                          std::uint64_t seed);

ResponseVector boundary_shift(const LinearClassifierModel& model, const QuerySet& queries,
                              double shift);

// Bisection on the shift magnitude until the Monte Carlo flip fraction hits
// the target budget within tolerance.
double calibrate_boundary_shift(const LinearClassifierModel& model, const QueryDistribution& dist,
                                double target_u, double tolerance = 0.005, int mc_queries = 100000,
                                std::uint64_t seed = 0x5eedca11);

}  // namespace stealsim
