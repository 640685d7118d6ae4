#pragma once

#include "stealsim/attackers.hpp"
#include "stealsim/core.hpp"
#include "stealsim/defenses.hpp"
#include "stealsim/targets.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace stealsim {

// One attack/defense round: sample queries, defend, rebuild, score on fresh
// test points.
struct ReplicateOutcome {
  double privacy = std::numeric_limits<double>::quiet_NaN();  // test loss of the rebuilt model
  double utility = std::numeric_limits<double>::quiet_NaN();  // realized per-query loss
  std::optional<int> sym_diff;  // variable-selection symmetric difference
  FitMetadata meta;
  std::string error;        // non-empty when the replicate failed
  double wall_seconds = 0;  // in-memory only; never persisted

  bool ok() const { return error.empty(); }
};

struct CellSpec {
  TargetModel model;
  QueryDistribution dist;
  DefenseSpec defense;
  AttackSpec attack;
  int n = 0;
  double u_n = 0.0;
  int n_test = 1000;
  int replicates = 1;
  std::uint64_t master_seed = 0;
};

// Parameter/pairing validation for a cell, without running anything.
void validate_cell(const CellSpec& cell);

// Runs all replicates of one (defense, n, U_n) cell. Replicate r's streams
// are derived from (master_seed, n, U_n, r) only, so results are identical
// whether replicates run serially or across `jobs` workers, and paired across
// defenses sharing the master seed.
std::vector<ReplicateOutcome> run_cell(const CellSpec& cell, int jobs = 1);

struct PrivacyEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> samples;  // successful replicates, in replicate order
  int failed = 0;
};

PrivacyEstimate privacy_level_estimate(const TargetModel& model, const DefenseSpec& defense,
                                       const AttackSpec& attack, const QueryDistribution& dist,
                                       int n, double u_n, int n_test, int replicates,
                                       std::uint64_t seed, int jobs = 1);

// |S_true \ S_hat| + |S_hat \ S_true| over index sets.
int symmetric_difference(const std::vector<int>& s_true, const std::vector<int>& s_hat);

// Fraction of test queries where the fitted classifier disagrees with the
// target classifier.
double zero_one_error(const FittedModel& fitted, const TargetModel& truth,
                      const QuerySet& test_queries);

}  // namespace stealsim
