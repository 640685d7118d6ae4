#include "stealsim/targets.hpp"

#include <cmath>

namespace stealsim {

int query_dim(const QueryDistribution& dist) {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BetaDist>) return 1;
        if constexpr (std::is_same_v<T, UniformCube>) return d.dim;
        if constexpr (std::is_same_v<T, StandardNormal>) return d.dim;
        if constexpr (std::is_same_v<T, HighDimGrouped>) return 40;
      },
      dist);
}

void validate_distribution(const QueryDistribution& dist) {
  if (const auto* b = std::get_if<BetaDist>(&dist)) {
    if (!(b->alpha > 0.0 && b->beta > 0.0))
      throw config_error("Beta shape parameters must be positive");
  } else if (const auto* u = std::get_if<UniformCube>(&dist)) {
    if (u->dim < 1) throw config_error("uniform cube dimension must be >= 1");
  } else if (const auto* s = std::get_if<StandardNormal>(&dist)) {
    if (s->dim < 1) throw config_error("normal dimension must be >= 1");
  }
}

QuerySet sample_queries(const QueryDistribution& dist, int n, std::uint64_t seed) {
  validate_distribution(dist);
  if (n < 1) throw config_error("query count must be >= 1");
  auto rng = make_rng(seed);
  QuerySet q;
  if (const auto* b = std::get_if<BetaDist>(&dist)) {
    std::gamma_distribution<double> ga(b->alpha, 1.0), gb(b->beta, 1.0);
    q.points.resize(n, 1);
    for (int i = 0; i < n; ++i) {
      double x = ga(rng), y = gb(rng);
      q.points(i, 0) = x / (x + y);
    }
    return q;
  }
  if (const auto* u = std::get_if<UniformCube>(&dist)) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    q.points.resize(n, u->dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < u->dim; ++j) q.points(i, j) = unif(rng);
    return q;
  }
  if (const auto* s = std::get_if<StandardNormal>(&dist)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    q.points.resize(n, s->dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < s->dim; ++j) q.points(i, j) = normal(rng);
    return q;
  }
  // Grouped correlated design.
  std::normal_distribution<double> normal(0.0, 1.0);
  const double jitter_sd = 0.1;  // N(0, 0.01)
  q.points.resize(n, 40);
  for (int i = 0; i < n; ++i) {
    double z[3] = {normal(rng), normal(rng), normal(rng)};
    for (int j = 0; j < 15; ++j) q.points(i, j) = z[j / 5] + jitter_sd * normal(rng);
    for (int j = 15; j < 40; ++j) q.points(i, j) = normal(rng);
  }
  return q;
}

PolynomialModel make_poly_scenario_target() {
  PolynomialModel m;
  m.coeffs.resize(3);
  m.coeffs << 1.0, -4.0, 4.0;
  return m;
}

LinearModel make_highdim_model() {
  LinearModel m;
  m.beta = Vector::Zero(40);
  m.beta.head(15).setConstant(3.0);
  return m;
}

std::pair<QuerySet, LinearModel> make_highdim_example1(std::uint64_t seed) {
  return {sample_queries(HighDimGrouped{}, 50, seed), make_highdim_model()};
}

double highdim_signal_variance() {
  // Three groups of five columns with coefficient 3 and shared latent:
  // Var(15 Z_g) + 9 * 5 * Var(jitter), summed over groups.
  return 3.0 * (225.0 + 9.0 * 5.0 * 0.01);
}

ProbClassifierModel make_prob_classifier(int d, int K, std::uint64_t seed) {
  if (K < 2) throw config_error("probability classifier needs at least 2 classes");
  if (d < 1) throw config_error("probability classifier needs input dimension >= 1");
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProbClassifierModel m;
  m.weights.resize(K, d);
  m.bias.resize(K);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) m.weights(k, j) = normal(rng);
    m.bias[k] = normal(rng);
  }
  m.gen_dim = d;
  m.gen_classes = K;
  m.gen_seed = seed;
  return m;
}

}  // namespace stealsim
