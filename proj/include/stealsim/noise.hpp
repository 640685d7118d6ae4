#pragma once

#include "stealsim/common.hpp"
#include "stealsim/core.hpp"

#include <cstdint>

namespace stealsim {

// n independent N(0, variance) draws.
Vector sample_iid_gaussian(int n, double variance, std::uint64_t seed);

// Hurst index of the long-range noise family parameterised by the decay
// exponent gamma in (0,1): correlations decay like k^(-gamma).
double hurst_from_gamma(double gamma);

// Autocovariance of stationary fractional Gaussian noise at the given lag.
double fgn_autocovariance(double variance, double hurst, int lag);

// Exact sample of length-n fractional Gaussian noise via circulant embedding
// of the covariance (spectral synthesis). E[x_a x_b] = fgn_autocovariance(|a-b|)
// holds exactly, not asymptotically.
Vector sample_fgn(int n, double variance, double hurst, std::uint64_t seed);

// Long-range noise as used by defenses: fGn with hurst_from_gamma(gamma).
Vector sample_long_range(int n, double variance, double gamma, std::uint64_t seed);

// Reorder a stationary noise sequence so that consecutive sequence entries
// land on queries that are adjacent after sorting by the given coordinate:
// the i-th smallest query receives noise[i]. Ties break by query index.
Vector assign_noise_by_query_order(const Vector& noise, const QuerySet& queries, int coord = 0);

}  // namespace stealsim
