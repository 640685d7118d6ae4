#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

namespace stealsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. Everything user-facing maps onto one of these categories;
// the harness catches them per replicate and records the message.
class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class singular_design_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class convergence_error : public std::runtime_error {
public:
  convergence_error(const std::string& what, double kkt_residual)
      : std::runtime_error(what), kkt_residual_(kkt_residual) {}
  double kkt_residual() const { return kkt_residual_; }

private:
  double kkt_residual_;
};

class calibration_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class degenerate_target_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class fit_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeding. Every random quantity in the toolkit is a pure function of
// (parameters, seed). Replicate seeds are derived by hashing the scenario
// master seed with the cell coordinates and a role tag, so adding replicates
// or defenses never disturbs the streams of existing ones.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t seed_bits(double v) {
  std::uint64_t b = 0;
  static_assert(sizeof(b) == sizeof(v));
  std::memcpy(&b, &v, sizeof(b));
  return b;
}

enum class SeedRole : std::uint64_t {
  Queries = 0x51,
  Defense = 0xde,
  Attack = 0xa7,
  TestPoints = 0x7e,
  Validation = 0x5a,
  Calibration = 0xca,
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n, double u_n,
                                 std::uint64_t replicate, SeedRole role) {
  std::uint64_t h = splitmix64(master);
  h = hash_combine(h, n);
  h = hash_combine(h, seed_bits(u_n));
  h = hash_combine(h, replicate);
  h = hash_combine(h, static_cast<std::uint64_t>(role));
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace stealsim
