#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "gpsdrf/errors.hpp"

namespace gpsdrf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Reciprocal condition number below which symmetric solves are rejected.
inline constexpr double kMinRcond = 1e-12;

// Reciprocal condition number (min eigenvalue / max |eigenvalue|) of a
// symmetric matrix. Negative when the matrix is not positive definite.
double rcond_sym(const Mat& a);

// Solve a·x = b for symmetric positive definite a (Cholesky + one step of
// iterative refinement). Throws SingularMatrix when the factorization fails
// or rcond < kMinRcond.
Mat solve_spd(const Mat& a, const Mat& b);
Vec solve_spd(const Mat& a, const Vec& b);

double normal_pdf(double x, double mean, double variance);

// Standard normal CDF via erfc; absolute error well below 1e-12.
double normal_cdf(double x);

// Linear-interpolation quantiles: the k-th order statistic sits at
// probability (k-1)/(n-1). probs must be sorted and within [0,1].
std::vector<double> quantiles(const std::vector<double>& values,
                              const std::vector<double>& probs);

// --------------------------------------------------------------------------
// Deterministic RNG.
//
// Generator: xoshiro256++ (Blackman & Vigna), state seeded from a single
// 64-bit seed through the SplitMix64 sequence. Sub-streams are derived with
// derive_seed, so any tree of streams is reproducible from one master seed
// independently of scheduling:
//
//   sub-seed = mix64(seed + GOLDEN * (tag + 1))
//
// where mix64 is the SplitMix64 finalizer and GOLDEN = 2^64 / phi.
// --------------------------------------------------------------------------

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed + kGolden * (tag + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform01();

  // Uniform integer in [0, bound) via the multiply-high mapping.
  std::uint64_t next_below(std::uint64_t bound);

  // Standard normal draw (Box-Muller, second member of each pair cached).
  double normal();

 private:
  std::array<std::uint64_t, 4> state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// count independent N(mean, cov) draws, one per row. Throws SingularMatrix
// when cov has no Cholesky factorization.
Mat mvn_sample(Rng& rng, const Vec& mean, const Mat& cov, Eigen::Index count);

// Run fn(0..count-1) on up to `threads` workers. Any exception is rethrown
// on the calling thread. Results must be keyed by index by the caller; the
// scheduling order is unspecified.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gpsdrf
