#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gpsdrf/drf.hpp"

namespace gpsdrf {

enum class VarMethod {
  ModelBased,
  Sandwich,
  Linearized,
  PooledModelBased,
  PooledLinearized,
  Bootstrap,
};

const char* var_method_name(VarMethod m);

struct VarianceEstimate {
  Eigen::Matrix2d cov;  // symmetric PSD covariance of (beta0, beta1)
  VarMethod method = VarMethod::ModelBased;
  int n_boot = 0;          // Bootstrap only
  int boot_failures = 0;   // Bootstrap only

  double se(int param) const { return std::sqrt(cov(param, param)); }
};

// Estimated linearized variables: i1 holds the n x 2 per-unit rows for the
// weighted estimator, i2 the per-stratum blocks for the stratified one.
// Column means vanish at the fitted parameters.
struct LinearizedVariables {
  Mat i1;
  std::vector<Mat> i2;
};

// Classical OLS covariance of the naive fit, dispersion RSS/(n-2).
VarianceEstimate var_model_based(const Dataset& d, const DrfFit& fit);

// Design-based robust covariance with the weights treated as fixed:
// inv(A) M inv(A)' / n with A = mean(w x x') and M = mean(w^2 e^2 x x').
// No finite-sample factor is applied; the GPS estimation step is ignored.
VarianceEstimate var_sandwich_weighted(const Dataset& d, const WeightSet& ws,
                                       const DrfFit& fit);

// Influence-function variance of the weighted estimator, accounting for the
// estimation of the propensity parameters through B C^{-1} F_i.
std::pair<LinearizedVariables, VarianceEstimate> linearized_weighted(
    const Dataset& d, const PropensityFit& f, const WeightSet& ws,
    const DrfFit& fit);

// Pooled per-stratum OLS model-based covariance, sum p_l^2 Cov_l.
VarianceEstimate pooled_model_based(const Dataset& d, const DrfFit& fit);

// Pooled influence-function variance of the stratified estimator.
std::pair<LinearizedVariables, VarianceEstimate> pooled_linearized(
    const Dataset& d, const DrfFit& fit);

// Case-resampling bootstrap that refits the full pipeline (propensity model,
// then weights or strata, then the DRF) in every replicate. A replicate that
// fails is redrawn with a fresh sub-seed up to 5 times, then counted as
// failed; more than 10% failures aborts. Deterministic given seed.
VarianceEstimate var_bootstrap(const Dataset& d, DrfMethod method, int l_count,
                               int n_boot, std::uint64_t seed);

}  // namespace gpsdrf
