#pragma once

#include <cstddef>

#include "gpsdrf/dataset.hpp"

namespace gpsdrf {

// Gaussian propensity model t = [1|z]'alpha + eta. The full nuisance vector
// is gamma = (mu_t, sigma2_t, alpha_0..alpha_p, sigma2), p+4 parameters.
struct PropensityFit {
  Vec alpha;        // p+1 coefficients, intercept first
  double sigma2;    // residual variance, divisor n-p-1
  double mu_t;      // exposure mean
  double sigma2_t;  // exposure variance, divisor n-1
  Vec linpred;      // [1|z]'alpha per row
  double r2;        // 1 - RSS/TSS of the propensity model

  Eigen::Index gamma_dim() const { return alpha.size() + 3; }
};

PropensityFit fit_propensity(const Dataset& d);

// Stabilized weights w_i = f(t_i; mu_t, sigma2_t) / f(t_i; linpred_i, sigma2)
// and their analytic gradient with respect to gamma. grad_w row i is
// ordered (mu_t, sigma2_t, alpha_0..alpha_p, sigma2).
struct WeightSet {
  Vec w;       // n, strictly positive
  Mat grad_w;  // n x (p+4)
};

WeightSet stabilized_weights(const Dataset& d, const PropensityFit& f);

struct WeightDiagnostics {
  double min = 0, max = 0, mean = 0, cv = 0;
  std::size_t count_above = 0;
  double threshold = 10.0;
};

WeightDiagnostics weight_diagnostics(const WeightSet& ws, double threshold = 10.0);

}  // namespace gpsdrf
