#pragma once

#include <vector>

#include "gpsdrf/gps.hpp"

namespace gpsdrf {

enum class DrfMethod { Naive, Weighted, Stratified };

const char* drf_method_name(DrfMethod m);

struct StratumFit {
  std::size_t size = 0;
  Eigen::Vector2d beta;
  std::vector<std::size_t> rows;  // row indices into the fitted dataset
};

// Linear dose-response fit mu(t) = beta0 + beta1 t.
struct DrfFit {
  Eigen::Vector2d beta;
  DrfMethod method = DrfMethod::Naive;
  Vec fitted;                           // beta0 + beta1 t per row
  std::vector<StratumFit> per_stratum;  // Stratified only
  Vec weights_used;                     // Weighted only
};

DrfFit fit_naive(const Dataset& d);

// Weighted least squares with the stabilized weights (no truncation).
DrfFit fit_weighted(const Dataset& d, const WeightSet& ws);

// Quantile strata over the propensity linear predictor. Intervals are
// right-closed with the lowest boundary inclusive; a unit sitting exactly on
// a cut point goes to the lower-indexed stratum. Duplicated cut points fail
// rather than merge strata.
std::vector<int> assign_strata(const Dataset& d, const PropensityFit& f,
                               int l_count);

// Per-stratum OLS pooled with weights n_l / n.
DrfFit fit_stratified(const Dataset& d, const PropensityFit& f, int l_count);

double predict_drf(const DrfFit& fit, double t);

}  // namespace gpsdrf
