#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gpsdrf/variance.hpp"

namespace gpsdrf {

// Confounded data-generating process: covariates [z_1..z_k, z_u] are jointly
// normal with unit variances and cov(z_j, z_u) = sigma_u[j]; the unmeasured
// confounder u = Phi(z_u) enters the outcome while only z_1..z_k are exposed.
//   t = alpha0 + alpha'z + eta,  eta ~ N(0, s2) with s2 chosen so that the
//       propensity R^2 equals r2_target,
//   y = beta0 + beta1 t + sigma2_y u   (sigma2_y multiplies u).
struct DgpParams {
  Vec alpha;    // k exposure coefficients
  Vec sigma_u;  // k covariances with z_u
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double beta1 = 1.0;
  double r2_target = 0.2;
  double sigma2_y = 0.5;
  Eigen::Index n = 1000;

  static DgpParams table1();  // the k = 10 reference parameter set

  Eigen::Index k() const { return alpha.size(); }
  double sum_alpha_sq() const { return alpha.squaredNorm(); }
  double noise_variance() const;  // sum(alpha^2) (1 - r2) / r2
  Mat z_covariance() const;       // (k+1) x (k+1)
  void validate() const;
};

Dataset generate_dataset(const DgpParams& params, Rng& rng);

// Same draw with the latent confounder path kept for diagnostics. The
// estimators never see z_u / u: the Dataset exposes z_1..z_k only.
struct GeneratedDraw {
  Dataset data;
  Vec z_u;
  Vec u;
};
GeneratedDraw generate_dataset_full(const DgpParams& params, Rng& rng);

// One row of the method grid: a point estimator paired with one of its
// variance estimators.
struct MethodSpec {
  DrfMethod estimator;
  VarMethod variance;
};

std::vector<MethodSpec> all_methods();
std::string method_label(const MethodSpec& m);

struct Scenario {
  DgpParams dgp;
  int replicates = 200;                // B
  int empirical_sd_replicates = 1000;  // B', denominator stream
  int n_boot = 200;
  int strata = 10;
  std::vector<MethodSpec> methods = all_methods();
  std::uint64_t master_seed = 0;

  std::string id() const;
  void validate() const;
};

struct MetricRow {
  std::string method;     // e.g. "weighted_linearized"
  std::string parameter;  // "beta0" | "beta1"
  double bias = 0;
  double rmse = 0;
  double mean_se = 0;
  double empirical_sd = 0;
  double variability_ratio = 0;
  double coverage = 0;
  int failures = 0;  // replicates where the method failed
  bool degenerate_empirical_sd = false;
};

// bias, rmse, mean SE, variability ratio and 95% Wald coverage against the
// given truth. Throws DegenerateEmpiricalSd when empirical_sd is zero.
MetricRow metric_formulas(const std::vector<double>& estimates,
                          const std::vector<double>& ses, double truth,
                          double empirical_sd);

// Per-replicate analysis result for one method row.
struct MethodResult {
  MethodSpec method;
  Eigen::Vector2d beta = Eigen::Vector2d::Zero();
  Eigen::Vector2d se = Eigen::Vector2d::Zero();
  bool ok = false;
};

// Test seam: replaces the per-replicate pipeline. point_only marks the B'
// stream, where only the point estimates are consumed.
using ReplicateAnalyzer = std::function<std::vector<MethodResult>(
    const Dataset&, const Scenario&, std::uint64_t replicate_seed,
    bool point_only)>;

ReplicateAnalyzer default_analyzer();

std::vector<MetricRow> run_scenario(const Scenario& s, int threads = 1);
std::vector<MetricRow> run_scenario_with(const Scenario& s, int threads,
                                         const ReplicateAnalyzer& analyze);

}  // namespace gpsdrf
