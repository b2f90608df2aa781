#include "gpsdrf/gps.hpp"

#include <cmath>

namespace gpsdrf {

PropensityFit fit_propensity(const Dataset& d) {
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (n < p + 3)
    throw TooFewRows(static_cast<std::size_t>(n), static_cast<std::size_t>(p + 3));

  PropensityFit f;
  f.mu_t = d.t().mean();
  const double tss = (d.t().array() - f.mu_t).square().sum();
  if (tss == 0.0) throw ZeroExposureVariance();
  f.sigma2_t = tss / static_cast<double>(n - 1);

  Mat x = d.design();
  Mat gram = x.transpose() * x;
  Vec rhs = x.transpose() * d.t();
  try {
    f.alpha = solve_spd(gram, rhs);
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(e.rcond, "propensity design matrix");
  }
  f.linpred = x * f.alpha;
  const double rss = (d.t() - f.linpred).squaredNorm();
  f.sigma2 = rss / static_cast<double>(n - p - 1);
  f.r2 = 1.0 - rss / tss;
  if (!(f.sigma2 > 0.0) || f.r2 > 1.0 - 1e-12)
    throw DegenerateFit("propensity model fits the exposure exactly (sigma2 = 0)");
  return f;
}

WeightSet stabilized_weights(const Dataset& d, const PropensityFit& f) {
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (f.linpred.size() != n || f.alpha.size() != p + 1)
    throw std::invalid_argument("stabilized_weights: fit does not match dataset");
  if (!(f.sigma2 > 0.0) || !(f.sigma2_t > 0.0))
    throw DegenerateFit("propensity fit has non-positive variance");

  WeightSet ws;
  ws.w.resize(n);
  ws.grad_w.resize(n, p + 4);
  const double log_ratio = 0.5 * std::log(f.sigma2 / f.sigma2_t);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dm = d.t()[i] - f.mu_t;       // deviation from marginal mean
    const double dc = d.t()[i] - f.linpred[i];  // propensity residual
    const double logw =
        log_ratio - 0.5 * (dm * dm / f.sigma2_t - dc * dc / f.sigma2);
    const double w = std::exp(logw);
    if (!std::isfinite(w) || w <= 0.0)
      throw DegenerateFit("non-finite stabilized weight");
    ws.w[i] = w;
    ws.grad_w(i, 0) = dm / f.sigma2_t;
    ws.grad_w(i, 1) = (dm * dm / f.sigma2_t - 1.0) / (2.0 * f.sigma2_t);
    const double dalpha = -dc / f.sigma2;
    ws.grad_w(i, 2) = dalpha;  // intercept column of [1|z]
    for (Eigen::Index j = 0; j < p; ++j) ws.grad_w(i, 3 + j) = dalpha * d.z()(i, j);
    ws.grad_w(i, p + 3) = -(dc * dc / f.sigma2 - 1.0) / (2.0 * f.sigma2);
    ws.grad_w.row(i) *= w;
  }
  return ws;
}

WeightDiagnostics weight_diagnostics(const WeightSet& ws, double threshold) {
  WeightDiagnostics diag;
  diag.threshold = threshold;
  const Eigen::Index n = ws.w.size();
  if (n == 0) return diag;
  diag.min = ws.w.minCoeff();
  diag.max = ws.w.maxCoeff();
  diag.mean = ws.w.mean();
  if (n > 1) {
    const double ss = (ws.w.array() - diag.mean).square().sum();
    diag.cv = std::sqrt(ss / static_cast<double>(n - 1)) / diag.mean;
  }
  diag.count_above =
      static_cast<std::size_t>((ws.w.array() > threshold).count());
  return diag;
}

}  // namespace gpsdrf
