#include "gpsdrf/drf.hpp"

#include <algorithm>
#include <cmath>

namespace gpsdrf {

const char* drf_method_name(DrfMethod m) {
  switch (m) {
    case DrfMethod::Naive: return "naive";
    case DrfMethod::Weighted: return "weighted";
    case DrfMethod::Stratified: return "stratified";
  }
  return "?";
}

namespace {

// 2x2 weighted normal equations for y ~ 1 + t.
Eigen::Vector2d wls_line(const Vec& t, const Vec& y, const Vec* w) {
  double sw = 0, swt = 0, swt2 = 0, swy = 0, swty = 0;
  const Eigen::Index n = t.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = w ? (*w)[i] : 1.0;
    sw += wi;
    swt += wi * t[i];
    swt2 += wi * t[i] * t[i];
    swy += wi * y[i];
    swty += wi * t[i] * y[i];
  }
  Mat m(2, 2);
  m << sw, swt, swt, swt2;
  Vec rhs(2);
  rhs << swy, swty;
  return solve_spd(m, rhs);
}

}  // namespace

DrfFit fit_naive(const Dataset& d) {
  const double mean_t = d.t().mean();
  if ((d.t().array() - mean_t).square().sum() == 0.0) throw ZeroExposureVariance();
  DrfFit fit;
  fit.method = DrfMethod::Naive;
  fit.beta = wls_line(d.t(), d.y(), nullptr);
  fit.fitted = fit.beta[0] + fit.beta[1] * d.t().array();
  return fit;
}

DrfFit fit_weighted(const Dataset& d, const WeightSet& ws) {
  if (ws.w.size() != d.n())
    throw std::invalid_argument("fit_weighted: weight count != n");
  if ((ws.w.array() <= 0.0).any())
    throw std::invalid_argument("fit_weighted: weights must be positive");
  DrfFit fit;
  fit.method = DrfMethod::Weighted;
  fit.beta = wls_line(d.t(), d.y(), &ws.w);
  fit.fitted = fit.beta[0] + fit.beta[1] * d.t().array();
  fit.weights_used = ws.w;
  return fit;
}

std::vector<int> assign_strata(const Dataset& d, const PropensityFit& f,
                               int l_count) {
  if (l_count < 1) throw std::invalid_argument("assign_strata: l_count < 1");
  if (f.linpred.size() != d.n())
    throw std::invalid_argument("assign_strata: fit does not match dataset");
  const Eigen::Index n = d.n();
  if (n < 3 * static_cast<Eigen::Index>(l_count))
    throw EmptyStratum(l_count, "n < 3 * l_count");

  std::vector<double> lin(f.linpred.data(), f.linpred.data() + n);
  std::vector<double> probs(static_cast<std::size_t>(l_count) + 1);
  for (std::size_t k = 0; k < probs.size(); ++k)
    probs[k] = static_cast<double>(k) / static_cast<double>(l_count);
  std::vector<double> cuts = quantiles(lin, probs);
  for (std::size_t k = 1; k < cuts.size(); ++k)
    if (!(cuts[k] > cuts[k - 1]))
      throw EmptyStratum(static_cast<int>(k), "duplicated quantile cut points");

  // inner cut points; stratum = 1 + #{cuts strictly below the value}
  std::vector<int> assignment(static_cast<std::size_t>(n));
  const auto first = cuts.begin() + 1;
  const auto last = cuts.end() - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto it = std::lower_bound(first, last, f.linpred[i]);
    assignment[static_cast<std::size_t>(i)] = 1 + static_cast<int>(it - first);
  }
  std::vector<int> counts(static_cast<std::size_t>(l_count), 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a - 1)];
  for (int l = 1; l <= l_count; ++l)
    if (counts[static_cast<std::size_t>(l - 1)] < 3) throw EmptyStratum(l);
  return assignment;
}

DrfFit fit_stratified(const Dataset& d, const PropensityFit& f, int l_count) {
  const std::vector<int> assignment = assign_strata(d, f, l_count);
  const Eigen::Index n = d.n();

  DrfFit fit;
  fit.method = DrfMethod::Stratified;
  fit.per_stratum.resize(static_cast<std::size_t>(l_count));
  for (Eigen::Index i = 0; i < n; ++i)
    fit.per_stratum[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)] - 1)]
        .rows.push_back(static_cast<std::size_t>(i));

  fit.beta.setZero();
  for (int l = 0; l < l_count; ++l) {
    auto& st = fit.per_stratum[static_cast<std::size_t>(l)];
    st.size = st.rows.size();
    const Eigen::Index nl = static_cast<Eigen::Index>(st.size);
    Vec tl(nl), yl(nl);
    for (Eigen::Index i = 0; i < nl; ++i) {
      tl[i] = d.t()[static_cast<Eigen::Index>(st.rows[static_cast<std::size_t>(i)])];
      yl[i] = d.y()[static_cast<Eigen::Index>(st.rows[static_cast<std::size_t>(i)])];
    }
    const double ml = tl.mean();
    if ((tl.array() - ml).square().sum() == 0.0) throw ZeroExposureVariance(l + 1);
    st.beta = wls_line(tl, yl, nullptr);
    fit.beta += (static_cast<double>(nl) / static_cast<double>(n)) * st.beta;
  }
  fit.fitted = fit.beta[0] + fit.beta[1] * d.t().array();
  return fit;
}

double predict_drf(const DrfFit& fit, double t) {
  return fit.beta[0] + fit.beta[1] * t;
}

}  // namespace gpsdrf
