#include "gpsdrf/variance.hpp"

#include <cmath>

namespace gpsdrf {

const char* var_method_name(VarMethod m) {
  switch (m) {
    case VarMethod::ModelBased: return "model_based";
    case VarMethod::Sandwich: return "sandwich";
    case VarMethod::Linearized: return "linearized";
    case VarMethod::PooledModelBased: return "pooled_model_based";
    case VarMethod::PooledLinearized: return "pooled_linearized";
    case VarMethod::Bootstrap: return "bootstrap";
  }
  return "?";
}

namespace {

void require_method(const DrfFit& fit, DrfMethod m, const char* op) {
  if (fit.method != m)
    throw std::invalid_argument(std::string(op) + ": fit method mismatch");
}

Eigen::Matrix2d symmetrized(const Eigen::Matrix2d& m) {
  return 0.5 * (m + m.transpose());
}

// mean(w x x') for x = (1, t)'.
Mat weighted_gram(const Vec& t, const Vec& w) {
  const double n = static_cast<double>(t.size());
  Mat a(2, 2);
  const double sw = w.sum();
  const double swt = w.dot(t);
  const double swt2 = (w.array() * t.array().square()).sum();
  a << sw / n, swt / n, swt / n, swt2 / n;
  return a;
}

// OLS model-based covariance on (t, y) with residuals e, dispersion
// RSS/(n-2).
Eigen::Matrix2d ols_model_cov(const Vec& t, const Vec& e) {
  const Eigen::Index n = t.size();
  const double s2e = e.squaredNorm() / static_cast<double>(n - 2);
  Mat xtx(2, 2);
  const double st = t.sum();
  xtx << static_cast<double>(n), st, st, t.squaredNorm();
  Mat cov = solve_spd(xtx, Mat(Mat::Identity(2, 2))) * s2e;
  return symmetrized(Eigen::Matrix2d(cov));
}

}  // namespace

VarianceEstimate var_model_based(const Dataset& d, const DrfFit& fit) {
  require_method(fit, DrfMethod::Naive, "var_model_based");
  VarianceEstimate v;
  v.method = VarMethod::ModelBased;
  Vec e = d.y() - fit.fitted;
  v.cov = ols_model_cov(d.t(), e);
  return v;
}

VarianceEstimate var_sandwich_weighted(const Dataset& d, const WeightSet& ws,
                                       const DrfFit& fit) {
  require_method(fit, DrfMethod::Weighted, "var_sandwich_weighted");
  if (ws.w.size() != d.n())
    throw std::invalid_argument("var_sandwich_weighted: weight count != n");
  const Eigen::Index n = d.n();
  const double dn = static_cast<double>(n);
  Mat a = weighted_gram(d.t(), ws.w);
  Vec e = d.y() - fit.fitted;
  Vec we = ws.w.array() * e.array();
  Mat m(2, 2);
  const double s0 = we.squaredNorm();
  const double s1 = (we.array().square() * d.t().array()).sum();
  const double s2 = (we.array().square() * d.t().array().square()).sum();
  m << s0 / dn, s1 / dn, s1 / dn, s2 / dn;
  Mat ainv = solve_spd(a, Mat(Mat::Identity(2, 2)));
  VarianceEstimate v;
  v.method = VarMethod::Sandwich;
  v.cov = symmetrized(Eigen::Matrix2d(ainv * m * ainv.transpose() / dn));
  return v;
}

std::pair<LinearizedVariables, VarianceEstimate> linearized_weighted(
    const Dataset& d, const PropensityFit& f, const WeightSet& ws,
    const DrfFit& fit) {
  require_method(fit, DrfMethod::Weighted, "linearized_weighted");
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (ws.w.size() != n || ws.grad_w.rows() != n || ws.grad_w.cols() != p + 4 ||
      f.linpred.size() != n)
    throw std::invalid_argument("linearized_weighted: inputs do not match dataset");
  const double dn = static_cast<double>(n);

  Mat x = d.design();
  Vec e = d.y() - fit.fitted;

  // H_i = (1, t_i)' e_i, rows of an n x 2 matrix
  Mat h(n, 2);
  h.col(0) = e;
  h.col(1) = d.t().array() * e.array();

  Mat a = weighted_gram(d.t(), ws.w);
  Mat b = h.transpose() * ws.grad_w / dn;  // 2 x (p+4)

  // Block-diagonal C: 1, (n-1)/n, mean(ztilde ztilde'), (n-p-1)/n
  Mat c = Mat::Zero(p + 4, p + 4);
  c(0, 0) = 1.0;
  c(1, 1) = static_cast<double>(n - 1) / dn;
  c.block(2, 2, p + 1, p + 1) = x.transpose() * x / dn;
  c(p + 3, p + 3) = static_cast<double>(n - p - 1) / dn;

  // F_i(gamma-hat), rows of an n x (p+4) matrix
  Mat fm(n, p + 4);
  Vec dm = d.t().array() - f.mu_t;
  Vec dc = d.t() - f.linpred;
  fm.col(0) = dm;
  fm.col(1) = dm.array().square() - (dn - 1.0) / dn * f.sigma2_t;
  fm.middleCols(2, p + 1) = x.array().colwise() * dc.array();
  fm.col(p + 3) =
      dc.array().square() - (dn - static_cast<double>(p) - 1.0) / dn * f.sigma2;

  // I_1i = A^{-1} { w_i H_i + B C^{-1} F_i }
  Mat cf = solve_spd(c, Mat(fm.transpose()));       // (p+4) x n
  Mat rhs = (h.array().colwise() * ws.w.array()).matrix().transpose() + b * cf;
  Mat i1 = solve_spd(a, rhs).transpose();           // n x 2

  Eigen::RowVector2d ibar = i1.colwise().mean();
  Mat centered = i1.rowwise() - ibar;
  Eigen::Matrix2d cov =
      (centered.transpose() * centered / (dn * (dn - 1.0))).eval();

  LinearizedVariables lv;
  lv.i1 = std::move(i1);
  VarianceEstimate v;
  v.method = VarMethod::Linearized;
  v.cov = symmetrized(cov);
  return {std::move(lv), v};
}

VarianceEstimate pooled_model_based(const Dataset& d, const DrfFit& fit) {
  require_method(fit, DrfMethod::Stratified, "pooled_model_based");
  const double dn = static_cast<double>(d.n());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& st : fit.per_stratum) {
    const Eigen::Index nl = static_cast<Eigen::Index>(st.size);
    Vec tl(nl), el(nl);
    for (Eigen::Index i = 0; i < nl; ++i) {
      const auto r = static_cast<Eigen::Index>(st.rows[static_cast<std::size_t>(i)]);
      tl[i] = d.t()[r];
      el[i] = d.y()[r] - st.beta[0] - st.beta[1] * d.t()[r];
    }
    const double pl = static_cast<double>(nl) / dn;
    cov += pl * pl * ols_model_cov(tl, el);
  }
  VarianceEstimate v;
  v.method = VarMethod::PooledModelBased;
  v.cov = symmetrized(cov);
  return v;
}

std::pair<LinearizedVariables, VarianceEstimate> pooled_linearized(
    const Dataset& d, const DrfFit& fit) {
  require_method(fit, DrfMethod::Stratified, "pooled_linearized");
  const double dn = static_cast<double>(d.n());
  LinearizedVariables lv;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  int label = 0;
  for (const auto& st : fit.per_stratum) {
    ++label;
    const Eigen::Index nl = static_cast<Eigen::Index>(st.size);
    const double dnl = static_cast<double>(nl);
    Vec tl(nl), el(nl);
    for (Eigen::Index i = 0; i < nl; ++i) {
      const auto r = static_cast<Eigen::Index>(st.rows[static_cast<std::size_t>(i)]);
      tl[i] = d.t()[r];
      el[i] = d.y()[r] - st.beta[0] - st.beta[1] * d.t()[r];
    }
    const double ml = tl.mean();
    const double s2l = (tl.array() - ml).square().sum() / (dnl - 1.0);
    if (!(s2l > 0.0)) throw ZeroExposureVariance(label);

    // explicit 2x2 inverse of the per-stratum expected Jacobian
    Eigen::Matrix2d minv;
    minv << (s2l + ml * ml) / s2l, -ml / s2l, -ml / s2l, 1.0 / s2l;

    Mat phi(nl, 2);
    phi.col(0) = el;
    phi.col(1) = tl.array() * el.array();
    Mat i2 = phi * minv.transpose();

    Eigen::RowVector2d ibar = i2.colwise().mean();
    Mat centered = i2.rowwise() - ibar;
    const double pl = dnl / dn;
    cov += (pl * pl / (dnl * (dnl - 1.0))) *
           (centered.transpose() * centered).eval();
    lv.i2.push_back(std::move(i2));
  }
  VarianceEstimate v;
  v.method = VarMethod::PooledLinearized;
  v.cov = symmetrized(cov);
  return {std::move(lv), v};
}

namespace {
// stream tag separating bootstrap index draws from everything else
constexpr std::uint64_t kBootStream = 0xb007;
}  // namespace

VarianceEstimate var_bootstrap(const Dataset& d, DrfMethod method, int l_count,
                               int n_boot, std::uint64_t seed) {
  if (method != DrfMethod::Weighted && method != DrfMethod::Stratified)
    throw std::invalid_argument("var_bootstrap: method must be Weighted or Stratified");
  if (n_boot < 2) throw std::invalid_argument("var_bootstrap: n_boot < 2");
  const std::size_t n = static_cast<std::size_t>(d.n());
  const std::uint64_t boot_seed = derive_seed(seed, kBootStream);

  std::vector<Eigen::Vector2d> betas;
  betas.reserve(static_cast<std::size_t>(n_boot));
  int failures = 0;
  std::vector<std::size_t> idx(n);
  for (int r = 0; r < n_boot; ++r) {
    bool ok = false;
    const std::uint64_t rep_seed = derive_seed(boot_seed, static_cast<std::uint64_t>(r));
    for (int attempt = 0; attempt <= 5 && !ok; ++attempt) {
      Rng rng(derive_seed(rep_seed, static_cast<std::uint64_t>(attempt)));
      for (std::size_t i = 0; i < n; ++i) idx[i] = rng.next_below(n);
      try {
        Dataset res = d.subset(idx);
        PropensityFit pf = fit_propensity(res);
        if (method == DrfMethod::Weighted) {
          WeightSet ws = stabilized_weights(res, pf);
          betas.push_back(fit_weighted(res, ws).beta);
        } else {
          betas.push_back(fit_stratified(res, pf, l_count).beta);
        }
        ok = true;
      } catch (const Error&) {
      }
    }
    if (!ok) ++failures;
  }
  if (10 * failures > n_boot || betas.size() < 2)
    throw BootstrapDegenerate(failures, n_boot);

  const double m = static_cast<double>(betas.size());
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& b : betas) mean += b;
  mean /= m;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& b : betas) {
    Eigen::Vector2d c = b - mean;
    cov += c * c.transpose();
  }
  cov /= (m - 1.0);

  VarianceEstimate v;
  v.method = VarMethod::Bootstrap;
  v.cov = symmetrized(cov);
  v.n_boot = n_boot;
  v.boot_failures = failures;
  return v;
}

}  // namespace gpsdrf
