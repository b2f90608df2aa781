#include "gpsdrf/simulation.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gpsdrf {

namespace {
// sub-stream tags (see README, "Seeding")
constexpr std::uint64_t kReplicateStream = 1;  // B estimation replicates
constexpr std::uint64_t kEmpiricalStream = 2;  // B' empirical-SD replicates
constexpr std::uint64_t kGenTag = 0;           // dataset generation
constexpr std::uint64_t kBootWeightedTag = 1;
constexpr std::uint64_t kBootStratifiedTag = 2;
}  // namespace

DgpParams DgpParams::table1() {
  DgpParams p;
  p.alpha.resize(10);
  p.alpha << 1, 1.5, 2, 3, -2, -2, 1, 1.5, 2, 3;
  p.sigma_u.resize(10);
  p.sigma_u << 0.2, 0.3, -0.4, -0.3, -0.2, 0.15, 0.2, -0.2, -0.2, 0.2;
  return p;
}

double DgpParams::noise_variance() const {
  return sum_alpha_sq() * (1.0 - r2_target) / r2_target;
}

Mat DgpParams::z_covariance() const {
  const Eigen::Index dim = k() + 1;
  Mat cov = Mat::Identity(dim, dim);
  cov.col(dim - 1).head(k()) = sigma_u;
  cov.row(dim - 1).head(k()) = sigma_u.transpose();
  return cov;
}

void DgpParams::validate() const {
  if (k() < 1) throw ConfigError("dgp.alpha", "at least one covariate required");
  if (sigma_u.size() != k())
    throw ConfigError("dgp.sigma_u", "length must match alpha");
  if (!(r2_target > 0.0 && r2_target < 1.0))
    throw ConfigError("dgp.r2", "must lie in (0,1)");
  if (!(sigma2_y > 0.0)) throw ConfigError("dgp.sigma2_y", "must be > 0");
  if (!(sum_alpha_sq() > 0.0))
    throw ConfigError("dgp.alpha", "must not be all zero");
  if (!(sigma_u.squaredNorm() < 1.0))
    throw ConfigError("dgp.sigma_u", "sum of squares must be < 1 (SPD covariance)");
  if (n < k() + 3) throw ConfigError("dgp.n", "need n >= k + 3");
}

GeneratedDraw generate_dataset_full(const DgpParams& params, Rng& rng) {
  params.validate();
  const Eigen::Index n = params.n;
  const Eigen::Index k = params.k();

  Mat draws = mvn_sample(rng, Vec::Zero(k + 1), params.z_covariance(), n);
  Mat z = draws.leftCols(k);
  Vec z_u = draws.col(k);
  Vec u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = normal_cdf(z_u[i]);

  const double sd_eta = std::sqrt(params.noise_variance());
  Vec t(n);
  for (Eigen::Index i = 0; i < n; ++i)
    t[i] = params.alpha0 + z.row(i).dot(params.alpha) + sd_eta * rng.normal();

  // y = beta0 + beta1 t + sigma2_y u, with sigma2_y multiplying u
  Vec y = params.beta0 + params.beta1 * t.array() + params.sigma2_y * u.array();

  std::vector<std::string> names(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j)
    names[static_cast<std::size_t>(j)] = "Z" + std::to_string(j + 1);
  return GeneratedDraw{
      Dataset(std::move(y), std::move(t), std::move(z), std::move(names)),
      std::move(z_u), std::move(u)};
}

Dataset generate_dataset(const DgpParams& params, Rng& rng) {
  return generate_dataset_full(params, rng).data;
}

std::vector<MethodSpec> all_methods() {
  return {
      {DrfMethod::Naive, VarMethod::ModelBased},
      {DrfMethod::Weighted, VarMethod::Sandwich},
      {DrfMethod::Weighted, VarMethod::Linearized},
      {DrfMethod::Weighted, VarMethod::Bootstrap},
      {DrfMethod::Stratified, VarMethod::PooledModelBased},
      {DrfMethod::Stratified, VarMethod::PooledLinearized},
      {DrfMethod::Stratified, VarMethod::Bootstrap},
  };
}

std::string method_label(const MethodSpec& m) {
  return std::string(drf_method_name(m.estimator)) + "_" +
         var_method_name(m.variance);
}

namespace {

bool valid_pairing(const MethodSpec& m) {
  switch (m.estimator) {
    case DrfMethod::Naive:
      return m.variance == VarMethod::ModelBased;
    case DrfMethod::Weighted:
      return m.variance == VarMethod::Sandwich ||
             m.variance == VarMethod::Linearized ||
             m.variance == VarMethod::Bootstrap;
    case DrfMethod::Stratified:
      return m.variance == VarMethod::PooledModelBased ||
             m.variance == VarMethod::PooledLinearized ||
             m.variance == VarMethod::Bootstrap;
  }
  return false;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Scenario::validate() const {
  dgp.validate();
  if (replicates < 2) throw ConfigError("replicates", "must be >= 2");
  if (empirical_sd_replicates < 2)
    throw ConfigError("empirical_sd_replicates", "must be >= 2");
  if (strata < 1) throw ConfigError("strata", "must be >= 1");
  if (methods.empty()) throw ConfigError("methods", "must be non-empty");
  for (const auto& m : methods) {
    if (!valid_pairing(m))
      throw ConfigError("methods", "invalid estimator/variance pairing " +
                                       method_label(m));
    if (m.variance == VarMethod::Bootstrap && n_boot < 2)
      throw ConfigError("n_boot", "must be >= 2 when bootstrap is requested");
  }
}

std::string Scenario::id() const {
  std::ostringstream os;
  os << "n=" << dgp.n << ";r2=" << fmt_double(dgp.r2_target)
     << ";s2y=" << fmt_double(dgp.sigma2_y) << ";b0=" << fmt_double(dgp.beta0)
     << ";b1=" << fmt_double(dgp.beta1) << ";B=" << replicates
     << ";Bp=" << empirical_sd_replicates << ";nboot=" << n_boot
     << ";L=" << strata << ";seed=" << master_seed << ";methods=";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (i) os << ',';
    os << method_label(methods[i]);
  }
  return os.str();
}

namespace {

struct Metrics {
  double bias, rmse, mean_se, coverage;
};

Metrics compute_metrics(const std::vector<double>& estimates,
                        const std::vector<double>& ses, double truth) {
  const double b = static_cast<double>(estimates.size());
  double sum = 0, sumsq = 0, sums = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double dev = estimates[i] - truth;
    sum += dev;
    sumsq += dev * dev;
    sums += ses[i];
    if (std::abs(dev) <= 1.96 * ses[i]) ++covered;
  }
  return {sum / b, std::sqrt(sumsq / b), sums / b,
          static_cast<double>(covered) / b};
}

}  // namespace

MetricRow metric_formulas(const std::vector<double>& estimates,
                          const std::vector<double>& ses, double truth,
                          double empirical_sd) {
  if (estimates.size() != ses.size())
    throw std::invalid_argument("metric_formulas: length mismatch");
  if (estimates.size() < 2)
    throw std::invalid_argument("metric_formulas: need at least 2 replicates");
  if (empirical_sd == 0.0) throw DegenerateEmpiricalSd();
  Metrics m = compute_metrics(estimates, ses, truth);
  MetricRow row;
  row.bias = m.bias;
  row.rmse = m.rmse;
  row.mean_se = m.mean_se;
  row.empirical_sd = empirical_sd;
  row.variability_ratio = m.mean_se / empirical_sd;
  row.coverage = m.coverage;
  return row;
}

ReplicateAnalyzer default_analyzer() {
  return [](const Dataset& d, const Scenario& s, std::uint64_t replicate_seed,
            bool point_only) {
    std::vector<MethodResult> out(s.methods.size());
    for (std::size_t i = 0; i < s.methods.size(); ++i)
      out[i].method = s.methods[i];

    // point fits, shared across the variance rows of each estimator
    std::optional<DrfFit> naive, weighted, stratified;
    std::optional<PropensityFit> prop;
    std::optional<WeightSet> ws;
    bool need_prop = false, need_naive = false, need_w = false, need_st = false;
    for (const auto& m : s.methods) {
      need_naive |= m.estimator == DrfMethod::Naive;
      need_w |= m.estimator == DrfMethod::Weighted;
      need_st |= m.estimator == DrfMethod::Stratified;
    }
    need_prop = need_w || need_st;

    if (need_naive) {
      try {
        naive = fit_naive(d);
      } catch (const Error&) {
      }
    }
    if (need_prop) {
      try {
        prop = fit_propensity(d);
      } catch (const Error&) {
      }
    }
    if (need_w && prop) {
      try {
        ws = stabilized_weights(d, *prop);
        weighted = fit_weighted(d, *ws);
      } catch (const Error&) {
      }
    }
    if (need_st && prop) {
      try {
        stratified = fit_stratified(d, *prop, s.strata);
      } catch (const Error&) {
      }
    }

    for (std::size_t i = 0; i < s.methods.size(); ++i) {
      const MethodSpec& m = s.methods[i];
      MethodResult& r = out[i];
      const std::optional<DrfFit>* fit = nullptr;
      switch (m.estimator) {
        case DrfMethod::Naive: fit = &naive; break;
        case DrfMethod::Weighted: fit = &weighted; break;
        case DrfMethod::Stratified: fit = &stratified; break;
      }
      if (!fit->has_value()) continue;
      r.beta = (*fit)->beta;
      if (point_only) {
        r.ok = true;
        continue;
      }
      try {
        VarianceEstimate v;
        switch (m.variance) {
          case VarMethod::ModelBased:
            v = var_model_based(d, **fit);
            break;
          case VarMethod::Sandwich:
            v = var_sandwich_weighted(d, *ws, **fit);
            break;
          case VarMethod::Linearized:
            v = linearized_weighted(d, *prop, *ws, **fit).second;
            break;
          case VarMethod::PooledModelBased:
            v = pooled_model_based(d, **fit);
            break;
          case VarMethod::PooledLinearized:
            v = pooled_linearized(d, **fit).second;
            break;
          case VarMethod::Bootstrap: {
            const std::uint64_t tag = m.estimator == DrfMethod::Weighted
                                          ? kBootWeightedTag
                                          : kBootStratifiedTag;
            v = var_bootstrap(d, m.estimator, s.strata, s.n_boot,
                              derive_seed(replicate_seed, tag));
            break;
          }
        }
        r.se = Eigen::Vector2d(v.se(0), v.se(1));
        r.ok = true;
      } catch (const Error&) {
      }
    }
    return out;
  };
}

std::vector<MetricRow> run_scenario(const Scenario& s, int threads) {
  return run_scenario_with(s, threads, default_analyzer());
}

std::vector<MetricRow> run_scenario_with(const Scenario& s, int threads,
                                         const ReplicateAnalyzer& analyze) {
  s.validate();
  const std::size_t b_count = static_cast<std::size_t>(s.replicates);
  const std::size_t bp_count = static_cast<std::size_t>(s.empirical_sd_replicates);
  const std::uint64_t rep_stream = derive_seed(s.master_seed, kReplicateStream);
  const std::uint64_t emp_stream = derive_seed(s.master_seed, kEmpiricalStream);

  std::vector<std::vector<MethodResult>> reps(b_count);
  parallel_for(b_count, threads, [&](std::size_t b) {
    const std::uint64_t seed_b = derive_seed(rep_stream, b);
    Rng rng(derive_seed(seed_b, kGenTag));
    Dataset d = generate_dataset(s.dgp, rng);
    reps[b] = analyze(d, s, seed_b, false);
    if (reps[b].size() != s.methods.size())
      throw std::logic_error("analyzer must return one result per method");
  });

  // B' stream: point estimates per estimator (first row of each estimator)
  struct PointRow {
    std::array<Eigen::Vector2d, 3> beta;
    std::array<bool, 3> ok{{false, false, false}};
  };
  std::vector<PointRow> points(bp_count);
  parallel_for(bp_count, threads, [&](std::size_t b) {
    const std::uint64_t seed_b = derive_seed(emp_stream, b);
    Rng rng(derive_seed(seed_b, kGenTag));
    Dataset d = generate_dataset(s.dgp, rng);
    auto res = analyze(d, s, seed_b, true);
    std::array<bool, 3> seen{{false, false, false}};
    for (const auto& r : res) {
      const auto e = static_cast<std::size_t>(r.method.estimator);
      if (seen[e]) continue;
      seen[e] = true;
      points[b].beta[e] = r.beta;
      points[b].ok[e] = r.ok;
    }
  });

  const double truth[2] = {s.dgp.beta0, s.dgp.beta1};
  std::vector<MetricRow> out;
  for (std::size_t mi = 0; mi < s.methods.size(); ++mi) {
    const MethodSpec& m = s.methods[mi];
    const std::string label = method_label(m);
    const auto e = static_cast<std::size_t>(m.estimator);

    // empirical SD per estimator over the B' stream
    std::vector<double> pe[2];
    int emp_fail = 0;
    for (std::size_t b = 0; b < bp_count; ++b) {
      if (!points[b].ok[e]) {
        ++emp_fail;
        continue;
      }
      pe[0].push_back(points[b].beta[e][0]);
      pe[1].push_back(points[b].beta[e][1]);
    }
    if (10 * emp_fail > s.empirical_sd_replicates || pe[0].size() < 2)
      throw TooManyFailures(label + " (empirical stream)", emp_fail,
                            s.empirical_sd_replicates);

    for (int param = 0; param < 2; ++param) {
      std::vector<double> est, ses;
      int fail = 0;
      for (std::size_t b = 0; b < b_count; ++b) {
        const MethodResult& r = reps[b][mi];
        if (!r.ok) {
          ++fail;
          continue;
        }
        est.push_back(r.beta[param]);
        ses.push_back(r.se[param]);
      }
      if (10 * fail > s.replicates || est.size() < 2)
        throw TooManyFailures(label, fail, s.replicates);

      double mean = 0;
      for (double v : pe[param]) mean += v;
      mean /= static_cast<double>(pe[param].size());
      double ss = 0;
      for (double v : pe[param]) ss += (v - mean) * (v - mean);
      const double emp_sd =
          std::sqrt(ss / static_cast<double>(pe[param].size() - 1));

      Metrics metrics = compute_metrics(est, ses, truth[param]);
      MetricRow row;
      row.method = label;
      row.parameter = param == 0 ? "beta0" : "beta1";
      row.bias = metrics.bias;
      row.rmse = metrics.rmse;
      row.mean_se = metrics.mean_se;
      row.empirical_sd = emp_sd;
      row.coverage = metrics.coverage;
      row.failures = fail;
      if (emp_sd == 0.0) {
        row.degenerate_empirical_sd = true;
        row.variability_ratio = std::numeric_limits<double>::quiet_NaN();
      } else {
        row.variability_ratio = metrics.mean_se / emp_sd;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace gpsdrf
