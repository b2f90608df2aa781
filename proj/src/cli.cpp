#include "gpsdrf/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gpsdrf/simulation.hpp"

namespace gpsdrf::cli {

namespace {

// ---------------------------------------------------------------------------
// deterministic JSON writer: insertion-ordered keys, doubles as %.17g,
// non-finite values as null
// ---------------------------------------------------------------------------
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    separate();
    write_string(k);
    os_ << ": ";
    after_key_ = true;
    return *this;
  }
  JsonWriter& value(double v) {
    separate();
    if (!std::isfinite(v)) {
      os_ << "null";
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os_ << buf;
    }
    return *this;
  }
  JsonWriter& value(const std::string& v) {
    separate();
    write_string(v);
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }
  JsonWriter& value(bool v) {
    separate();
    os_ << (v ? "true" : "false");
    return *this;
  }
  JsonWriter& value(std::int64_t v) {
    separate();
    os_ << v;
    return *this;
  }
  JsonWriter& value(std::uint64_t v) {
    separate();
    os_ << v;
    return *this;
  }
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& null() {
    separate();
    os_ << "null";
    return *this;
  }
  void finish() { os_ << "\n"; }

 private:
  struct Level {
    int count = 0;
  };

  JsonWriter& open(char c) {
    separate();
    os_ << c;
    stack_.push_back({});
    return *this;
  }
  JsonWriter& close(char c) {
    const bool empty = stack_.back().count == 0;
    stack_.pop_back();
    if (!empty) {
      os_ << "\n";
      indent();
    }
    os_ << c;
    return *this;
  }
  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (stack_.empty()) return;
    if (stack_.back().count > 0) os_ << ",";
    os_ << "\n";
    ++stack_.back().count;
    indent();
  }
  void indent() {
    for (std::size_t i = 0; i < stack_.size(); ++i) os_ << "  ";
  }
  void write_string(const std::string& s) {
    os_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': os_ << "\\\""; break;
        case '\\': os_ << "\\\\"; break;
        case '\n': os_ << "\\n"; break;
        case '\r': os_ << "\\r"; break;
        case '\t': os_ << "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            os_ << buf;
          } else {
            os_ << c;
          }
      }
    }
    os_ << '"';
  }

  std::ostream& os_;
  std::vector<Level> stack_;
  bool after_key_ = false;
};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int report_error(std::ostream& err, const Error& e) {
  err << "error: " << e.kind() << ": " << e.what() << "\n";
  return 2;
}

int report_internal(std::ostream& err, const std::exception& e) {
  err << "error: Internal: " << e.what() << "\n";
  return 1;
}

// estimate-command bootstrap streams
constexpr std::uint64_t kEstimateBootWeighted = 21;
constexpr std::uint64_t kEstimateBootStratified = 22;
// simulate-command scenario stream
constexpr std::uint64_t kScenarioStream = 3;

}  // namespace

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

namespace {

struct MethodReport {
  std::string estimator;
  Eigen::Vector2d beta;
  // variance label -> (se0, se1), insertion-ordered
  std::vector<std::pair<std::string, Eigen::Vector2d>> ses;
  int boot_n = 0, boot_failures = 0;
};

Eigen::Vector2d ses_of(const VarianceEstimate& v) {
  return {v.se(0), v.se(1)};
}

}  // namespace

int cmd_estimate(const EstimateConfig& config, std::ostream& out,
                 std::ostream& err) {
  try {
    bool run_naive = false, run_weighted = false, run_stratified = false;
    if (config.methods.empty())
      throw ConfigError("methods", "must name at least one estimator");
    for (const auto& m : config.methods) {
      if (m == "naive") run_naive = true;
      else if (m == "weighted") run_weighted = true;
      else if (m == "stratified") run_stratified = true;
      else throw ConfigError("methods", "unknown estimator '" + m + "'");
    }
    if (config.n_boot != 0 && config.n_boot < 2)
      throw ConfigError("nboot", "must be 0 (disabled) or >= 2");
    const bool bootstrap =
        config.n_boot >= 2 && (run_weighted || run_stratified);
    if (bootstrap && !config.seed)
      throw ConfigError("seed", "required when bootstrap standard errors are requested");
    if (config.truncate_pct &&
        !(*config.truncate_pct > 0.0 && *config.truncate_pct < 50.0))
      throw ConfigError("truncate-weights", "percentile must lie in (0,50)");

    CsvOptions opts;
    opts.drop_incomplete = config.drop_incomplete;
    CsvLoadResult loaded = load_csv(config.input_path, config.outcome,
                                    config.exposure, config.covariates, opts);
    const Dataset& d = loaded.data;

    PropensityFit pf = fit_propensity(d);
    WeightSet ws = stabilized_weights(d, pf);
    WeightDiagnostics diag = weight_diagnostics(ws, config.weight_threshold);

    // optional percentile truncation; the raw weights stay in the diagnostics
    double clamp_lo = 0, clamp_hi = 0;
    if (config.truncate_pct) {
      std::vector<double> wv(ws.w.data(), ws.w.data() + ws.w.size());
      const double pct = *config.truncate_pct / 100.0;
      auto cuts = quantiles(wv, {pct, 1.0 - pct});
      clamp_lo = cuts[0];
      clamp_hi = cuts[1];
      ws.w = ws.w.cwiseMax(clamp_lo).cwiseMin(clamp_hi);
    }

    std::vector<MethodReport> reports;
    if (run_naive) {
      DrfFit fit = fit_naive(d);
      MethodReport r;
      r.estimator = "naive";
      r.beta = fit.beta;
      r.ses.emplace_back("model_based", ses_of(var_model_based(d, fit)));
      reports.push_back(std::move(r));
    }
    if (run_weighted) {
      DrfFit fit = fit_weighted(d, ws);
      MethodReport r;
      r.estimator = "weighted";
      r.beta = fit.beta;
      r.ses.emplace_back("sandwich", ses_of(var_sandwich_weighted(d, ws, fit)));
      r.ses.emplace_back("linearized",
                         ses_of(linearized_weighted(d, pf, ws, fit).second));
      if (bootstrap) {
        VarianceEstimate v =
            var_bootstrap(d, DrfMethod::Weighted, config.strata, config.n_boot,
                          derive_seed(*config.seed, kEstimateBootWeighted));
        r.ses.emplace_back("bootstrap", ses_of(v));
        r.boot_n = v.n_boot;
        r.boot_failures = v.boot_failures;
      }
      reports.push_back(std::move(r));
    }
    if (run_stratified) {
      DrfFit fit = fit_stratified(d, pf, config.strata);
      MethodReport r;
      r.estimator = "stratified";
      r.beta = fit.beta;
      r.ses.emplace_back("pooled_model_based",
                         ses_of(pooled_model_based(d, fit)));
      r.ses.emplace_back("pooled_linearized",
                         ses_of(pooled_linearized(d, fit).second));
      if (bootstrap) {
        VarianceEstimate v =
            var_bootstrap(d, DrfMethod::Stratified, config.strata, config.n_boot,
                          derive_seed(*config.seed, kEstimateBootStratified));
        r.ses.emplace_back("bootstrap", ses_of(v));
        r.boot_n = v.n_boot;
        r.boot_failures = v.boot_failures;
      }
      reports.push_back(std::move(r));
    }

    // ---- human-readable table ----
    char line[160];
    out << "Estimated dose-response function  (n = " << d.n()
        << ", p = " << d.p() << ")\n\n";
    std::snprintf(line, sizeof line, "%-38s %14s %14s\n", "method", "beta0",
                  "beta1");
    out << line;
    for (const auto& r : reports) {
      std::snprintf(line, sizeof line, "%-38s %14s %14s\n", r.estimator.c_str(),
                    fmt6(r.beta[0]).c_str(), fmt6(r.beta[1]).c_str());
      out << line;
      for (const auto& [name, se] : r.ses) {
        std::snprintf(line, sizeof line, "  %-36s %14s %14s\n",
                      (name + " SE").c_str(), ("(" + fmt6(se[0]) + ")").c_str(),
                      ("(" + fmt6(se[1]) + ")").c_str());
        out << line;
      }
    }
    out << "\npropensity R2: " << fmt6(pf.r2) << "\n";
    out << "weights: min=" << fmt6(diag.min) << " mean=" << fmt6(diag.mean)
        << " max=" << fmt6(diag.max) << " cv=" << fmt6(diag.cv) << " count>"
        << fmt6(diag.threshold) << ": " << diag.count_above << "\n";
    if (config.truncate_pct)
      out << "weights truncated to [" << fmt6(clamp_lo) << ", "
          << fmt6(clamp_hi) << "] (" << fmt6(*config.truncate_pct)
          << "th percentile)\n";
    if (loaded.dropped_rows > 0)
      out << "dropped " << loaded.dropped_rows << " incomplete rows\n";

    // ---- machine-readable JSON ----
    if (!config.out_path.empty()) {
      std::ofstream jf(config.out_path, std::ios::binary);
      if (!jf) throw Error("IoError", "cannot write '" + config.out_path + "'");
      JsonWriter w(jf);
      w.begin_object();
      w.key("schema_version").value(1);
      w.key("input").begin_object();
      w.key("path").value(config.input_path);
      w.key("n").value(static_cast<std::int64_t>(d.n()));
      w.key("p").value(static_cast<std::int64_t>(d.p()));
      w.key("outcome").value(config.outcome);
      w.key("exposure").value(config.exposure);
      w.key("covariates").begin_array();
      for (const auto& c : config.covariates) w.value(c);
      w.end_array();
      w.key("dropped_rows").value(static_cast<std::int64_t>(loaded.dropped_rows));
      w.end_object();
      w.key("propensity").begin_object();
      w.key("r2").value(pf.r2);
      w.key("mu_t").value(pf.mu_t);
      w.key("sigma2_t").value(pf.sigma2_t);
      w.key("sigma2").value(pf.sigma2);
      w.key("alpha").begin_array();
      for (Eigen::Index i = 0; i < pf.alpha.size(); ++i) w.value(pf.alpha[i]);
      w.end_array();
      w.end_object();
      w.key("weights").begin_object();
      w.key("min").value(diag.min);
      w.key("max").value(diag.max);
      w.key("mean").value(diag.mean);
      w.key("cv").value(diag.cv);
      w.key("threshold").value(diag.threshold);
      w.key("count_above_threshold")
          .value(static_cast<std::int64_t>(diag.count_above));
      w.key("truncate_pct");
      if (config.truncate_pct)
        w.value(*config.truncate_pct);
      else
        w.null();
      w.end_object();
      w.key("estimates").begin_object();
      for (const auto& r : reports) {
        w.key(r.estimator).begin_object();
        w.key("beta0").value(r.beta[0]);
        w.key("beta1").value(r.beta[1]);
        if (r.estimator == "stratified") w.key("strata").value(config.strata);
        w.key("se").begin_object();
        for (const auto& [name, se] : r.ses) {
          w.key(name).begin_array();
          w.value(se[0]);
          w.value(se[1]);
          w.end_array();
        }
        w.end_object();
        if (r.boot_n > 0) {
          w.key("bootstrap_meta").begin_object();
          w.key("n_boot").value(r.boot_n);
          w.key("failures").value(r.boot_failures);
          w.end_object();
        }
        w.end_object();
      }
      w.end_object();
      w.key("seed");
      if (config.seed)
        w.value(static_cast<std::uint64_t>(*config.seed));
      else
        w.null();
      w.end_object();
      w.finish();
    }
    return 0;
  } catch (const Error& e) {
    return report_error(err, e);
  } catch (const std::exception& e) {
    return report_internal(err, e);
  }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

struct GridConfig {
  std::vector<Eigen::Index> n;
  std::vector<double> r2;
  std::vector<double> sigma2_y;
  std::vector<double> beta1;
  double beta0 = 0.0;
  int replicates = 200;
  int empirical_sd_replicates = 1000;
  int n_boot = 200;
  int strata = 10;
  std::vector<std::string> estimators = {"naive", "weighted", "stratified"};
};

std::vector<double> number_list(const json& j, const std::string& path) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
    return out;
  }
  if (!j.is_array() || j.empty())
    throw ConfigError(path, "expected a number or non-empty array of numbers");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

int int_field(const json& j, const std::string& path, int fallback) {
  if (!j.contains(path)) return fallback;
  if (!j[path].is_number_integer())
    throw ConfigError(path, "expected an integer");
  return j[path].get<int>();
}

GridConfig parse_grid_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw ConfigError(path, e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  if (j.contains("version") &&
      !(j["version"].is_number_integer() && j["version"].get<int>() == 1))
    throw ConfigError("version", "unsupported config version (expected 1)");

  GridConfig g;
  if (j.contains("scale")) {
    const std::string scale = j["scale"].is_string() ? j["scale"].get<std::string>() : "";
    if (scale == "desk") {
      g.replicates = 200;
      g.empirical_sd_replicates = 1000;
    } else if (scale == "paper") {
      g.replicates = 1000;
      g.empirical_sd_replicates = 10000;
    } else {
      throw ConfigError("scale", "expected \"desk\" or \"paper\"");
    }
  }
  if (!j.contains("grid") || !j["grid"].is_object())
    throw ConfigError("grid", "required object with keys n, r2, sigma2_y, beta1");
  const json& grid = j["grid"];
  for (const char* key : {"n", "r2", "sigma2_y", "beta1"})
    if (!grid.contains(key))
      throw ConfigError(std::string("grid.") + key, "required");
  for (double v : number_list(grid["n"], "grid.n")) {
    if (v < 1 || v != std::floor(v))
      throw ConfigError("grid.n", "sample sizes must be positive integers");
    g.n.push_back(static_cast<Eigen::Index>(v));
  }
  g.r2 = number_list(grid["r2"], "grid.r2");
  for (std::size_t i = 0; i < g.r2.size(); ++i)
    if (!(g.r2[i] > 0 && g.r2[i] < 1))
      throw ConfigError("grid.r2[" + std::to_string(i) + "]",
                        "must lie in (0,1)");
  g.sigma2_y = number_list(grid["sigma2_y"], "grid.sigma2_y");
  for (std::size_t i = 0; i < g.sigma2_y.size(); ++i)
    if (!(g.sigma2_y[i] > 0))
      throw ConfigError("grid.sigma2_y[" + std::to_string(i) + "]",
                        "must be > 0");
  g.beta1 = number_list(grid["beta1"], "grid.beta1");

  if (j.contains("beta0")) {
    if (!j["beta0"].is_number()) throw ConfigError("beta0", "expected a number");
    g.beta0 = j["beta0"].get<double>();
  }
  g.replicates = int_field(j, "replicates", g.replicates);
  g.empirical_sd_replicates =
      int_field(j, "empirical_sd_replicates", g.empirical_sd_replicates);
  g.n_boot = int_field(j, "bootstrap", g.n_boot);
  g.strata = int_field(j, "strata", g.strata);
  if (j.contains("methods")) {
    if (!j["methods"].is_array() || j["methods"].empty())
      throw ConfigError("methods", "expected a non-empty array");
    g.estimators.clear();
    for (std::size_t i = 0; i < j["methods"].size(); ++i) {
      if (!j["methods"][i].is_string())
        throw ConfigError("methods[" + std::to_string(i) + "]",
                          "expected a string");
      g.estimators.push_back(j["methods"][i].get<std::string>());
    }
  }
  return g;
}

std::vector<MethodSpec> expand_methods(const std::vector<std::string>& names,
                                       int n_boot) {
  std::vector<MethodSpec> out;
  const bool boot = n_boot >= 2;
  for (const auto& name : names) {
    if (name == "naive") {
      out.push_back({DrfMethod::Naive, VarMethod::ModelBased});
    } else if (name == "weighted") {
      out.push_back({DrfMethod::Weighted, VarMethod::Sandwich});
      out.push_back({DrfMethod::Weighted, VarMethod::Linearized});
      if (boot) out.push_back({DrfMethod::Weighted, VarMethod::Bootstrap});
    } else if (name == "stratified") {
      out.push_back({DrfMethod::Stratified, VarMethod::PooledModelBased});
      out.push_back({DrfMethod::Stratified, VarMethod::PooledLinearized});
      if (boot) out.push_back({DrfMethod::Stratified, VarMethod::Bootstrap});
    } else {
      throw ConfigError("methods", "unknown estimator '" + name + "'");
    }
  }
  return out;
}

const char* kMetricsHeader =
    "n,r2,sigma2_y,beta0_true,beta1_true,strata,replicates,"
    "empirical_sd_replicates,n_boot,scenario_seed,method,parameter,bias,rmse,"
    "mean_se,empirical_sd,variability_ratio,coverage,failures,"
    "degenerate_empirical_sd";

}  // namespace

int cmd_simulate(const SimulateConfig& config, std::ostream& out,
                 std::ostream& err) {
  try {
    if (!config.seed)
      throw ConfigError("seed", "required (stochastic command, no wall-clock default)");
    if (config.out_path.empty()) throw ConfigError("out", "required");
    GridConfig g = parse_grid_config(config.config_path);
    if (config.replicates) g.replicates = *config.replicates;
    if (config.empirical_sd_replicates)
      g.empirical_sd_replicates = *config.empirical_sd_replicates;
    if (config.n_boot) g.n_boot = *config.n_boot;
    if (config.strata) g.strata = *config.strata;

    const std::vector<MethodSpec> methods = expand_methods(g.estimators, g.n_boot);
    const std::uint64_t grid_stream = derive_seed(*config.seed, kScenarioStream);

    std::ofstream mf(config.out_path, std::ios::binary);
    if (!mf) throw Error("IoError", "cannot write '" + config.out_path + "'");
    mf << kMetricsHeader << "\n";

    const std::size_t total =
        g.n.size() * g.r2.size() * g.sigma2_y.size() * g.beta1.size();
    std::size_t index = 0;
    for (Eigen::Index n : g.n) {
      for (double r2 : g.r2) {
        for (double s2y : g.sigma2_y) {
          for (double b1 : g.beta1) {
            Scenario sc;
            sc.dgp = DgpParams::table1();
            sc.dgp.n = n;
            sc.dgp.r2_target = r2;
            sc.dgp.sigma2_y = s2y;
            sc.dgp.beta0 = g.beta0;
            sc.dgp.beta1 = b1;
            sc.replicates = g.replicates;
            sc.empirical_sd_replicates = g.empirical_sd_replicates;
            sc.n_boot = g.n_boot;
            sc.strata = g.strata;
            sc.methods = methods;
            sc.master_seed = derive_seed(grid_stream, index);

            std::vector<MetricRow> rows = run_scenario(sc, config.threads);
            for (const auto& r : rows) {
              mf << n << ',' << fmt17(r2) << ',' << fmt17(s2y) << ','
                 << fmt17(g.beta0) << ',' << fmt17(b1) << ',' << g.strata << ','
                 << g.replicates << ',' << g.empirical_sd_replicates << ','
                 << g.n_boot << ',' << sc.master_seed << ',' << r.method << ','
                 << r.parameter << ',' << fmt17(r.bias) << ',' << fmt17(r.rmse)
                 << ',' << fmt17(r.mean_se) << ',' << fmt17(r.empirical_sd)
                 << ',' << fmt17(r.variability_ratio) << ','
                 << fmt17(r.coverage) << ',' << r.failures << ','
                 << (r.degenerate_empirical_sd ? 1 : 0) << "\n";
            }
            ++index;
            out << "[" << index << "/" << total << "] n=" << n << " r2=" << r2
                << " sigma2_y=" << s2y << " beta1=" << b1 << " done\n";
            out.flush();
          }
        }
      }
    }
    return 0;
  } catch (const Error& e) {
    return report_error(err, e);
  } catch (const std::exception& e) {
    return report_internal(err, e);
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace {

struct MetricsRec {
  double n, r2, sigma2_y, beta1_true;
  std::string method, parameter;
  std::map<std::string, double> values;
};

double parse_number(const std::string& s, const std::string& context) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(context, "expected a number, got '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

const std::vector<std::string> kReportMetrics = {
    "bias", "rmse", "mean_se", "empirical_sd", "variability_ratio", "coverage"};

struct Cell {
  double n, r2, sigma2_y, beta1;
  bool operator<(const Cell& o) const {
    return std::tie(n, r2, sigma2_y, beta1) <
           std::tie(o.n, o.r2, o.sigma2_y, o.beta1);
  }
  std::string label() const {
    std::ostringstream os;
    os << "n=" << n << ",r2=" << r2 << ",s2y=" << sigma2_y << ",b1=" << beta1;
    return os.str();
  }
};

// canonical method ordering: Table-2 order first, unknown labels after
std::vector<std::string> order_methods(const std::set<std::string>& seen) {
  std::vector<std::string> out;
  for (const auto& m : all_methods()) {
    std::string label = method_label(m);
    if (seen.count(label)) out.push_back(label);
  }
  for (const auto& label : seen)
    if (std::find(out.begin(), out.end(), label) == out.end())
      out.push_back(label);
  return out;
}

}  // namespace

int cmd_report(const ReportConfig& config, std::ostream& out,
               std::ostream& err) {
  try {
    if (config.format != "md" && config.format != "csv" &&
        config.format != "json")
      throw ConfigError("format", "expected md, csv or json");

    std::ifstream in(config.metrics_path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open '" + config.metrics_path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty() && line != "\r") lines.push_back(line);

    std::vector<MetricsRec> recs;
    if (!lines.empty()) {
      auto header = split_csv_line(lines[0]);
      std::map<std::string, std::size_t> col;
      for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
      for (const char* required :
           {"n", "r2", "sigma2_y", "beta1_true", "method", "parameter", "bias",
            "rmse", "mean_se", "empirical_sd", "variability_ratio", "coverage"})
        if (!col.count(required))
          throw ConfigError(config.metrics_path,
                            "missing column '" + std::string(required) + "'");
      for (std::size_t r = 1; r < lines.size(); ++r) {
        auto f = split_csv_line(lines[r]);
        if (f.size() < header.size())
          throw ConfigError(config.metrics_path + ":" + std::to_string(r + 1),
                            "row has too few fields");
        MetricsRec rec;
        auto ctx = [&](const char* c) {
          return config.metrics_path + ":" + std::to_string(r + 1) + ":" + c;
        };
        rec.n = parse_number(f[col["n"]], ctx("n"));
        rec.r2 = parse_number(f[col["r2"]], ctx("r2"));
        rec.sigma2_y = parse_number(f[col["sigma2_y"]], ctx("sigma2_y"));
        rec.beta1_true = parse_number(f[col["beta1_true"]], ctx("beta1_true"));
        rec.method = f[col["method"]];
        rec.parameter = f[col["parameter"]];
        for (const auto& metric : kReportMetrics)
          rec.values[metric] = parse_number(f[col[metric]], ctx(metric.c_str()));
        recs.push_back(std::move(rec));
      }
    }

    std::set<Cell> cell_set;
    std::set<std::string> method_set;
    std::set<std::string> param_set;
    std::map<std::tuple<std::string, std::string, std::string>,
             std::map<std::string, double>>
        table;  // (parameter, method, cell-label) -> metric -> value
    std::vector<Cell> cells;
    for (const auto& rec : recs) {
      Cell c{rec.n, rec.r2, rec.sigma2_y, rec.beta1_true};
      cell_set.insert(c);
      method_set.insert(rec.method);
      param_set.insert(rec.parameter);
      table[{rec.parameter, rec.method, c.label()}] = rec.values;
    }
    cells.assign(cell_set.begin(), cell_set.end());
    std::vector<std::string> methods = order_methods(method_set);
    std::vector<std::string> params(param_set.begin(), param_set.end());

    std::ofstream file_out;
    std::ostream* os = &out;
    if (!config.out_path.empty()) {
      file_out.open(config.out_path, std::ios::binary);
      if (!file_out)
        throw Error("IoError", "cannot write '" + config.out_path + "'");
      os = &file_out;
    }

    auto lookup = [&](const std::string& param, const std::string& method,
                      const Cell& cell,
                      const std::string& metric) -> std::optional<double> {
      auto it = table.find({param, method, cell.label()});
      if (it == table.end()) return std::nullopt;
      auto vit = it->second.find(metric);
      if (vit == it->second.end()) return std::nullopt;
      return vit->second;
    };

    if (config.format == "md") {
      for (const auto& param : params) {
        for (const auto& metric : kReportMetrics) {
          *os << "## " << metric << " — " << param << "\n\n";
          *os << "| method |";
          for (const auto& c : cells) *os << " " << c.label() << " |";
          *os << "\n|---|";
          for (std::size_t i = 0; i < cells.size(); ++i) *os << "---:|";
          *os << "\n";
          for (const auto& method : methods) {
            *os << "| " << method << " |";
            for (const auto& c : cells) {
              auto v = lookup(param, method, c, metric);
              *os << " " << (v ? fmt6(*v) : "") << " |";
            }
            *os << "\n";
          }
          *os << "\n";
        }
      }
    } else if (config.format == "csv") {
      *os << "parameter,metric,method,n,r2,sigma2_y,beta1_true,value\n";
      for (const auto& param : params)
        for (const auto& metric : kReportMetrics)
          for (const auto& method : methods)
            for (const auto& c : cells) {
              auto v = lookup(param, method, c, metric);
              if (!v) continue;
              *os << param << ',' << metric << ',' << method << ','
                  << fmt17(c.n) << ',' << fmt17(c.r2) << ','
                  << fmt17(c.sigma2_y) << ',' << fmt17(c.beta1) << ','
                  << fmt17(*v) << "\n";
            }
    } else {  // json
      JsonWriter w(*os);
      w.begin_object();
      w.key("schema_version").value(1);
      w.key("cells").begin_array();
      for (const auto& c : cells) {
        w.begin_object();
        w.key("n").value(c.n);
        w.key("r2").value(c.r2);
        w.key("sigma2_y").value(c.sigma2_y);
        w.key("beta1_true").value(c.beta1);
        w.end_object();
      }
      w.end_array();
      w.key("tables").begin_array();
      for (const auto& param : params) {
        for (const auto& metric : kReportMetrics) {
          w.begin_object();
          w.key("parameter").value(param);
          w.key("metric").value(metric);
          w.key("methods").begin_object();
          for (const auto& method : methods) {
            w.key(method).begin_array();
            for (const auto& c : cells) {
              auto v = lookup(param, method, c, metric);
              if (v)
                w.value(*v);
              else
                w.null();
            }
            w.end_array();
          }
          w.end_object();
          w.end_object();
        }
      }
      w.end_array();
      w.end_object();
      w.finish();
    }
    return 0;
  } catch (const Error& e) {
    return report_error(err, e);
  } catch (const std::exception& e) {
    return report_internal(err, e);
  }
}

}  // namespace gpsdrf::cli
