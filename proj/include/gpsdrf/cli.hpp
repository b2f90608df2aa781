#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <cstdint>

namespace gpsdrf::cli {

// All commands return a process exit code: 0 on success, 2 on any data,
// config or estimation error (a structured "error: <Kind>: ..." line goes to
// err), 1 on unexpected internal failures.

struct EstimateConfig {
  std::string input_path;
  std::string outcome;
  std::string exposure;
  std::vector<std::string> covariates;
  std::vector<std::string> methods = {"naive", "weighted", "stratified"};
  int strata = 10;
  int n_boot = 200;  // 0 disables bootstrap standard errors
  std::optional<std::uint64_t> seed;
  std::string out_path;  // JSON report path; empty = stdout table only
  bool drop_incomplete = false;
  double weight_threshold = 10.0;
  // Optional percentile truncation of the stabilized weights (clamp to the
  // [pct, 100-pct] percentiles). A sensitivity switch only: the reported
  // linearized variance does not account for it. Off by default and in all
  // acceptance runs.
  std::optional<double> truncate_pct;
};

int cmd_estimate(const EstimateConfig& config, std::ostream& out,
                 std::ostream& err);

struct SimulateConfig {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_path;
  // CLI overrides of config-file values
  std::optional<int> replicates;
  std::optional<int> empirical_sd_replicates;
  std::optional<int> n_boot;
  std::optional<int> strata;
};

int cmd_simulate(const SimulateConfig& config, std::ostream& out,
                 std::ostream& err);

struct ReportConfig {
  std::string metrics_path;
  std::string format = "md";  // md | csv | json
  std::string out_path;       // empty = stdout
};

int cmd_report(const ReportConfig& config, std::ostream& out, std::ostream& err);

}  // namespace gpsdrf::cli
