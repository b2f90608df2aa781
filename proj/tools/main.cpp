#include <CLI11.hpp>

#include <iostream>

#include "gpsdrf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generalized-propensity-score estimation of linear dose-response "
               "functions with sandwich, linearized, pooled and bootstrap "
               "variance estimators, plus a Monte-Carlo simulation engine"};
  app.require_subcommand(1);

  gpsdrf::cli::EstimateConfig ec;
  std::uint64_t est_seed = 0;
  double truncate_pct = 0;
  auto* est = app.add_subcommand("estimate",
                                 "Fit the dose-response function on a CSV dataset");
  est->add_option("--input", ec.input_path, "input CSV file")->required();
  est->add_option("--outcome", ec.outcome, "outcome column")->required();
  est->add_option("--exposure", ec.exposure, "exposure column")->required();
  est->add_option("--covariates", ec.covariates,
                  "comma-separated covariate columns")
      ->required()
      ->delimiter(',');
  est->add_option("--methods", ec.methods,
                  "estimators to run (naive,weighted,stratified)")
      ->delimiter(',');
  est->add_option("--strata", ec.strata, "stratum count for the stratified estimator");
  est->add_option("--nboot", ec.n_boot, "bootstrap replicates (0 disables)");
  auto* est_seed_opt = est->add_option("--seed", est_seed, "master seed (required with bootstrap)");
  est->add_option("--out", ec.out_path, "JSON report path");
  est->add_flag("--drop-incomplete", ec.drop_incomplete,
                "drop rows with missing/unparseable referenced cells");
  est->add_option("--weight-threshold", ec.weight_threshold,
                  "diagnostic threshold for extreme weights");
  auto* trunc_opt = est->add_option("--truncate-weights", truncate_pct,
                                    "clamp weights to the [p,100-p] percentiles");

  gpsdrf::cli::SimulateConfig sc;
  std::uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo scenario grid");
  sim->add_option("--config", sc.config_path, "scenario grid JSON")->required();
  sim->add_option("--seed", sim_seed, "master seed")->required();
  sim->add_option("--threads", sc.threads, "worker count");
  sim->add_option("--out", sc.out_path, "metrics CSV path")->required();
  int ov_b = 0, ov_bp = 0, ov_nboot = -1, ov_strata = 0;
  auto* ob = sim->add_option("--replicates", ov_b, "override replicate count");
  auto* obp = sim->add_option("--empirical-sd-replicates", ov_bp,
                              "override empirical-SD replicate count");
  auto* onb = sim->add_option("--nboot", ov_nboot, "override bootstrap count");
  auto* ost = sim->add_option("--strata", ov_strata, "override stratum count");

  gpsdrf::cli::ReportConfig rc;
  auto* rep = app.add_subcommand("report", "Pivot a metrics CSV into summary tables");
  rep->add_option("--metrics", rc.metrics_path, "metrics CSV from simulate")->required();
  rep->add_option("--format", rc.format, "md | csv | json");
  rep->add_option("--out", rc.out_path, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (est->parsed()) {
    if (est_seed_opt->count() > 0) ec.seed = est_seed;
    if (trunc_opt->count() > 0) ec.truncate_pct = truncate_pct;
    return gpsdrf::cli::cmd_estimate(ec, std::cout, std::cerr);
  }
  if (sim->parsed()) {
    sc.seed = sim_seed;
    if (ob->count() > 0) sc.replicates = ov_b;
    if (obp->count() > 0) sc.empirical_sd_replicates = ov_bp;
    if (onb->count() > 0) sc.n_boot = ov_nboot;
    if (ost->count() > 0) sc.strata = ov_strata;
    return gpsdrf::cli::cmd_simulate(sc, std::cout, std::cerr);
  }
  if (rep->parsed()) return gpsdrf::cli::cmd_report(rc, std::cout, std::cerr);
  return 1;
}
