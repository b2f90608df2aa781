#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gpsdrf/numkit.hpp"

namespace gpsdrf {

// Observed data (z_i, t_i, y_i), immutable after construction. Row order is
// significant: bootstrap resampling and seeding are defined over row indices.
// row_ids trace each row back to the dataset it was subset from.
class Dataset {
 public:
  Dataset(Vec y, Vec t, Mat z, std::vector<std::string> covariate_names,
          std::vector<std::size_t> row_ids = {});

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return z_.cols(); }

  const Vec& y() const { return y_; }
  const Vec& t() const { return t_; }
  const Mat& z() const { return z_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::vector<std::size_t>& row_ids() const { return row_ids_; }

  // [1 | z], the propensity design matrix.
  Mat design() const;

  // New dataset from the given rows (repeats allowed); row_ids are mapped
  // through this dataset's ids.
  Dataset subset(const std::vector<std::size_t>& rows) const;

 private:
  Vec y_, t_;
  Mat z_;
  std::vector<std::string> names_;
  std::vector<std::size_t> row_ids_;
};

struct CsvOptions {
  // Drop rows whose referenced cells are missing or unparseable instead of
  // erroring. Off by default: silent deletion changes n and invalidates the
  // variance formulas, so the library itself never drops.
  bool drop_incomplete = false;
};

struct CsvLoadResult {
  Dataset data;
  std::size_t dropped_rows = 0;
};

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& exposure_col,
                 const std::vector<std::string>& covariate_cols);

CsvLoadResult load_csv(const std::string& path, const std::string& outcome_col,
                       const std::string& exposure_col,
                       const std::vector<std::string>& covariate_cols,
                       const CsvOptions& options);

// Writes header y,t,<covariates> with %.17g values; load_csv on the output
// reproduces every double bit-exactly.
void write_csv(const Dataset& d, const std::string& path);

// Partition by 1-based stratum labels; strata keep input row order and carry
// original row indices. Throws EmptyStratum when a stratum has < 3 rows.
std::vector<Dataset> split_by_strata(const Dataset& d,
                                     const std::vector<int>& assignment,
                                     int l_count);

}  // namespace gpsdrf
