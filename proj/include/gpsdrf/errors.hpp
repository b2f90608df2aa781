#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpsdrf {

// Base class for all recoverable estimation/data errors. kind() is a stable
// machine-readable tag used in CLI error messages and tests.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name, const std::string& detail = "")
      : Error("MissingColumn",
              "column '" + name + "' not found in header" +
                  (detail.empty() ? "" : " (" + detail + ")")),
        name(name) {}
  std::string name;
};

class ParseError : public Error {
 public:
  // row is the 1-based data row (header excluded), col the column name.
  ParseError(std::size_t row, const std::string& col, const std::string& detail = "")
      : Error("ParseError", "row " + std::to_string(row) + ", column '" + col + "': " +
                                (detail.empty() ? "unparseable value" : detail)),
        row(row),
        col(col) {}
  std::size_t row;
  std::string col;
};

class TooFewRows : public Error {
 public:
  TooFewRows(std::size_t n, std::size_t required)
      : Error("TooFewRows", "need at least " + std::to_string(required) +
                                " rows, got " + std::to_string(n)),
        n(n),
        required(required) {}
  std::size_t n, required;
};

class EmptyStratum : public Error {
 public:
  explicit EmptyStratum(int stratum, const std::string& detail = "")
      : Error("EmptyStratum",
              "stratum " + std::to_string(stratum) + " has fewer than 3 units" +
                  (detail.empty() ? "" : " (" + detail + ")")),
        stratum(stratum) {}
  int stratum;
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(double rcond, const std::string& context = "")
      : Error("SingularMatrix",
              (context.empty() ? std::string("matrix") : context) +
                  " is singular or ill-conditioned (rcond ~ " + std::to_string(rcond) + ")"),
        rcond(rcond) {}
  double rcond;
};

class NonPositiveVariance : public Error {
 public:
  explicit NonPositiveVariance(double value)
      : Error("NonPositiveVariance", "variance must be > 0, got " + std::to_string(value)),
        value(value) {}
  double value;
};

class ZeroExposureVariance : public Error {
 public:
  explicit ZeroExposureVariance(int stratum = 0)
      : Error("ZeroExposureVariance",
              stratum == 0 ? std::string("exposure has zero variance")
                           : "exposure has zero variance within stratum " +
                                 std::to_string(stratum)),
        stratum(stratum) {}
  int stratum;  // 0 = whole sample
};

class DegenerateFit : public Error {
 public:
  explicit DegenerateFit(const std::string& detail)
      : Error("DegenerateFit", detail) {}
};

class BootstrapDegenerate : public Error {
 public:
  BootstrapDegenerate(int failures, int total)
      : Error("BootstrapDegenerate",
              std::to_string(failures) + " of " + std::to_string(total) +
                  " bootstrap replicates failed"),
        failures(failures),
        total(total) {}
  int failures, total;
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what)
      : Error("EmptyInput", what + " must be non-empty") {}
};

class DegenerateEmpiricalSd : public Error {
 public:
  DegenerateEmpiricalSd()
      : Error("DegenerateEmpiricalSd", "empirical standard deviation is zero") {}
};

class TooManyFailures : public Error {
 public:
  TooManyFailures(const std::string& method, int failures, int total)
      : Error("TooManyFailures", "method " + method + ": " + std::to_string(failures) +
                                     " of " + std::to_string(total) + " replicates failed"),
        method(method),
        failures(failures),
        total(total) {}
  std::string method;
  int failures, total;
};

class ConfigError : public Error {
 public:
  // key_path identifies the offending config entry, e.g. "grid.r2[1]".
  explicit ConfigError(const std::string& key_path, const std::string& detail)
      : Error("ConfigError", key_path + ": " + detail), key_path(key_path) {}
  std::string key_path;
};

}  // namespace gpsdrf
