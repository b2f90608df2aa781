#include "gpsdrf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

namespace gpsdrf {

Dataset::Dataset(Vec y, Vec t, Mat z, std::vector<std::string> covariate_names,
                 std::vector<std::size_t> row_ids)
    : y_(std::move(y)),
      t_(std::move(t)),
      z_(std::move(z)),
      names_(std::move(covariate_names)),
      row_ids_(std::move(row_ids)) {
  const Eigen::Index n = y_.size();
  if (t_.size() != n || z_.rows() != n)
    throw std::invalid_argument("Dataset: y, t, z row counts differ");
  if (static_cast<Eigen::Index>(names_.size()) != z_.cols())
    throw std::invalid_argument("Dataset: covariate name count != z columns");
  if (n < 3) throw TooFewRows(static_cast<std::size_t>(n), 3);
  if (!y_.allFinite() || !t_.allFinite() || !z_.allFinite())
    throw std::invalid_argument("Dataset: non-finite value");
  if (row_ids_.empty()) {
    row_ids_.resize(static_cast<std::size_t>(n));
    std::iota(row_ids_.begin(), row_ids_.end(), std::size_t{0});
  } else if (row_ids_.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("Dataset: row_ids length != n");
  }
}

Mat Dataset::design() const {
  Mat x(n(), p() + 1);
  x.col(0).setOnes();
  x.rightCols(p()) = z_;
  return x;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Vec y(m), t(m);
  Mat z(m, p());
  std::vector<std::size_t> ids(rows.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t r = rows[static_cast<std::size_t>(i)];
    if (r >= static_cast<std::size_t>(n()))
      throw std::out_of_range("Dataset::subset: row index out of range");
    y[i] = y_[static_cast<Eigen::Index>(r)];
    t[i] = t_[static_cast<Eigen::Index>(r)];
    z.row(i) = z_.row(static_cast<Eigen::Index>(r));
    ids[static_cast<std::size_t>(i)] = row_ids_[r];
  }
  return Dataset(std::move(y), std::move(t), std::move(z), names_, std::move(ids));
}

namespace {

// RFC-4180 style reader: quoted fields, doubled quotes, newlines inside
// quotes, CRLF or LF terminators.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(record);
    record.clear();
  };
  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::optional<double> parse_cell(const std::string& raw) {
  std::size_t b = raw.find_first_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  std::size_t e = raw.find_last_not_of(" \t");
  const char* first = raw.data() + b;
  const char* last = raw.data() + e + 1;
  double value = 0.0;
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name) {
  std::size_t found = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) {
      if (found != header.size()) throw MissingColumn(name, "duplicated in header");
      found = j;
    }
  }
  if (found == header.size()) throw MissingColumn(name);
  return found;
}

}  // namespace

CsvLoadResult load_csv(const std::string& path, const std::string& outcome_col,
                       const std::string& exposure_col,
                       const std::vector<std::string>& covariate_cols,
                       const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open '" + path + "'");
  // strip a UTF-8 BOM if present
  if (in.peek() == 0xEF) {
    char bom[3];
    in.read(bom, 3);
  }
  auto records = read_csv_records(in);
  if (records.empty()) throw EmptyInput("CSV file");
  const auto& header = records.front();

  std::vector<std::size_t> cols;
  cols.push_back(find_column(header, outcome_col));
  cols.push_back(find_column(header, exposure_col));
  for (const auto& name : covariate_cols) cols.push_back(find_column(header, name));
  std::vector<std::string> col_names;
  col_names.push_back(outcome_col);
  col_names.push_back(exposure_col);
  for (const auto& name : covariate_cols) col_names.push_back(name);

  const std::size_t p = covariate_cols.size();
  std::vector<double> y, t;
  std::vector<double> zflat;  // row-major
  std::size_t dropped = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    std::vector<double> vals(cols.size());
    bool bad = false;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] >= rec.size()) {
        if (options.drop_incomplete) {
          bad = true;
          break;
        }
        throw ParseError(r, col_names[k], "missing field");
      }
      auto v = parse_cell(rec[cols[k]]);
      if (!v) {
        if (options.drop_incomplete) {
          bad = true;
          break;
        }
        throw ParseError(r, col_names[k]);
      }
      vals[k] = *v;
    }
    if (bad) {
      ++dropped;
      continue;
    }
    y.push_back(vals[0]);
    t.push_back(vals[1]);
    for (std::size_t k = 0; k < p; ++k) zflat.push_back(vals[2 + k]);
  }

  const std::size_t n = y.size();
  if (n < p + 3) throw TooFewRows(n, p + 3);
  Vec yv = Eigen::Map<Vec>(y.data(), static_cast<Eigen::Index>(n));
  Vec tv = Eigen::Map<Vec>(t.data(), static_cast<Eigen::Index>(n));
  Mat z(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          zflat[i * p + j];
  return CsvLoadResult{Dataset(std::move(yv), std::move(tv), std::move(z),
                               covariate_cols),
                       dropped};
}

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& exposure_col,
                 const std::vector<std::string>& covariate_cols) {
  return load_csv(path, outcome_col, exposure_col, covariate_cols, CsvOptions{})
      .data;
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IoError", "cannot write '" + path + "'");
  out << "y,t";
  for (const auto& name : d.covariate_names()) out << ',' << name;
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    put(d.y()[i]);
    out << ',';
    put(d.t()[i]);
    for (Eigen::Index j = 0; j < d.p(); ++j) {
      out << ',';
      put(d.z()(i, j));
    }
    out << '\n';
  }
}

std::vector<Dataset> split_by_strata(const Dataset& d,
                                     const std::vector<int>& assignment,
                                     int l_count) {
  if (l_count < 1) throw std::invalid_argument("split_by_strata: l_count < 1");
  if (assignment.size() != static_cast<std::size_t>(d.n()))
    throw std::invalid_argument("split_by_strata: assignment length != n");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(l_count));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    int l = assignment[i];
    if (l < 1 || l > l_count)
      throw std::invalid_argument("split_by_strata: label outside 1..L");
    members[static_cast<std::size_t>(l - 1)].push_back(i);
  }
  for (int l = 1; l <= l_count; ++l)
    if (members[static_cast<std::size_t>(l - 1)].size() < 3) throw EmptyStratum(l);
  std::vector<Dataset> out;
  out.reserve(members.size());
  for (const auto& rows : members) out.push_back(d.subset(rows));
  return out;
}

}  // namespace gpsdrf
