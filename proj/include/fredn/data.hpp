#pragma once

// Dataset ingestion, chronological splits, standardization and windowing.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fredn/errors.hpp"

namespace fredn {

struct Dataset {
  std::string name;
  std::vector<std::string> channel_names;
  std::vector<std::string> timestamps;  // passed through verbatim
  Eigen::MatrixXd values;               // T x C

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index channels() const { return values.cols(); }
};

namespace detail {

// Splits one RFC-4180 record. Quoted fields may contain commas and doubled
// quotes; embedded newlines are not supported.
inline std::vector<std::string> split_csv_record(std::string_view line, long line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quoted field", line_no);
  out.push_back(std::move(field));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view cell, long line_no, std::size_t column) {
  const std::string_view s = trim(cell);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(column + 1) +
                         ": non-numeric value '" + std::string(s) + "'",
                     line_no);
  }
  return v;
}

}  // namespace detail

// Header row, then one record per time step: a timestamp column followed by
// numeric channels.
inline Dataset parse_csv(std::istream& in, const std::string& name = "data") {
  Dataset ds;
  ds.name = name;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_record(line, line_no);
    if (width == 0) {
      if (fields.size() < 2) throw ParseError("line 1: header needs a timestamp and at least one channel", line_no);
      width = fields.size();
      ds.channel_names.assign(fields.begin() + 1, fields.end());
      continue;
    }
    if (fields.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    ds.timestamps.push_back(std::move(fields[0]));
    for (std::size_t c = 1; c < width; ++c) flat.push_back(detail::parse_number(fields[c], line_no, c));
  }
  if (width == 0) throw ParseError(name + ": empty file", 0);
  const auto channels = static_cast<Eigen::Index>(width - 1);
  const auto rows = static_cast<Eigen::Index>(ds.timestamps.size());
  ds.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, channels);
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

inline Dataset dataset_from_matrix(std::string name, Eigen::MatrixXd values) {
  Dataset ds;
  ds.name = std::move(name);
  for (Eigen::Index c = 0; c < values.cols(); ++c) ds.channel_names.push_back("c" + std::to_string(c));
  for (Eigen::Index t = 0; t < values.rows(); ++t) ds.timestamps.push_back(std::to_string(t));
  ds.values = std::move(values);
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

// ETT-family datasets use 6:2:2, everything else 7:1:2.
inline SplitRatios default_ratios(bool ett_family) {
  return ett_family ? SplitRatios{0.6, 0.2, 0.2} : SplitRatios{0.7, 0.1, 0.2};
}

struct RowRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};

struct Splits {
  RowRange train, val, test;
};

// Train and val sizes are floor(ratio * T); test takes the remainder.
inline Splits chronological_split(Eigen::Index rows, const SplitRatios& r) {
  if (r.train <= 0.0 || r.val < 0.0 || r.test < 0.0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const auto n = static_cast<double>(rows);
  const auto n_train = static_cast<Eigen::Index>(std::floor(r.train * n + 1e-9));
  const auto n_val = static_cast<Eigen::Index>(std::floor(r.val * n + 1e-9));
  return {{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, rows}};
}

// Per-channel z-score fitted on a row range (population std; zero std -> 1).
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;

  static Standardizer fit(const Eigen::MatrixXd& values, RowRange rows) {
    if (rows.size() < 1) throw DataError("standardizer: empty fit range");
    const auto block = values.middleRows(rows.begin, rows.size());
    Standardizer s;
    s.mean = block.colwise().mean();
    s.stddev = ((block.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(rows.size())).sqrt();
    for (Eigen::Index c = 0; c < s.stddev.size(); ++c) {
      if (s.stddev(c) == 0.0) s.stddev(c) = 1.0;
    }
    return s;
  }

  static Standardizer identity(Eigen::Index channels) {
    return {Eigen::RowVectorXd::Zero(channels), Eigen::RowVectorXd::Ones(channels)};
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const {
    return (values.rowwise() - mean).array().rowwise() / stddev.array();
  }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& values) const {
    return (values.array().rowwise() * stddev.array()).rowwise() + mean.array();
  }
};

// ---------------------------------------------------------------------------
// Windows

// Stride-1 sliding windows over a T x C series. Window w has lookback rows
// [first + w, first + w + L) and target rows [first + w + L, first + w + L + tau).
struct WindowSet {
  std::shared_ptr<const Eigen::MatrixXd> series;
  Eigen::Index first = 0;
  Eigen::Index count = 0;
  Eigen::Index lookback = 0;
  Eigen::Index horizon = 0;

  Eigen::Index channels() const { return series ? series->cols() : 0; }

  // Column b * C + c of x / y holds channel c of window idx[b].
  void gather(std::span<const Eigen::Index> idx, Eigen::MatrixXd& x, Eigen::MatrixXd& y) const {
    const Eigen::Index c = channels();
    x.resize(lookback, static_cast<Eigen::Index>(idx.size()) * c);
    y.resize(horizon, static_cast<Eigen::Index>(idx.size()) * c);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const Eigen::Index start = first + idx[b];
      const auto col = static_cast<Eigen::Index>(b) * c;
      x.middleCols(col, c) = series->middleRows(start, lookback);
      y.middleCols(col, c) = series->middleRows(start + lookback, horizon);
    }
  }
};

// Windows whose lookback and target both fall inside `range`:
// count = size - L - tau + 1.
inline WindowSet make_windows(std::shared_ptr<const Eigen::MatrixXd> series, RowRange range, Eigen::Index lookback,
                              Eigen::Index horizon) {
  if (lookback < 1 || horizon < 1) throw ConfigError("windows: L and tau must be >= 1");
  if (range.begin < 0 || range.end > series->rows() || range.size() < lookback + horizon) {
    throw DataError("windows: split of " + std::to_string(range.size()) + " rows is shorter than L + tau = " +
                    std::to_string(lookback + horizon));
  }
  return {std::move(series), range.begin, range.size() - lookback - horizon + 1, lookback, horizon};
}

// Windows whose targets start inside `range`, taking lookback context from
// the rows before it when available (the benchmark convention for val/test).
inline WindowSet make_windows_with_context(std::shared_ptr<const Eigen::MatrixXd> series, RowRange range,
                                           Eigen::Index lookback, Eigen::Index horizon) {
  const RowRange extended{std::max<Eigen::Index>(0, range.begin - lookback), range.end};
  return make_windows(std::move(series), extended, lookback, horizon);
}

}  // namespace fredn
