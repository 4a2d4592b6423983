#include "dybm/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dybm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Tolerate CRLF files and stray spaces around cells.
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ' || cell.back() == '\t')) {
      cell.pop_back();
    }
    std::size_t start = 0;
    while (start < cell.size() && (cell[start] == ' ' || cell[start] == '\t')) ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double out = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) {
    throw std::runtime_error("load_price_csv: unparseable value '" + cell + "' in column '" +
                             column + "' at row " + std::to_string(row));
  }
  return out;
}

}  // namespace

void SeriesFrame::validate() const {
  if (timestamps.size() != values.size()) {
    throw std::invalid_argument("SeriesFrame: timestamp/value length mismatch");
  }
  if (values.empty()) throw std::invalid_argument("SeriesFrame: empty series");
  const std::size_t n = values.front().size();
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t].size() != n) {
      throw std::invalid_argument("SeriesFrame: ragged row at index " + std::to_string(t));
    }
    for (double v : values[t]) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("SeriesFrame: non-finite value at index " + std::to_string(t));
      }
    }
    if (t > 0 && !(timestamps[t - 1] < timestamps[t])) {
      throw std::invalid_argument("SeriesFrame: non-increasing timestamp at index " +
                                  std::to_string(t));
    }
  }
}

SeriesFrame load_price_csv(const std::string& path,
                           const std::vector<std::string>& value_columns,
                           std::vector<std::string>* resolved_names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_price_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_price_csv: '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2) {
    throw std::runtime_error("load_price_csv: header must have a date column and at least one value column");
  }

  std::vector<std::size_t> pick;
  if (value_columns.empty()) {
    for (std::size_t j = 1; j < header.size(); ++j) pick.push_back(j);
  } else {
    for (const std::string& name : value_columns) {
      const auto it = std::find(header.begin() + 1, header.end(), name);
      if (it == header.end()) {
        throw std::runtime_error("load_price_csv: missing column '" + name + "' in '" + path + "'");
      }
      pick.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (resolved_names != nullptr) {
    resolved_names->clear();
    for (std::size_t j : pick) resolved_names->push_back(header[j]);
  }

  SeriesFrame out;
  std::size_t row = 0;  // 1-based data row number
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("load_price_csv: expected " + std::to_string(header.size()) +
                               " cells but found " + std::to_string(cells.size()) + " at row " +
                               std::to_string(row));
    }
    if (!out.timestamps.empty() && !(out.timestamps.back() < cells[0])) {
      throw std::runtime_error("load_price_csv: non-increasing date '" + cells[0] + "' at row " +
                               std::to_string(row));
    }
    std::vector<double> vals;
    vals.reserve(pick.size());
    for (std::size_t j : pick) vals.push_back(parse_cell(cells[j], row, header[j]));
    out.timestamps.push_back(cells[0]);
    out.values.push_back(std::move(vals));
  }
  if (out.values.empty()) {
    throw std::runtime_error("load_price_csv: '" + path + "' has no data rows");
  }
  return out;
}

SeriesFrame to_returns(const SeriesFrame& prices) {
  prices.validate();
  if (prices.size() < 2) {
    throw std::invalid_argument("to_returns: need at least two points");
  }
  const std::size_t n = prices.dim();
  SeriesFrame out;
  out.timestamps.assign(prices.timestamps.begin() + 1, prices.timestamps.end());
  out.values.reserve(prices.size() - 1);
  for (std::size_t t = 0; t + 1 < prices.size(); ++t) {
    std::vector<double> r(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double p = prices.values[t][j];
      if (p == 0.0) {
        throw std::runtime_error("to_returns: zero price at index " + std::to_string(t) +
                                 " (dimension " + std::to_string(j) + ")");
      }
      r[j] = (prices.values[t + 1][j] - p) / p;
    }
    out.values.push_back(std::move(r));
  }
  return out;
}

std::pair<SeriesFrame, ScalingInfo> standardize(const SeriesFrame& series,
                                                const std::optional<ScalingInfo>& stats,
                                                bool center) {
  series.validate();
  const std::size_t n = series.dim();
  const std::size_t t_len = series.size();

  ScalingInfo used;
  if (stats) {
    if (stats->stddev.size() != n) {
      throw std::invalid_argument("standardize: stats dimension mismatch");
    }
    used = *stats;
    if (used.mean.empty()) used.mean.assign(n, 0.0);
    for (double s : used.stddev) {
      if (!(s > 0.0)) throw std::invalid_argument("standardize: nonpositive stddev in stats");
    }
  } else {
    if (t_len < 2) throw std::invalid_argument("standardize: need at least two points");
    used.mean.assign(n, 0.0);
    used.stddev.assign(n, 0.0);
    for (const auto& row : series.values) {
      for (std::size_t j = 0; j < n; ++j) used.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) used.mean[j] /= static_cast<double>(t_len);
    for (const auto& row : series.values) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = row[j] - used.mean[j];
        used.stddev[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      used.stddev[j] = std::sqrt(used.stddev[j] / static_cast<double>(t_len));
      if (!(used.stddev[j] > 0.0)) {
        throw std::runtime_error("standardize: zero standard deviation in dimension " +
                                 std::to_string(j));
      }
    }
  }

  SeriesFrame out;
  out.timestamps = series.timestamps;
  out.values = series.values;
  for (auto& row : out.values) {
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = (row[j] - (center ? used.mean[j] : 0.0)) / used.stddev[j];
    }
  }
  return {std::move(out), std::move(used)};
}

std::pair<SeriesFrame, SeriesFrame> split(const SeriesFrame& series, std::size_t train_len) {
  series.validate();
  if (train_len == 0 || train_len >= series.size()) {
    throw std::invalid_argument("split: train_len must satisfy 0 < train_len < length");
  }
  SeriesFrame head;
  SeriesFrame tail;
  head.timestamps.assign(series.timestamps.begin(), series.timestamps.begin() + train_len);
  head.values.assign(series.values.begin(), series.values.begin() + train_len);
  tail.timestamps.assign(series.timestamps.begin() + train_len, series.timestamps.end());
  tail.values.assign(series.values.begin() + train_len, series.values.end());
  return {std::move(head), std::move(tail)};
}

SeriesFrame concat(const SeriesFrame& head, const SeriesFrame& tail) {
  SeriesFrame out = head;
  out.timestamps.insert(out.timestamps.end(), tail.timestamps.begin(), tail.timestamps.end());
  out.values.insert(out.values.end(), tail.values.begin(), tail.values.end());
  return out;
}

void write_series_csv(const SeriesFrame& series, const std::string& path,
                      const std::vector<std::string>& names) {
  series.validate();
  const std::size_t n = series.dim();
  std::vector<std::string> cols = names;
  if (cols.empty()) {
    if (n == 1) {
      cols = {"value"};
    } else {
      for (std::size_t j = 0; j < n; ++j) cols.push_back("v" + std::to_string(j + 1));
    }
  }
  if (cols.size() != n) throw std::invalid_argument("write_series_csv: name count mismatch");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_series_csv: cannot open '" + path + "' for writing");
  out << "date";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < series.size(); ++t) {
    out << series.timestamps[t];
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", series.values[t][j]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_series_csv: write failed for '" + path + "'");
}

void write_report_json(const std::map<std::string, double>& report, const std::string& path) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, value] : report) doc[key] = value;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_json: cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_report_json: write failed for '" + path + "'");
}

std::vector<double> column(const SeriesFrame& series, std::size_t dim_index) {
  if (dim_index >= series.dim()) throw std::invalid_argument("column: dimension out of range");
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& row : series.values) out.push_back(row[dim_index]);
  return out;
}

SeriesFrame series_from_values(const std::vector<double>& values) {
  SeriesFrame out;
  out.values.reserve(values.size());
  out.timestamps.reserve(values.size());
  char buf[16];
  for (std::size_t t = 0; t < values.size(); ++t) {
    std::snprintf(buf, sizeof buf, "t%08zu", t);
    out.timestamps.emplace_back(buf);
    out.values.push_back({values[t]});
  }
  return out;
}

}  // namespace dybm
