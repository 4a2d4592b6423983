#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dybm {

/// A timestamped N-dimensional real-valued sequence. Timestamps are opaque
/// labels that must be strictly increasing in lexicographic order (ISO dates
/// and fixed-width numeric labels both qualify).
struct SeriesFrame {
  std::vector<std::string> timestamps;
  std::vector<std::vector<double>> values;  // T rows of N columns

  std::size_t size() const { return values.size(); }
  std::size_t dim() const { return values.empty() ? 0 : values.front().size(); }

  /// Throws std::invalid_argument if lengths disagree, rows are ragged, a
  /// value is non-finite, or timestamps are not strictly increasing.
  void validate() const;
};

/// Per-dimension scaling statistics. The mean is recorded for reference but
/// applied only when standardize() is asked to center.
struct ScalingInfo {
  std::vector<double> stddev;
  std::vector<double> mean;
};

/// Reads a CSV with a header row whose first column holds date labels.
/// `value_columns` selects named value columns; empty selects every column
/// after the date column. Errors carry 1-based data row numbers. When
/// `resolved_names` is given it receives the selected column names in order.
SeriesFrame load_price_csv(const std::string& path,
                           const std::vector<std::string>& value_columns = {},
                           std::vector<std::string>* resolved_names = nullptr);

/// Simple (arithmetic) returns: r_t = (p_{t+1} - p_t) / p_t per dimension.
/// Output has length T-1 with timestamps shifted to the later date.
SeriesFrame to_returns(const SeriesFrame& prices);

/// Divides each dimension by its standard deviation. When `stats` is absent
/// the per-dimension population std of the input is used and returned, so a
/// training split's stats can be reused for the test split. Centering is off
/// by default.
std::pair<SeriesFrame, ScalingInfo> standardize(const SeriesFrame& series,
                                                const std::optional<ScalingInfo>& stats = {},
                                                bool center = false);

/// First `train_len` points and the remainder, order preserved.
std::pair<SeriesFrame, SeriesFrame> split(const SeriesFrame& series, std::size_t train_len);

/// Appends `tail` to `head` (used to reassemble a split pair).
SeriesFrame concat(const SeriesFrame& head, const SeriesFrame& tail);

/// Writes `date,<name...>` CSV with round-trip precision. Default column
/// names are v1..vN ("value" when one-dimensional).
void write_series_csv(const SeriesFrame& series, const std::string& path,
                      const std::vector<std::string>& names = {});

/// Flat JSON object of metric name -> number.
void write_report_json(const std::map<std::string, double>& report, const std::string& path);

/// Extracts one dimension as a flat vector.
std::vector<double> column(const SeriesFrame& series, std::size_t dim_index);

/// Wraps a flat vector as a one-dimensional SeriesFrame with fixed-width
/// numeric timestamps.
SeriesFrame series_from_values(const std::vector<double>& values);

}  // namespace dybm
