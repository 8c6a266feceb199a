#pragma once

#include "tsformer/buckets.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsformer {

/// Daily closes in strictly increasing date order.
struct PriceSeries {
  std::vector<std::chrono::year_month_day> dates;
  std::vector<double> closes;

  std::size_t size() const { return closes.size(); }
};

enum class ReturnKind { log_return, squared_return };

struct ReturnSeries {
  std::vector<double> values;
  ReturnKind kind = ReturnKind::log_return;
  /// Date of the close that ends each return.
  std::vector<std::chrono::year_month_day> dates;
};

/// Parse "date,close" CSV (ISO-8601 dates, rows in any order). Rows are
/// sorted by date; duplicate dates, malformed rows and non-positive closes
/// are rejected with the offending line number.
PriceSeries parse_prices(std::istream& in, const std::string& source_name = "<stream>");
PriceSeries load_prices(const std::filesystem::path& path);

/// y_i = ln(p_i / p_{i-1}).
ReturnSeries log_returns(const PriceSeries& prices);
ReturnSeries squared(const ReturnSeries& returns);

/// Bucket of the mean of the trailing squared returns.
std::size_t naive_classify(std::span<const double> window_squares, const BucketSpec& spec);

/// "date,log_return,squared_return", one row per return.
void write_derived_csv(std::ostream& out, const PriceSeries& prices);

std::string format_date(const std::chrono::year_month_day& date);
std::chrono::year_month_day parse_date(std::string_view text);

}  // namespace tsformer
