#include "tsformer/market.hpp"
#include "tsformer/numcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace tsformer {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::chrono::year_month_day parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("bad date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto res = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (res.ec != std::errc{} || res.ptr != text.data() + pos + len) {
      throw DataError("bad date '" + std::string(text) + "'");
    }
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m},
                                         std::chrono::day{d}};
  if (!date.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

PriceSeries parse_prices(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(source_name, 1, "empty file");
  ++line_no;
  if (trim(line) != "date,close") fail(source_name, line_no, "expected header 'date,close'");

  std::vector<std::pair<std::chrono::year_month_day, double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      fail(source_name, line_no, "expected two fields");
    }
    std::chrono::year_month_day date;
    try {
      date = parse_date(trim(row.substr(0, comma)));
    } catch (const DataError& e) {
      fail(source_name, line_no, e.what());
    }
    const std::string_view close_text = trim(row.substr(comma + 1));
    double close = 0.0;
    const auto res = std::from_chars(close_text.data(), close_text.data() + close_text.size(), close);
    if (res.ec != std::errc{} || res.ptr != close_text.data() + close_text.size()) {
      fail(source_name, line_no, "cannot parse close '" + std::string(close_text) + "'");
    }
    if (!std::isfinite(close) || close <= 0.0) fail(source_name, line_no, "close must be positive");
    rows.emplace_back(date, close);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  PriceSeries out;
  out.dates.reserve(rows.size());
  out.closes.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first == rows[i - 1].first) {
      throw DataError(source_name + ": duplicate date " + format_date(rows[i].first));
    }
    out.dates.push_back(rows[i].first);
    out.closes.push_back(rows[i].second);
  }
  return out;
}

PriceSeries load_prices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open price file " + path.string());
  return parse_prices(in, path.string());
}

ReturnSeries log_returns(const PriceSeries& prices) {
  if (prices.size() < 2) throw DataError("log_returns: need at least two prices");
  ReturnSeries r;
  r.kind = ReturnKind::log_return;
  r.values.reserve(prices.size() - 1);
  r.dates.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) {
    r.values.push_back(std::log(prices.closes[i] / prices.closes[i - 1]));
    r.dates.push_back(prices.dates[i]);
  }
  return r;
}

ReturnSeries squared(const ReturnSeries& returns) {
  if (returns.kind != ReturnKind::log_return) throw std::invalid_argument("squared: expects log returns");
  ReturnSeries r = returns;
  r.kind = ReturnKind::squared_return;
  for (double& v : r.values) v *= v;
  return r;
}

std::size_t naive_classify(std::span<const double> window_squares, const BucketSpec& spec) {
  if (window_squares.empty()) throw std::invalid_argument("naive_classify: empty window");
  // sorted summation keeps the mean independent of window order
  std::vector<double> sorted(window_squares.begin(), window_squares.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
                      static_cast<double>(sorted.size());
  return bucket_of(mean, spec);
}

void write_derived_csv(std::ostream& out, const PriceSeries& prices) {
  const ReturnSeries r = log_returns(prices);
  out << "date,log_return,squared_return\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    out << format_date(r.dates[i]) << ',' << format_real(r.values[i]) << ','
        << format_real(r.values[i] * r.values[i]) << '\n';
  }
}

}  // namespace tsformer
