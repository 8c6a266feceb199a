#include "tsformer/market.hpp"
#include "tsformer/numcore.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tsformer;

namespace {

PriceSeries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_prices(in, "prices.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParsePrices, TwoRows) {
  const PriceSeries p = parse("date,close\n2024-01-02,100\n2024-01-03,101\n");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(format_date(p.dates[0]), "2024-01-02");
  EXPECT_DOUBLE_EQ(p.closes[1], 101.0);
}

TEST(ParsePrices, UnsortedRowsAreSorted) {
  const PriceSeries a = parse("date,close\n2024-01-02,100\n2024-01-03,101\n2024-01-05,99.5\n");
  const PriceSeries b = parse("date,close\n2024-01-05,99.5\n2024-01-02,100\n2024-01-03,101\n");
  EXPECT_EQ(a.dates, b.dates);
  EXPECT_EQ(a.closes, b.closes);
}

TEST(ParsePrices, ErrorsNameTheLine) {
  EXPECT_NE(error_of("date,close\n2024-01-02,100\n2024-01-03,0\n").find("prices.csv:3"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02,-4\n").find(":2"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02,100\n2024-13-03,1\n").find(":3"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02,abc\n").find(":2"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02\n").find(":2"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02,1,2\n").find(":2"), std::string::npos);
  EXPECT_NE(error_of("when,price\n").find(":1"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2024-01-02,100\n2024-01-02,101\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("date,close\n2023-02-29,100\n"), "");
}

TEST(ParsePrices, ToleratesCrLfAndBlankLines) {
  const PriceSeries p = parse("date,close\r\n2024-01-02, 100\r\n\r\n2024-01-03,101\r\n");
  ASSERT_EQ(p.size(), 2u);
}

TEST(LoadPrices, MissingFileNamed) {
  const std::filesystem::path missing = std::filesystem::temp_directory_path() / "no_such_prices.csv";
  try {
    load_prices(missing);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(missing.string()), std::string::npos);
  }
}

TEST(LogReturns, Examples) {
  PriceSeries p = parse("date,close\n2024-01-01,100\n2024-01-02,101\n2024-01-03,100\n");
  ReturnSeries r = log_returns(p);
  ASSERT_EQ(r.values.size(), 2u);
  EXPECT_DOUBLE_EQ(r.values[0], std::log(1.01));
  EXPECT_NEAR(r.values[1], -std::log(1.01), 1e-15);
  EXPECT_EQ(format_date(r.dates[0]), "2024-01-02");

  p = parse("date,close\n2024-01-01,7\n2024-01-02,14\n2024-01-03,14\n");
  r = log_returns(p);
  EXPECT_NEAR(r.values[0], 0.6931, 1e-4);
  EXPECT_EQ(r.values[1], 0.0);

  p = parse("date,close\n2024-01-01,7\n");
  EXPECT_THROW(log_returns(p), DataError);
}

TEST(LogReturns, ScaleInvarianceAndTelescoping) {
  Rng rng(11);
  PriceSeries p;
  std::chrono::sys_days day = std::chrono::year{2000} / 1 / 1;
  double price = 50.0;
  for (int i = 0; i < 2000; ++i) {
    p.dates.emplace_back(day);
    p.closes.push_back(price);
    day += std::chrono::days{1};
    price *= std::exp(0.02 * rng.normal());
  }
  PriceSeries scaled = p;
  for (double& c : scaled.closes) c *= 37.5;
  const ReturnSeries a = log_returns(p);
  const ReturnSeries b = log_returns(scaled);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
    sum += a.values[i];
  }
  EXPECT_NEAR(sum, std::log(p.closes.back()) - std::log(p.closes.front()), 1e-10);

  const ReturnSeries sq = squared(a);
  EXPECT_EQ(sq.kind, ReturnKind::squared_return);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_GE(sq.values[i], 0.0);
    EXPECT_DOUBLE_EQ(sq.values[i], a.values[i] * a.values[i]);
  }
  EXPECT_THROW(squared(sq), std::invalid_argument);
}

TEST(NaiveClassify, Examples) {
  const BucketSpec spec({0.1, 0.2, 0.3, 0.4});
  const std::vector<double> constant(8, 0.35);
  EXPECT_EQ(naive_classify(constant, spec), 3u);
  const std::vector<double> on_boundary{0.1, 0.3};
  EXPECT_EQ(naive_classify(on_boundary, spec), 1u);
  EXPECT_THROW(naive_classify(std::vector<double>{}, spec), std::invalid_argument);
}

TEST(NaiveClassify, PermutationInvariant) {
  Rng rng(5);
  std::vector<double> boundaries;
  for (int j = 1; j < 7; ++j) boundaries.push_back(0.05 * j);
  const BucketSpec spec(boundaries);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(32);
    for (double& x : w) x = 0.01 * std::abs(rng.normal()) * (1 + trial % 30);
    const std::size_t expected = naive_classify(w, spec);
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      for (std::size_t i = w.size() - 1; i > 0; --i) std::swap(w[i], w[rng.below(i + 1)]);
      EXPECT_EQ(naive_classify(w, spec), expected);
    }
  }
}

TEST(DerivedCsv, Layout) {
  const PriceSeries p = parse("date,close\n2024-01-01,100\n2024-01-02,110\n2024-01-03,99\n");
  std::ostringstream os;
  write_derived_csv(os, p);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "date,log_return,squared_return");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 11), "2024-01-02,");
  const auto c1 = line.find(',');
  const auto c2 = line.find(',', c1 + 1);
  const double y = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
  EXPECT_DOUBLE_EQ(y, std::log(1.1));
  EXPECT_DOUBLE_EQ(std::stod(line.substr(c2 + 1)), y * y);
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Dates, RoundTrip) {
  EXPECT_EQ(format_date(parse_date("1927-12-30")), "1927-12-30");
  EXPECT_THROW(parse_date("1927/12/30"), DataError);
  EXPECT_THROW(parse_date("1927-2-3"), DataError);
}
