#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "soclab/histogram.hpp"

using soclab::LogHistogram;

TEST(LogEdges, IntegerGridCoversRange) {
  const auto e = soclab::log_edges(1, 1000, std::pow(10.0, 0.1));
  EXPECT_EQ(e.front(), 1.0);
  EXPECT_GT(e.back(), 1000.0);
  for (std::size_t i = 1; i < e.size(); ++i) {
    EXPECT_GT(e[i], e[i - 1]);
    EXPECT_EQ(e[i], std::floor(e[i]));
  }
  // ceil(10^0.1) = 2, ceil(10^0.2) = 2 collapses, ceil(10^0.3) = 2 ... then 10 at k = 10
  EXPECT_NE(std::find(e.begin(), e.end(), 10.0), e.end());
  EXPECT_NE(std::find(e.begin(), e.end(), 100.0), e.end());
}

TEST(LogEdges, SharedGridAcrossRanges) {
  const double base = std::pow(10.0, 0.1);
  const auto wide = soclab::log_edges(1, 100000, base);
  const auto narrow = soclab::log_edges(37, 900, base);
  for (const double x : narrow) EXPECT_NE(std::find(wide.begin(), wide.end(), x), wide.end());
  EXPECT_LE(narrow.front(), 37.0);
}

TEST(Histogram, SingleValue) {
  const std::vector<std::int64_t> s(10, 5);
  const auto h = soclab::build_histogram(s);
  std::int64_t occupied = 0;
  for (std::size_t i = 0; i < h.bins(); ++i) occupied += h.counts[i] > 0;
  EXPECT_EQ(occupied, 1);
  EXPECT_EQ(h.total, 10);
}

TEST(Histogram, DensityIntegratesToOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> s(1 + trial * 37);
    std::uniform_real_distribution<double> u(0, 6);
    for (auto& x : s) x = static_cast<std::int64_t>(std::pow(10.0, u(rng)));
    const auto h = soclab::build_histogram(s);
    double mass = 0;
    for (std::size_t i = 0; i < h.bins(); ++i) mass += h.density[i] * h.width(i);
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0}), h.total);
  }
}

TEST(Histogram, CountsMatchDirectBinning) {
  const std::vector<std::int64_t> s = {1, 1, 2, 3, 9, 10, 11, 99, 100, 101, 1000};
  const auto h = soclab::build_histogram(s);
  for (std::size_t i = 0; i < h.bins(); ++i) {
    std::int64_t direct = 0;
    for (const auto x : s) direct += x >= h.lo(i) && x < h.hi(i);
    EXPECT_EQ(direct, h.counts[i]) << "bin " << h.lo(i);
  }
}

TEST(Histogram, RejectsEmptyAndNonPositive) {
  try {
    soclab::build_histogram({});
    FAIL();
  } catch (const soclab::DataError& e) {
    EXPECT_STREQ(e.what(), "no avalanches");
  }
  const std::vector<std::int64_t> bad = {3, 0, 2};
  EXPECT_THROW(soclab::build_histogram(bad), soclab::DataError);
  const std::vector<std::int64_t> ok = {1, 2};
  EXPECT_THROW(soclab::build_histogram(ok, 1.0), std::invalid_argument);
}

TEST(Histogram, CsvRoundTrip) {
  const std::vector<std::int64_t> s = {1, 2, 2, 5, 17, 17, 300, 4000};
  const auto h = soclab::build_histogram(s);
  std::stringstream io;
  soclab::write_histogram_csv(io, h);
  EXPECT_EQ(io.str().substr(0, io.str().find('\n')), "bin_lo,bin_hi,count,density");
  const auto back = soclab::read_histogram_csv(io);
  EXPECT_EQ(back.edges, h.edges);
  EXPECT_EQ(back.counts, h.counts);
  for (std::size_t i = 0; i < h.bins(); ++i) EXPECT_DOUBLE_EQ(back.density[i], h.density[i]);
}

TEST(Histogram, CsvRejectsGarbage) {
  std::istringstream bad("hello\n1,2,3,4\n");
  EXPECT_THROW(soclab::read_histogram_csv(bad), soclab::DataError);
  std::istringstream gap("bin_lo,bin_hi,count,density\n1,2,3,0.5\n3,4,1,0.1\n");
  EXPECT_THROW(soclab::read_histogram_csv(gap), soclab::DataError);
}

TEST(LogCurve, OccupiedBinsOnly) {
  const std::vector<std::int64_t> s = {1, 1000};
  const auto c = soclab::log_density_curve(soclab::build_histogram(s));
  ASSERT_EQ(c.x.size(), 2u);
  EXPECT_NEAR(c.x[0], std::log10(std::sqrt(2.0)), 1e-12);
}
