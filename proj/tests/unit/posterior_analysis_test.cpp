#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <semloc/angles.hpp>
#include <semloc/errors.hpp>
#include <semloc/posterior_analysis.hpp>

namespace semloc {
namespace {

const GeoPoint kOrigin{49.01, 8.40};

RoadGraph two_far_streets() {
  return connect_segments({make_line_segment({0, 0}, {100, 0}, 50.0, RoadType::non_highway),
                           make_line_segment({2000, 0}, {2100, 0}, 50.0, RoadType::non_highway)},
                          kOrigin);
}

GaussianComponent at(double d, double weight = 1.0, double var = 1.0) {
  GaussianComponent c;
  c.weight = weight;
  c.mean << d, d - 10.0, 0.0, 0.0;
  c.cov = StateCovariance::Identity() * var;
  return c;
}

TEST(ModeAnalysis, MassOnOneStreetIsOneMode) {
  const RoadGraph g = two_far_streets();
  Posterior p;
  p.segments.push_back({segment_id(0), 1.0, {at(20.0, 0.25), at(40.0, 0.25), at(60.0, 0.5)}});
  const auto modes = mode_analysis(p, g);
  ASSERT_EQ(modes.size(), 1U);
  EXPECT_DOUBLE_EQ(modes[0].mass, 1.0);
  EXPECT_NEAR(modes[0].heading, 0.0, 1e-12);
}

TEST(ModeAnalysis, DistantStreetsAreSeparateModes) {
  const RoadGraph g = two_far_streets();
  Posterior p;
  p.segments.push_back({segment_id(0), 0.5, {at(50.0)}});
  p.segments.push_back({segment_id(1), 0.5, {at(50.0)}});
  const auto modes = mode_analysis(p, g);
  ASSERT_EQ(modes.size(), 2U);
  EXPECT_DOUBLE_EQ(modes[0].mass, 0.5);
  EXPECT_DOUBLE_EQ(modes[1].mass, 0.5);
}

TEST(ModeAnalysis, UnevenSplitIsSortedByMass) {
  const RoadGraph g = two_far_streets();
  Posterior p;
  p.segments.push_back({segment_id(0), 0.01, {at(50.0)}});
  p.segments.push_back({segment_id(1), 0.99, {at(30.0)}});
  const auto modes = mode_analysis(p, g);
  ASSERT_EQ(modes.size(), 2U);
  EXPECT_DOUBLE_EQ(modes[0].mass, 0.99);
  EXPECT_NEAR(modes[0].position.x(), 2030.0, 1e-9);
  EXPECT_DOUBLE_EQ(modes[1].mass, 0.01);
}

TEST(ClusterModes, CoreAveragesOnlyNearbyMembers) {
  std::vector<WeightedPoint> pts = {
      {{0, 0}, 0.0, 0.4}, {{10, 0}, 0.0, 0.2}, {{150, 0}, kPi / 2.0, 0.3}, {{400, 0}, 0.0, 0.1}};
  const auto modes = cluster_modes(pts, 200.0, 25.0);
  ASSERT_EQ(modes.size(), 2U);
  EXPECT_NEAR(modes[0].mass, 0.9, 1e-12);
  EXPECT_NEAR(modes[0].position.x(), 10.0 * 0.2 / 0.6, 1e-12);
  EXPECT_NEAR(modes[0].heading, 0.0, 1e-12);
  EXPECT_NEAR(modes[1].mass, 0.1, 1e-12);
}

TEST(ClusterModes, CircularHeadingMean) {
  std::vector<WeightedPoint> pts = {{{0, 0}, kPi - 0.1, 0.5}, {{1, 0}, -kPi + 0.1, 0.5}};
  const auto modes = cluster_modes(pts);
  ASSERT_EQ(modes.size(), 1U);
  EXPECT_NEAR(std::abs(modes[0].heading), kPi, 1e-9);
}

TEST(ClusterModes, MassIsConserved) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> xy(-1000.0, 1000.0), w(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WeightedPoint> pts(50);
    double total = 0.0;
    for (auto& p : pts) {
      p = {{xy(rng), xy(rng)}, 0.0, w(rng)};
      total += p.mass;
    }
    const auto modes = cluster_modes(pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
      sum += modes[i].mass;
      if (i > 0) EXPECT_GE(modes[i - 1].mass, modes[i].mass);
    }
    EXPECT_NEAR(sum, total, 1e-9);
  }
}

TEST(IsLocalized, TenDominantFrames) {
  std::vector<double> mass(10, 0.97);
  EXPECT_TRUE(is_localized(mass));
  mass.resize(9);
  EXPECT_FALSE(is_localized(mass));
  mass = std::vector<double>(9, 0.97);
  mass.push_back(0.5);
  EXPECT_FALSE(is_localized(mass));
  mass = {0.5};
  mass.insert(mass.end(), 10, 0.95);
  EXPECT_TRUE(is_localized(mass));
}

TEST(LocalizationFrame, FirstCompletedWindowLatches) {
  std::vector<double> mass(30, 0.5);
  for (std::size_t i = 15; i < 30; ++i) mass[i] = 0.99;
  mass[28] = 0.2;  // later dip does not matter
  EXPECT_EQ(localization_frame(mass), std::optional<std::size_t>(24));
}

TEST(LocalizationFrame, InterruptedRunRestarts) {
  std::vector<double> mass(40, 0.99);
  mass[5] = 0.9;
  EXPECT_EQ(localization_frame(mass), std::optional<std::size_t>(15));
  EXPECT_FALSE(localization_frame(std::vector<double>(9, 1.0)).has_value());
}

TEST(LocalizationFrame, CorrectnessFlags) {
  const std::vector<double> mass(20, 1.0);
  std::vector<bool> correct(20, true);
  correct[3] = false;
  EXPECT_EQ(localization_frame(mass, {}, correct), std::optional<std::size_t>(13));
  EXPECT_THROW(localization_frame(mass, {}, std::vector<bool>(5, true)), DomainError);
}

TEST(PosteriorBins, MassSumsToOneAndTailsFold) {
  const RoadGraph g = two_far_streets();
  Posterior p;
  p.t = 5.0;
  p.segments.push_back({segment_id(0), 0.7, {at(-3.0, 0.5, 25.0), at(98.0, 0.5, 9.0)}});
  p.segments.push_back({segment_id(1), 0.3, {at(50.0, 1.0, 4.0)}});
  const auto rows = posterior_bins(p, g, 3.0);
  double total = 0.0;
  for (const auto& r : rows) {
    total += r.mass;
    EXPECT_EQ(r.t, 5.0);
    EXPECT_GE(r.bin_start, 0.0);
    EXPECT_LT(r.bin_start, 100.0);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  // Bin 0 of the first street holds everything below 3 m of the first component.
  const double expected0 = 0.7 * 0.5 * 0.5 * std::erfc(-(3.0 - -3.0) / 5.0 / std::sqrt(2.0));
  ASSERT_EQ(index_of(rows.front().u), 0U);
  EXPECT_DOUBLE_EQ(rows.front().bin_start, 0.0);
  EXPECT_NEAR(rows.front().mass, expected0, 1e-12);
}

TEST(PosteriorBins, MinMassFilters) {
  const RoadGraph g = two_far_streets();
  Posterior p;
  p.segments.push_back({segment_id(0), 1.0, {at(50.0, 1.0, 1.0)}});
  const auto all = posterior_bins(p, g, 3.0);
  const auto some = posterior_bins(p, g, 3.0, 1e-3);
  EXPECT_LT(some.size(), all.size());
  for (const auto& r : some) EXPECT_GE(r.mass, 1e-3);
  EXPECT_THROW(posterior_bins(p, g, 0.0), DomainError);
}

TEST(Dump, CsvRoundTripAndFrames) {
  const std::vector<DumpRow> rows = {{0.0, segment_id(0), 0.0, 0.25},
                                     {0.0, segment_id(1), 3.0, 0.75},
                                     {1.0, segment_id(1), 6.0, 0.1 + 0.2},
                                     {1.0, segment_id(0), 99.0, 1e-17}};
  const std::string csv = dump_header() + dump_rows_to_csv(rows);
  const auto back = dump_from_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].t, rows[i].t);
    EXPECT_EQ(back[i].u, rows[i].u);
    EXPECT_EQ(back[i].bin_start, rows[i].bin_start);
    EXPECT_EQ(back[i].mass, rows[i].mass);
  }
  const auto frames = split_frames(back);
  ASSERT_EQ(frames.size(), 2U);
  EXPECT_EQ(frames[0].size(), 2U);
  EXPECT_EQ(frames[1].size(), 2U);
  EXPECT_THROW(dump_from_csv("t,segment_id,bin_start_m,mass\n0,-1,0,1\n"), FormatError);
  EXPECT_THROW(dump_from_csv("t,segment_id,bin_start_m,mass\n0,1.5,0,1\n"), FormatError);
}

TEST(Dump, BinPointsSitAtBinCentres) {
  const RoadGraph g = two_far_streets();
  const std::vector<DumpRow> frame = {{0.0, segment_id(0), 3.0, 0.5}, {0.0, segment_id(0), 99.0, 0.5}};
  const auto pts = bin_points(frame, g, 3.0);
  ASSERT_EQ(pts.size(), 2U);
  EXPECT_NEAR(pts[0].position.x(), 4.5, 1e-12);
  EXPECT_NEAR(pts[1].position.x(), 99.5, 1e-12);  // last bin is one meter long
}

}  // namespace
}  // namespace semloc
