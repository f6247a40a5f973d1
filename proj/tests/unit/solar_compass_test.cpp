#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <semloc/angles.hpp>
#include <semloc/errors.hpp>
#include <semloc/road_map.hpp>
#include <semloc/solar_compass.hpp>

#include "solar_oracle.hpp"

namespace semloc {
namespace {

double angle_diff_deg(double a, double b) { return std::abs(rad2deg(wrap_angle(deg2rad(a - b)))); }

TEST(SunPosition, MatchesOracleTable) {
  for (const auto& c : testing::kSolarOracle) {
    const SunPosition sun = sun_position(parse_iso8601(c.utc), c.lat, c.lon);
    EXPECT_LE(angle_diff_deg(rad2deg(sun.azimuth), c.azimuth_deg), 0.5) << c.utc << " " << c.lon;
    EXPECT_LE(std::abs(rad2deg(sun.elevation) - c.elevation_deg), 0.5) << c.utc << " " << c.lon;
    EXPECT_GE(sun.azimuth, 0.0);
    EXPECT_LT(sun.azimuth, kTwoPi);
  }
}

TEST(SunPosition, EquinoxNoonAtEquatorIsOverhead) {
  const UtcSeconds day = parse_iso8601("2011-09-23T00:00:00Z");
  double best = -1.0;
  for (int minute = 0; minute < 24 * 60; ++minute)
    best = std::max(best, sun_position(day + 60.0 * minute, 0.0, 0.0).elevation);
  EXPECT_NEAR(rad2deg(best), 90.0, 1.0);
}

TEST(SunPosition, FifteenDegreesEastIsOneHourLater) {
  const UtcSeconds t = parse_iso8601("2011-09-26T09:00:00Z");
  const SunPosition shifted = sun_position(t, 49.01, 8.40 + 15.0);
  const SunPosition later = sun_position(t + 3600.0, 49.01, 8.40);
  EXPECT_NEAR(rad2deg(shifted.azimuth), rad2deg(later.azimuth), 0.1);
  EXPECT_NEAR(rad2deg(shifted.elevation), rad2deg(later.elevation), 0.1);
}

TEST(SunPosition, DatelineLongitudesAgree) {
  const UtcSeconds t = parse_iso8601("2015-05-01T03:00:00Z");
  const SunPosition east = sun_position(t, -20.0, 180.0);
  const SunPosition west = sun_position(t, -20.0, -180.0);
  EXPECT_NEAR(wrap_angle(east.azimuth - west.azimuth), 0.0, 1e-9);
  EXPECT_NEAR(east.elevation, west.elevation, 1e-9);
}

TEST(SunPosition, NoonElevationIsTheDailyMaximum) {
  for (const char* date : {"2011-03-10T00:00:00Z", "2011-06-21T00:00:00Z", "2011-09-26T00:00:00Z",
                           "2011-12-01T00:00:00Z"}) {
    const UtcSeconds day = parse_iso8601(date);
    double best = -10.0, best_t = 0.0;
    for (int minute = 0; minute < 24 * 60; ++minute) {
      const double e = sun_position(day + 60.0 * minute, 49.01, 8.40).elevation;
      if (e > best) best = e, best_t = 60.0 * minute;
    }
    // Solar noon at 8.4 E is near 11:26 UTC give or take the equation of time.
    EXPECT_NEAR(best_t / 3600.0, 12.0 - 8.40 / 15.0, 0.3) << date;
    const SunPosition at_noon = sun_position(day + best_t, 49.01, 8.40);
    EXPECT_NEAR(rad2deg(at_noon.azimuth), 180.0, 2.0) << date;
  }
}

TEST(SunPosition, DomainErrors) {
  const UtcSeconds t = parse_iso8601("2011-09-26T10:00:00Z");
  EXPECT_THROW(sun_position(t, 91.0, 0.0), DomainError);
  EXPECT_THROW(sun_position(t, 0.0, -181.0), DomainError);
  EXPECT_THROW(sun_position(parse_iso8601("2051-01-01T00:00:00Z"), 0.0, 0.0), DomainError);
  EXPECT_THROW(sun_position(parse_iso8601("1949-12-31T23:00:00Z"), 0.0, 0.0), DomainError);
}

TEST(ParseIso8601, Variants) {
  EXPECT_DOUBLE_EQ(parse_iso8601("1970-01-01T00:00Z"), 0.0);
  EXPECT_DOUBLE_EQ(parse_iso8601("2011-09-26T10:00:00Z"), 1317031200.0);
  EXPECT_DOUBLE_EQ(parse_iso8601("2011-09-26T12:00:00+02:00"), 1317031200.0);
  EXPECT_DOUBLE_EQ(parse_iso8601("2011-09-26T10:00:00.5"), 1317031200.5);
  EXPECT_THROW(parse_iso8601("2011-13-01T00:00Z"), FormatError);
  EXPECT_THROW(parse_iso8601("yesterday"), FormatError);
  EXPECT_THROW(parse_iso8601("2011-09-26T10:00:00Q"), FormatError);
}

TEST(WrapAngle, HalfOpenRange) {
  EXPECT_EQ(wrap_angle(kPi), kPi);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3.0 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.5), -0.5, 1e-15);
  EXPECT_NEAR(wrap_angle(kTwoPi + 0.25), 0.25, 1e-12);
}

TEST(MapAzimuth, CompassToMapFrame) {
  SunPosition sun;
  sun.azimuth = 0.0;  // north
  EXPECT_NEAR(sun.map_azimuth(), kPi / 2.0, 1e-12);
  sun.azimuth = kPi / 2.0;  // east
  EXPECT_NEAR(sun.map_azimuth(), 0.0, 1e-12);
  sun.azimuth = kPi;  // south
  EXPECT_NEAR(sun.map_azimuth(), -kPi / 2.0, 1e-12);
}

class RelativeSun : public ::testing::Test {
 protected:
  RoadGraph line_at(double heading) {
    StreetSegment s = make_line_segment({0, 0}, {100.0 * std::cos(heading), 100.0 * std::sin(heading)}, 50.0,
                                        RoadType::non_highway);
    return RoadGraph({s}, {49.01, 8.40});
  }
  SunPosition sun_ = [] {
    SunPosition s;
    s.azimuth = deg2rad(155.0);
    s.elevation = deg2rad(37.0);
    return s;
  }();
};

TEST_F(RelativeSun, HeadingAtSunIsZero) {
  const RoadGraph g = line_at(sun_.map_azimuth());
  EXPECT_NEAR(*predicted_relative_sun({segment_id(0), 10.0, 0.0}, g, sun_), 0.0, 1e-9);
}

TEST_F(RelativeSun, HeadingAwayFromSunIsPi) {
  const RoadGraph g = line_at(0.0);
  const double theta = wrap_angle(sun_.map_azimuth() + kPi);
  const double phi = *predicted_relative_sun({segment_id(0), 10.0, theta}, g, sun_);
  EXPECT_NEAR(std::abs(phi), kPi, 1e-9);
}

TEST_F(RelativeSun, SunToTheLeftIsPositive) {
  // Driving east with the sun in the north.
  SunPosition north = sun_;
  north.azimuth = 0.0;
  EXPECT_NEAR(*predicted_relative_sun({segment_id(0), 0.0, 0.0}, line_at(0.0), north), kPi / 2.0, 1e-9);
}

TEST_F(RelativeSun, RotationEquivariance) {
  const RoadGraph g = line_at(0.3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const double theta = angle(rng);
    const double delta = angle(rng);
    const double a = *predicted_relative_sun({segment_id(0), 5.0, theta}, g, sun_);
    const double b = *predicted_relative_sun({segment_id(0), 5.0, theta + delta}, g, sun_);
    EXPECT_NEAR(wrap_angle(a - b - delta), 0.0, 1e-9);
  }
}

TEST_F(RelativeSun, NightIsUnavailable) {
  SunPosition night = sun_;
  night.elevation = -0.1;
  EXPECT_FALSE(predicted_relative_sun({segment_id(0), 0.0, 0.0}, line_at(0.0), night).has_value());
  EXPECT_FALSE(night.daytime());
}

}  // namespace
}  // namespace semloc
