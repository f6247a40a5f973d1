#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include <semloc/angles.hpp>
#include <semloc/errors.hpp>
#include <semloc/evaluation.hpp>
#include <semloc/sim_harness.hpp>

namespace semloc {
namespace {

const GeoPoint kOrigin{49.01, 8.40};

bool near(const Point2& a, const Point2& b, double tol = 1e-6) { return (a - b).norm() < tol; }

bool has_segment(const RoadGraph& g, const Point2& p0, const Point2& p1, double length) {
  for (const auto& s : g.segments()) {
    if (near(s.p0, p0) && near(s.p1, p1) && std::abs(s.length - length) < 1e-6) return true;
  }
  return false;
}

TEST(SyntheticMap, GridHasFortyEightDirectedRuns) {
  SyntheticMapParams p;
  p.rows = 4;
  p.cols = 4;
  p.block = 100.0;
  const RoadGraph g = make_synthetic_map(MapKind::grid, p);
  // 4 lines of 3 blocks in each orientation, both directions.
  const int runs = 2 * 2 * 4 * 3;
  int starting_at_junction = 0;
  for (const auto& s : g.segments()) {
    const double fx = s.p0.x() / 100.0, fy = s.p0.y() / 100.0;
    if (std::abs(fx - std::round(fx)) < 1e-9 && std::abs(fy - std::round(fy)) < 1e-9) ++starting_at_junction;
  }
  EXPECT_EQ(starting_at_junction, runs);
  EXPECT_NEAR(g.total_length(), runs * 100.0, 1e-6);
  EXPECT_GT(g.size(), static_cast<std::size_t>(runs));  // interior runs are split at junctions
}

TEST(SyntheticMap, GridIsDeterministicPerSeed) {
  SyntheticMapParams p;
  p.jitter = 0.3;
  p.mixed_classes = true;
  p.seed = 9;
  const RoadGraph a = make_synthetic_map(MapKind::grid, p);
  const RoadGraph b = make_synthetic_map(MapKind::grid, p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.segments()[i].p0, b.segments()[i].p0);
    EXPECT_EQ(a.segments()[i].road_type, b.segments()[i].road_type);
  }
  p.seed = 10;
  const RoadGraph c = make_synthetic_map(MapKind::grid, p);
  EXPECT_NE(a.total_length(), c.total_length());
}

class LoopSymmetry : public ::testing::TestWithParam<bool> {};

TEST_P(LoopSymmetry, MirrorAndHalfTurnIsomorphic) {
  SyntheticMapParams p;
  p.loop_connector = GetParam();
  const RoadGraph g = make_synthetic_map(MapKind::symmetric_loop, p);
  for (const auto& s : g.segments()) {
    const Point2 a = s.p0, b = s.p1;
    EXPECT_TRUE(has_segment(g, {-a.x(), a.y()}, {-b.x(), b.y()}, s.length));
    EXPECT_TRUE(has_segment(g, {a.x(), -a.y()}, {b.x(), -b.y()}, s.length));
    EXPECT_TRUE(has_segment(g, -a, -b, s.length));
  }
  // Without the connector no node is an intersection.
  if (!GetParam()) {
    for (const auto& s : g.segments()) EXPECT_NE(s.intersection_class, IntersectionClass::visible);
  }
}

INSTANTIATE_TEST_SUITE_P(Connector, LoopSymmetry, ::testing::Bool());

TEST(SyntheticMap, LoopWithRoundedCornersStaysConnected) {
  SyntheticMapParams p;
  p.corner_radius = 30.0;
  const RoadGraph g = make_synthetic_map(MapKind::symmetric_loop, p);
  for (const auto& s : g.segments()) EXPECT_EQ(s.successors.size(), 1U);
  EXPECT_NEAR(g.total_length(), 2.0 * (2.0 * (400.0 - 60.0) + 2.0 * (200.0 - 60.0) + kTwoPi * 30.0), 1e-6);
}

TEST(SyntheticMap, RadialSpokesAreEvenlySpaced) {
  SyntheticMapParams p;
  const RoadGraph g = make_synthetic_map(MapKind::radial, p);
  std::vector<double> outbound;
  for (const auto& s : g.segments()) {
    if (near(s.p0, Point2::Zero())) outbound.push_back(s.beta);
  }
  ASSERT_EQ(outbound.size(), 8U);
  std::sort(outbound.begin(), outbound.end());
  for (std::size_t i = 1; i < outbound.size(); ++i) EXPECT_NEAR(outbound[i] - outbound[i - 1], kPi / 4.0, 1e-9);
}

TEST(SyntheticMap, DegenerateParams) {
  SyntheticMapParams p;
  p.rows = 1;
  EXPECT_THROW(make_synthetic_map(MapKind::grid, p), ConfigError);
  p = {};
  p.corner_radius = 150.0;
  EXPECT_THROW(make_synthetic_map(MapKind::symmetric_loop, p), ConfigError);
  p = {};
  p.spokes = 2;
  EXPECT_THROW(make_synthetic_map(MapKind::radial, p), ConfigError);
  EXPECT_THROW(map_kind_from_string("torus"), ConfigError);
  EXPECT_EQ(map_kind_from_string("symmetric_loop"), MapKind::symmetric_loop);
}

TEST(Reversed, ArcTwinRetracesTheArc) {
  const StreetSegment a = make_arc_segment({0, 0}, 0.3, 0.02, 50.0, 50.0, RoadType::non_highway);
  const StreetSegment r = reversed(a);
  EXPECT_NEAR((r.p0 - a.p1).norm(), 0.0, 1e-9);
  EXPECT_NEAR((r.point_at(r.length) - a.p0).norm(), 0.0, 1e-9);
  for (double d = 0.0; d <= 50.0; d += 5.0)
    EXPECT_NEAR((r.point_at(50.0 - d) - a.point_at(d)).norm(), 0.0, 1e-9);
}

RoadGraph straight(double length, double speed) {
  return RoadGraph({make_line_segment({0, 0}, {length, 0}, speed, RoadType::non_highway)}, kOrigin);
}

TEST(SimulateDrive, ConstantSpeedSpacing) {
  const RoadGraph g = straight(100.0, 36.0);
  SimConfig sim = SimConfig::noiseless();
  sim.speed_fraction = 1.0;
  const std::vector<SegmentId> route{segment_id(0)};
  const auto gt = simulate_drive(g, route, sim);
  ASSERT_EQ(gt.size(), 10U);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    EXPECT_NEAR(gt[k].pose.d, 10.0 * k, 1e-9);
    EXPECT_NEAR(gt[k].t - gt[0].t, static_cast<double>(k), 1e-9);
    EXPECT_NEAR(gt[k].velocity, 10.0, 1e-12);
    EXPECT_NEAR(gt[k].travelled, k == 0 ? 0.0 : 10.0, 1e-9);
  }
}

TEST(SimulateDrive, TravelledSumsToPathLength) {
  SyntheticMapParams p;
  p.jitter = 0.2;
  p.mixed_classes = true;
  p.seed = 4;
  const RoadGraph g = make_synthetic_map(MapKind::grid, p);
  std::mt19937_64 rng(4);
  const auto route = random_route(g, segment_id(0), 2000.0, rng);
  const auto gt = simulate_drive(g, route, SimConfig{}, 0.0);
  double sum = 0.0;
  for (const auto& f : gt) sum += f.travelled;
  // Distance along the route from the start to the last frame.
  double along = 0.0;
  std::size_t i = 0;
  for (; route[i] != gt.back().pose.u; ++i) along += g.segment(route[i]).length;
  along += gt.back().pose.d;
  EXPECT_NEAR(sum, along, 1e-6);
  for (std::size_t k = 1; k < gt.size(); ++k) {
    EXPECT_LE(gt[k].velocity, 1.15 * g.segment(gt[k].pose.u).speed_limit / 3.6 + 1e-9);
    EXPECT_LE(std::abs(gt[k].velocity - gt[k - 1].velocity), 3.0 + 1e-9);
  }
}

TEST(SimulateDrive, BrakesBeforeSlowSegments) {
  std::vector<StreetSegment> segs = {make_line_segment({0, 0}, {300, 0}, 100.0, RoadType::highway),
                                     make_line_segment({300, 0}, {600, 0}, 30.0, RoadType::non_highway)};
  const RoadGraph g = connect_segments(std::move(segs), kOrigin);
  const std::vector<SegmentId> route{segment_id(0), segment_id(1)};
  const auto gt = simulate_drive(g, route, SimConfig::noiseless());
  for (const auto& f : gt) {
    if (f.pose.u == segment_id(1)) EXPECT_LE(f.velocity, 1.15 * 30.0 / 3.6 + 1e-9);
  }
}

TEST(SimulateDrive, RejectsBadRoutes) {
  const RoadGraph g = make_synthetic_map(MapKind::radial, {});
  EXPECT_THROW(simulate_drive(g, std::vector<SegmentId>{}, SimConfig{}), DomainError);
  EXPECT_THROW(simulate_drive(g, std::vector<SegmentId>{segment_id(0)}, SimConfig{}, 1e6), DomainError);
  // Two outbound spokes never follow each other.
  std::vector<SegmentId> bad;
  for (const auto& s : g.segments()) {
    if (near(s.p0, Point2::Zero())) bad.push_back(s.id);
    if (bad.size() == 2) break;
  }
  EXPECT_THROW(simulate_drive(g, bad, SimConfig{}), TopologyError);
}

TEST(EmitObservations, IntersectionLabelRate) {
  const RoadGraph g = straight(100000.0, 36.0);
  SimConfig sim;
  sim.speed_fraction = 1.0;
  const auto gt = simulate_drive(g, std::vector<SegmentId>{segment_id(0)}, sim);
  ASSERT_EQ(gt.size(), 10000U);
  const auto obs = emit_observations(gt, g, sim);
  const bool visible = g.segment(segment_id(0)).intersection_class == IntersectionClass::visible;
  int right = 0, rtype_right = 0;
  for (const auto& y : obs) {
    right += (*y.intersection == IntersectionObs::visible) == visible;
    rtype_right += *y.road_type == RoadType::non_highway;
  }
  EXPECT_NEAR(right / 10000.0, 0.8, 0.01);
  EXPECT_NEAR(rtype_right / 10000.0, 0.9, 0.01);
}

TEST(EmitObservations, NoiselessCuesMatchTruth) {
  const RoadGraph g = straight(2000.0, 50.0);
  const SimConfig sim = SimConfig::noiseless();
  const auto gt = simulate_drive(g, std::vector<SegmentId>{segment_id(0)}, sim);
  const auto obs = emit_observations(gt, g, sim);
  ASSERT_EQ(obs.size(), gt.size());
  EXPECT_FALSE(obs[0].odometry.has_value());
  const SunPosition sun = sun_position(gt[0].t, kOrigin.lat, kOrigin.lon);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    ASSERT_TRUE(obs[k].phi.has_value());
    EXPECT_NEAR(wrap_angle(*obs[k].phi - *predicted_relative_sun(gt[k].pose, g, sun_position(gt[k].t, kOrigin.lat,
                                                                                             kOrigin.lon))),
                0.0, 1e-12);
    EXPECT_NEAR(*obs[k].velocity, gt[k].velocity * 3.6, 1e-12);
    if (k > 0) {
      EXPECT_NEAR(obs[k].odometry->forward, gt[k].travelled, 1e-12);
      EXPECT_NEAR(obs[k].odometry->heading_change, 0.0, 1e-12);
    }
  }
  EXPECT_TRUE(sun.daytime());
}

TEST(EmitObservations, SunAvailability) {
  const RoadGraph g = straight(2000.0, 50.0);
  SimConfig sim;
  sim.sun = SunAvailability::never;
  const auto gt = simulate_drive(g, std::vector<SegmentId>{segment_id(0)}, sim);
  for (const auto& y : emit_observations(gt, g, sim)) EXPECT_FALSE(y.phi.has_value());

  sim.sun = SunAvailability::schedule;
  sim.sun_on = 3.0;
  sim.sun_off = 2.0;
  const auto obs = emit_observations(gt, g, sim);
  for (std::size_t k = 0; k < obs.size(); ++k) EXPECT_EQ(obs[k].phi.has_value(), k % 5 < 3) << k;

  sim.sun = SunAvailability::always;
  sim.start_utc = parse_iso8601("2011-09-26T22:00:00Z");
  const auto night_gt = simulate_drive(g, std::vector<SegmentId>{segment_id(0)}, sim);
  for (const auto& y : emit_observations(night_gt, g, sim)) EXPECT_FALSE(y.phi.has_value());
}

TEST(EmitObservations, DeterministicPerSeed) {
  Scenario sc;
  sc.route_length = 1000.0;
  const ScenarioData a = realize(sc);
  const ScenarioData b = realize(sc);
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t k = 0; k < a.observations.size(); ++k) {
    EXPECT_EQ(a.observations[k].phi, b.observations[k].phi);
    EXPECT_EQ(a.observations[k].intersection, b.observations[k].intersection);
    EXPECT_EQ(a.observations[k].road_type, b.observations[k].road_type);
    if (k > 0) EXPECT_EQ(a.observations[k].odometry->forward, b.observations[k].odometry->forward);
  }
  sc.sim.seed = 2;
  const ScenarioData c = realize(sc);
  EXPECT_NE(a.observations[1].phi, c.observations[1].phi);
}

TEST(EmitObservations, TruthExplainsObservationsBetterThanADistantPose) {
  Scenario sc;
  sc.map.rows = sc.map.cols = 5;
  sc.map.block = 120.0;
  sc.map.mixed_classes = true;
  sc.map.seed = 3;
  sc.sim.seed = 3;
  const ScenarioData data = realize(sc);
  const NoiseModel nm = NoiseModel::defaults();
  double truth = 0.0, distant = 0.0;
  int compared = 0;
  for (std::size_t k = 0; k < data.gt.size(); ++k) {
    // First frame at least 300 m away from the true position.
    std::size_t j = k;
    while (j < data.gt.size() && (data.gt[j].position - data.gt[k].position).norm() < 300.0) ++j;
    if (j == data.gt.size()) break;
    ObservationFrame y = data.observations[k];
    y.odometry.reset();
    const auto sun = sun_position(y.t, kOrigin.lat, kOrigin.lon);
    auto state = [](const GroundTruthFrame& f) {
      return VehicleState{f.pose.u, StateVector(f.pose.d, f.pose.d, f.pose.theta, f.pose.theta)};
    };
    truth += std::log(frame_likelihood(y, state(data.gt[k]), data.graph, sun, nm));
    distant += std::log(frame_likelihood(y, state(data.gt[j]), data.graph, sun, nm));
    ++compared;
  }
  ASSERT_GT(compared, 50);
  EXPECT_GT(truth, distant);
}

TEST(GroundTruthCsv, RoundTrip) {
  Scenario sc;
  sc.route_length = 600.0;
  const ScenarioData data = realize(sc);
  const auto back = ground_truth_from_csv(ground_truth_to_csv(data.gt));
  ASSERT_EQ(back.size(), data.gt.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].t, data.gt[k].t);
    EXPECT_EQ(back[k].pose.u, data.gt[k].pose.u);
    EXPECT_EQ(back[k].pose.d, data.gt[k].pose.d);
    EXPECT_EQ(back[k].heading, data.gt[k].heading);
    EXPECT_EQ(back[k].position, data.gt[k].position);
  }
}

TEST(RouteText, LinesAndCommas) {
  const auto a = route_from_text("3\n4\n\n5\n");
  const auto b = route_from_text("3,4,5");
  ASSERT_EQ(a.size(), 3U);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[2], segment_id(5));
  EXPECT_THROW(route_from_text("3,x"), FormatError);
}

}  // namespace
}  // namespace semloc
