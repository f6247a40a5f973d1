#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "semloc/observation_model.hpp"
#include "semloc/road_map.hpp"
#include "semloc/solar_compass.hpp"

namespace semloc {

enum class MapKind : std::uint8_t { grid, symmetric_loop, radial };

std::string_view to_string(MapKind kind) noexcept;
MapKind map_kind_from_string(std::string_view text);

struct SyntheticMapParams {
  // grid: rows x cols junctions
  int rows = 4;
  int cols = 4;
  double block = 100.0;        // meters
  double jitter = 0.0;         // block lengths vary by +-jitter * block
  bool mixed_classes = false;  // random residential / secondary / trunk lines
  // symmetric_loop: a width x height rectangle, optionally split by a connector across the middle
  double loop_width = 400.0;
  double loop_height = 200.0;
  bool loop_connector = false;
  double corner_radius = 0.0;  // quarter arcs at the corners when > 0
  // radial
  int spokes = 8;
  double spoke_length = 300.0;

  double speed_limit = 50.0;  // km/h, for lines without a random class
  std::uint64_t seed = 0;
  GeoPoint origin{49.01, 8.40};
  PartitionOptions partition{};
};

/// Connected, intersection-partitioned synthetic map. Throws ConfigError on degenerate params.
RoadGraph make_synthetic_map(MapKind kind, const SyntheticMapParams& params);

/// Opposite-direction twin of a segment (connectivity left empty).
StreetSegment reversed(const StreetSegment& segment);

enum class SunAvailability : std::uint8_t { always, never, schedule };

struct SimConfig {
  std::uint64_t seed = 1;
  double frame_rate = 1.0;  // Hz
  Eigen::Matrix2d odometry_cov = default_odometry_cov();
  double sun_variance = 0.06853891945200942;  // (15 deg)^2
  double gamma = 0.8;  // probability the intersection label is right
  double beta = 0.9;   // probability the road-type label is right
  double speed_fraction = 1.15;  // of the speed limit
  double max_accel = 3.0;       // m/s^2
  double heading_sd = 0.0;      // true heading offset from the street, radians
  SunAvailability sun = SunAvailability::always;
  double sun_on = 60.0;   // seconds visible per schedule period
  double sun_off = 30.0;  // seconds hidden per schedule period
  GeoPoint origin{49.01, 8.40};
  UtcSeconds start_utc = 1317031200.0;  // 2011-09-26T10:00:00Z

  static Eigen::Matrix2d default_odometry_cov();
  /// All noise off and cues always correct.
  static SimConfig noiseless();
  [[nodiscard]] double dt() const noexcept { return 1.0 / frame_rate; }
  void validate() const;
};

struct GroundTruthFrame {
  double t = 0.0;
  MapPose pose;
  Point2 position = Point2::Zero();
  double heading = 0.0;   // global, radians
  double velocity = 0.0;  // m/s over the step ending at this frame
  double travelled = 0.0; // arc length since the previous frame
};

/// Uniform random successor at every junction, preferring ones that are not dead ends.
std::vector<SegmentId> random_route(const RoadGraph& graph, SegmentId start, double min_length,
                                    std::mt19937_64& rng);
/// Follows the successor with the smallest heading change.
std::vector<SegmentId> straight_route(const RoadGraph& graph, SegmentId start, double min_length);

/// Frames at 1 / frame_rate spacing while the vehicle is on the route, starting at `start_d` on route[0].
std::vector<GroundTruthFrame> simulate_drive(const RoadGraph& graph, std::span<const SegmentId> route,
                                             const SimConfig& sim, double start_d = 0.0);

std::vector<ObservationFrame> emit_observations(std::span<const GroundTruthFrame> gt, const RoadGraph& graph,
                                                const SimConfig& sim);

/// `t,segment_id,d,theta,x,y,heading,v`
std::string ground_truth_to_csv(std::span<const GroundTruthFrame> gt);
std::vector<GroundTruthFrame> ground_truth_from_csv(std::string_view text);

/// Route file: one segment id per line (or comma separated).
std::vector<SegmentId> route_from_text(std::string_view text);

}  // namespace semloc
