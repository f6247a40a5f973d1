#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace semloc {

/// Dense segment identifier; a segment's id equals its index in the graph.
enum class SegmentId : std::uint32_t {};

constexpr std::size_t index_of(SegmentId id) noexcept { return static_cast<std::size_t>(id); }
constexpr SegmentId segment_id(std::size_t index) noexcept {
  return static_cast<SegmentId>(static_cast<std::uint32_t>(index));
}

enum class RoadType : std::uint8_t { highway, non_highway };

/// Whether an intersection ahead of the vehicle lies in the look-ahead band.
enum class IntersectionClass : std::uint8_t { too_close, visible, not_visible };

std::string_view to_string(RoadType type) noexcept;
std::string_view to_string(IntersectionClass cls) noexcept;
RoadType road_type_from_string(std::string_view text);
IntersectionClass intersection_class_from_string(std::string_view text);

using Point2 = Eigen::Vector2d;

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

/// Equirectangular projection about an origin; x points east, y north (meters).
class LocalFrame {
 public:
  static constexpr double kEarthRadius = 6371000.0;

  explicit LocalFrame(GeoPoint origin);

  [[nodiscard]] Point2 project(GeoPoint geo) const;
  [[nodiscard]] GeoPoint unproject(const Point2& p) const;
  [[nodiscard]] GeoPoint origin() const { return origin_; }

 private:
  GeoPoint origin_;
  double cos_lat_;
};

/// One directed road piece: a line (alpha == 0) or circular arc.
///
/// Geometry is fully determined by (p0, beta, alpha, length); p1 is stored for
/// convenience and validated against it.
struct StreetSegment {
  SegmentId id{};
  Point2 p0 = Point2::Zero();
  Point2 p1 = Point2::Zero();
  double beta = 0.0;    // heading at p0, radians CCW from +x
  double alpha = 0.0;   // curvature, radians per meter
  double length = 0.0;  // arc length, meters
  double speed_limit = 50.0;  // km/h
  RoadType road_type = RoadType::non_highway;
  IntersectionClass intersection_class = IntersectionClass::not_visible;
  std::vector<SegmentId> successors;
  std::vector<SegmentId> predecessors;

  [[nodiscard]] bool is_arc() const noexcept { return alpha != 0.0; }
  /// Street direction at arc length d (unwrapped).
  [[nodiscard]] double heading_at(double d) const noexcept { return beta + alpha * d; }
  [[nodiscard]] double end_heading() const noexcept { return beta + alpha * length; }
  /// Point at arc length d without range checking; extrapolates outside [0, length].
  [[nodiscard]] Point2 point_at(double d) const noexcept;
};

/// Builds a straight segment between two points (id and connectivity left empty).
StreetSegment make_line_segment(const Point2& p0, const Point2& p1, double speed_limit,
                                RoadType type);
/// Builds a circular arc starting at p0 with initial heading beta.
StreetSegment make_arc_segment(const Point2& p0, double beta, double alpha, double length,
                               double speed_limit, RoadType type);

struct GraphValidationOptions {
  double connectivity_tolerance = 0.5;  // meters
  double geometry_tolerance = 1e-6;     // meters
};

/// Immutable directed road graph. Construction validates all invariants.
class RoadGraph {
 public:
  RoadGraph() = default;
  RoadGraph(std::vector<StreetSegment> segments, GeoPoint frame_origin,
            GraphValidationOptions options = {});

  [[nodiscard]] const StreetSegment& segment(SegmentId id) const;
  [[nodiscard]] bool contains(SegmentId id) const noexcept {
    return index_of(id) < segments_.size();
  }
  [[nodiscard]] std::span<const StreetSegment> segments() const noexcept { return segments_; }
  [[nodiscard]] std::size_t size() const noexcept { return segments_.size(); }
  [[nodiscard]] bool empty() const noexcept { return segments_.empty(); }
  [[nodiscard]] GeoPoint frame_origin() const noexcept { return frame_origin_; }
  [[nodiscard]] double total_length() const noexcept;
  [[nodiscard]] bool is_successor(SegmentId from, SegmentId to) const;

 private:
  std::vector<StreetSegment> segments_;
  GeoPoint frame_origin_{};
};

/// Vehicle pose on the map: segment, arc length, heading offset from the street.
struct MapPose {
  SegmentId u{};
  double d = 0.0;
  double theta = 0.0;
};

/// theta + beta + alpha * d wrapped to (-pi, pi].
double global_heading(const MapPose& pose, const RoadGraph& graph);

/// Point at arc length d; throws DomainError outside [0, length].
Point2 segment_point(const StreetSegment& segment, double d);

struct ConnectOptions {
  bool allow_u_turns = false;
  double tolerance = 0.01;  // meters; endpoints closer than this are one junction
};

/// Assigns ids by position and derives successor/predecessor lists from endpoint
/// coincidence. Successors that reverse along the incoming segment (U-turns) are
/// skipped unless allowed.
RoadGraph connect_segments(std::vector<StreetSegment> segments, GeoPoint frame_origin,
                           ConnectOptions options = {});

/// A junction is a map point where segment ends meet.
struct Junction {
  Point2 position = Point2::Zero();
  int incident_ends = 0;  // directed segment starts + ends touching the point
  int branches = 0;       // distinct road directions leaving the point
  [[nodiscard]] bool is_intersection() const noexcept { return branches >= 3; }
};

struct JunctionIndex {
  std::vector<Junction> junctions;
  std::vector<std::size_t> start_node;  // per segment
  std::vector<std::size_t> end_node;    // per segment
};

JunctionIndex index_junctions(const RoadGraph& graph, double tolerance = 0.01);

struct PartitionOptions {
  double near = 6.25;  // meters; closer than this the intersection is not visible
  double far = 23.0;   // meters; beyond this no intersection is visible
};

/// Splits segments approaching an intersection so the intersection class is
/// constant within every output segment. Bands are measured along the road, so
/// a band may extend backwards across pass-through junctions.
RoadGraph partition_for_intersections(const RoadGraph& graph, PartitionOptions options = {});

/// Affine map s' = matrix * s + offset on the continuous state (d, d_prev, theta, theta_prev).
struct AffineMap4 {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();
  Eigen::Vector4d offset = Eigen::Vector4d::Zero();

  [[nodiscard]] Eigen::Vector4d apply(const Eigen::Vector4d& s) const { return matrix * s + offset; }
};

/// Re-expresses a continuous state on `from` relative to its successor `to`,
/// preserving arc-length position and global heading. Throws TopologyError when
/// `to` is not a successor of `from`.
AffineMap4 reparameterization(const RoadGraph& graph, SegmentId from, SegmentId to);

Eigen::Vector4d reparameterize_pose(const Eigen::Vector4d& s, SegmentId from, SegmentId to,
                                    const RoadGraph& graph);

}  // namespace semloc
