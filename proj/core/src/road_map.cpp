#include "semloc/road_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "semloc/angles.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

constexpr double kDirectionTolerance = 1e-4;  // radians

std::string id_string(SegmentId id) { return std::to_string(index_of(id)); }

// Clusters points that lie within `tolerance` of each other.
class PointClusterer {
 public:
  explicit PointClusterer(double tolerance) : tolerance_(tolerance) {}

  std::size_t insert(const Point2& p) {
    const auto cx = cell(p.x());
    const auto cy = cell(p.y());
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (std::size_t node : it->second) {
          if ((points_[node] - p).norm() <= tolerance_) return node;
        }
      }
    }
    points_.push_back(p);
    cells_[key(cx, cy)].push_back(points_.size() - 1);
    return points_.size() - 1;
  }

  [[nodiscard]] const std::vector<Point2>& points() const { return points_; }

 private:
  std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / tolerance_)); }
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL) ^ static_cast<std::uint64_t>(y);
  }

  double tolerance_;
  std::vector<Point2> points_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

bool same_direction(double a, double b) { return std::abs(wrap_angle(a - b)) < kDirectionTolerance; }

bool is_u_turn(const StreetSegment& from, const StreetSegment& to, std::size_t from_start,
               std::size_t to_end) {
  return from_start == to_end && same_direction(to.beta, from.end_heading() + kPi);
}

}  // namespace

std::string_view to_string(RoadType type) noexcept {
  return type == RoadType::highway ? "highway" : "non_highway";
}

std::string_view to_string(IntersectionClass cls) noexcept {
  switch (cls) {
    case IntersectionClass::too_close: return "too_close";
    case IntersectionClass::visible: return "visible";
    case IntersectionClass::not_visible: return "not_visible";
  }
  return "not_visible";
}

RoadType road_type_from_string(std::string_view text) {
  if (text == "highway") return RoadType::highway;
  if (text == "non_highway") return RoadType::non_highway;
  throw FormatError("unknown road type '" + std::string(text) + "'");
}

IntersectionClass intersection_class_from_string(std::string_view text) {
  if (text == "too_close") return IntersectionClass::too_close;
  if (text == "visible") return IntersectionClass::visible;
  if (text == "not_visible") return IntersectionClass::not_visible;
  throw FormatError("unknown intersection class '" + std::string(text) + "'");
}

LocalFrame::LocalFrame(GeoPoint origin)
    : origin_(origin), cos_lat_(std::cos(deg2rad(origin.lat))) {}

Point2 LocalFrame::project(GeoPoint geo) const {
  return {kEarthRadius * deg2rad(geo.lon - origin_.lon) * cos_lat_,
          kEarthRadius * deg2rad(geo.lat - origin_.lat)};
}

GeoPoint LocalFrame::unproject(const Point2& p) const {
  return {origin_.lat + rad2deg(p.y() / kEarthRadius),
          origin_.lon + rad2deg(p.x() / (kEarthRadius * cos_lat_))};
}

Point2 StreetSegment::point_at(double d) const noexcept {
  if (alpha == 0.0) return p0 + d * Point2(std::cos(beta), std::sin(beta));
  const double psi = beta + alpha * d;
  return p0 + Point2(std::sin(psi) - std::sin(beta), std::cos(beta) - std::cos(psi)) / alpha;
}

StreetSegment make_line_segment(const Point2& p0, const Point2& p1, double speed_limit,
                                RoadType type) {
  StreetSegment s;
  s.p0 = p0;
  s.p1 = p1;
  const Point2 delta = p1 - p0;
  s.beta = std::atan2(delta.y(), delta.x());
  s.alpha = 0.0;
  s.length = delta.norm();
  s.speed_limit = speed_limit;
  s.road_type = type;
  return s;
}

StreetSegment make_arc_segment(const Point2& p0, double beta, double alpha, double length,
                               double speed_limit, RoadType type) {
  StreetSegment s;
  s.p0 = p0;
  s.beta = beta;
  s.alpha = alpha;
  s.length = length;
  s.speed_limit = speed_limit;
  s.road_type = type;
  s.p1 = s.point_at(length);
  return s;
}

RoadGraph::RoadGraph(std::vector<StreetSegment> segments, GeoPoint frame_origin,
                     GraphValidationOptions options)
    : segments_(std::move(segments)), frame_origin_(frame_origin) {
  const std::size_t n = segments_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const StreetSegment& s = segments_[i];
    const std::string where = "segment " + std::to_string(i);
    if (index_of(s.id) != i) throw InvalidGraphError(where + ": id does not match its index");
    if (!(s.length > 0.0) || !std::isfinite(s.length))
      throw InvalidGraphError(where + ": length must be positive");
    if (!(s.speed_limit > 0.0)) throw InvalidGraphError(where + ": speed limit must be positive");
    if (!std::isfinite(s.beta) || !std::isfinite(s.alpha))
      throw InvalidGraphError(where + ": non-finite heading or curvature");
    if ((s.point_at(s.length) - s.p1).norm() > options.geometry_tolerance)
      throw InvalidGraphError(where + ": end point inconsistent with p0, beta, alpha, length");
    for (SegmentId next : s.successors) {
      if (index_of(next) >= n) throw InvalidGraphError(where + ": dangling successor " + id_string(next));
      const StreetSegment& t = segments_[index_of(next)];
      if (std::find(t.predecessors.begin(), t.predecessors.end(), s.id) == t.predecessors.end())
        throw InvalidGraphError(where + ": successor " + id_string(next) + " does not list it as predecessor");
      if ((t.p0 - s.p1).norm() > options.connectivity_tolerance)
        throw InvalidGraphError(where + ": successor " + id_string(next) + " does not start at its end");
    }
    for (SegmentId prev : s.predecessors) {
      if (index_of(prev) >= n) throw InvalidGraphError(where + ": dangling predecessor " + id_string(prev));
      const StreetSegment& t = segments_[index_of(prev)];
      if (std::find(t.successors.begin(), t.successors.end(), s.id) == t.successors.end())
        throw InvalidGraphError(where + ": predecessor " + id_string(prev) + " does not list it as successor");
    }
  }
}

const StreetSegment& RoadGraph::segment(SegmentId id) const {
  if (!contains(id)) throw LookupError("unknown segment id " + id_string(id));
  return segments_[index_of(id)];
}

double RoadGraph::total_length() const noexcept {
  double total = 0.0;
  for (const auto& s : segments_) total += s.length;
  return total;
}

bool RoadGraph::is_successor(SegmentId from, SegmentId to) const {
  const auto& succ = segment(from).successors;
  return std::find(succ.begin(), succ.end(), to) != succ.end();
}

double global_heading(const MapPose& pose, const RoadGraph& graph) {
  const StreetSegment& s = graph.segment(pose.u);
  if (pose.d < 0.0 || pose.d > s.length)
    throw DomainError("distance " + std::to_string(pose.d) + " outside segment " + id_string(pose.u));
  return wrap_angle(pose.theta + s.beta + s.alpha * pose.d);
}

Point2 segment_point(const StreetSegment& segment, double d) {
  if (!(d >= 0.0 && d <= segment.length))
    throw DomainError("distance " + std::to_string(d) + " outside segment of length " +
                      std::to_string(segment.length));
  if (d == segment.length) return segment.p1;
  if (d == 0.0) return segment.p0;
  return segment.point_at(d);
}

RoadGraph connect_segments(std::vector<StreetSegment> segments, GeoPoint frame_origin,
                           ConnectOptions options) {
  PointClusterer nodes(options.tolerance);
  std::vector<std::size_t> start(segments.size());
  std::vector<std::size_t> end(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segments[i].id = segment_id(i);
    segments[i].successors.clear();
    segments[i].predecessors.clear();
    start[i] = nodes.insert(segments[i].p0);
    end[i] = nodes.insert(segments[i].p1);
  }
  std::vector<std::vector<std::size_t>> starting_at(nodes.points().size());
  for (std::size_t i = 0; i < segments.size(); ++i) starting_at[start[i]].push_back(i);

  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j : starting_at[end[i]]) {
      if (!options.allow_u_turns && is_u_turn(segments[i], segments[j], start[i], end[j])) continue;
      segments[i].successors.push_back(segment_id(j));
      segments[j].predecessors.push_back(segment_id(i));
    }
  }
  GraphValidationOptions validation;
  validation.connectivity_tolerance = std::max(validation.connectivity_tolerance, options.tolerance);
  return RoadGraph(std::move(segments), frame_origin, validation);
}

JunctionIndex index_junctions(const RoadGraph& graph, double tolerance) {
  PointClusterer nodes(tolerance);
  JunctionIndex index;
  index.start_node.resize(graph.size());
  index.end_node.resize(graph.size());
  for (const auto& s : graph.segments()) {
    index.start_node[index_of(s.id)] = nodes.insert(s.p0);
    index.end_node[index_of(s.id)] = nodes.insert(s.p1);
  }
  index.junctions.resize(nodes.points().size());
  std::vector<std::vector<double>> directions(nodes.points().size());
  for (const auto& s : graph.segments()) {
    const std::size_t a = index.start_node[index_of(s.id)];
    const std::size_t b = index.end_node[index_of(s.id)];
    index.junctions[a].incident_ends++;
    index.junctions[b].incident_ends++;
    directions[a].push_back(s.beta);
    directions[b].push_back(s.end_heading() + kPi);
  }
  for (std::size_t n = 0; n < index.junctions.size(); ++n) {
    index.junctions[n].position = nodes.points()[n];
    std::vector<double> distinct;
    for (double dir : directions[n]) {
      const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                    [&](double other) { return same_direction(dir, other); });
      if (!seen) distinct.push_back(dir);
    }
    index.junctions[n].branches = static_cast<int>(distinct.size());
  }
  return index;
}

namespace {

constexpr double kNoIntersection = std::numeric_limits<double>::infinity();
constexpr double kSplitEpsilon = 1e-6;

// Distance from the end of each segment to the next intersection ahead, following
// pass-through junctions; infinity when none lies within `horizon`.
std::vector<double> distance_to_intersection(const RoadGraph& graph, const JunctionIndex& index,
                                             double horizon) {
  const std::size_t n = graph.size();
  // Unique non-reversing continuation through a pass-through junction, if any.
  std::vector<std::ptrdiff_t> continuation(n, -1);
  for (const auto& s : graph.segments()) {
    const std::size_t i = index_of(s.id);
    const Junction& j = index.junctions[index.end_node[i]];
    if (j.is_intersection() || j.branches != 2) continue;
    std::ptrdiff_t next = -1;
    int count = 0;
    for (SegmentId t : s.successors) {
      const std::size_t k = index_of(t);
      if (is_u_turn(s, graph.segment(t), index.start_node[i], index.end_node[k])) continue;
      next = static_cast<std::ptrdiff_t>(k);
      ++count;
    }
    if (count == 1) continuation[i] = next;
  }

  std::vector<double> offset(n, kNoIntersection);
  for (std::size_t i = 0; i < n; ++i) {
    double accumulated = 0.0;
    std::size_t current = i;
    for (std::size_t steps = 0; steps <= n; ++steps) {
      if (index.junctions[index.end_node[current]].is_intersection()) {
        offset[i] = accumulated;
        break;
      }
      const std::ptrdiff_t next = continuation[current];
      if (next < 0) break;
      accumulated += graph.segments()[static_cast<std::size_t>(next)].length;
      if (accumulated >= horizon) break;
      current = static_cast<std::size_t>(next);
    }
  }
  return offset;
}

IntersectionClass classify_distance(double distance, const PartitionOptions& options) {
  if (distance <= options.near) return IntersectionClass::too_close;
  if (distance <= options.far) return IntersectionClass::visible;
  return IntersectionClass::not_visible;
}

StreetSegment sub_segment(const StreetSegment& s, double from, double to) {
  StreetSegment piece = s;
  piece.successors.clear();
  piece.predecessors.clear();
  piece.p0 = from == 0.0 ? s.p0 : s.point_at(from);
  piece.beta = s.heading_at(from);
  piece.length = to - from;
  piece.p1 = to == s.length ? s.p1 : s.point_at(to);
  return piece;
}

}  // namespace

RoadGraph partition_for_intersections(const RoadGraph& graph, PartitionOptions options) {
  if (!(options.near > 0.0 && options.far > options.near))
    throw ConfigError("partition bands require 0 < near < far");
  const JunctionIndex index = index_junctions(graph);
  const std::vector<double> offset = distance_to_intersection(graph, index, options.far);

  std::vector<StreetSegment> out;
  std::vector<std::size_t> first_piece(graph.size());
  std::vector<std::size_t> last_piece(graph.size());
  for (const auto& s : graph.segments()) {
    const std::size_t i = index_of(s.id);
    std::vector<double> cuts{0.0};
    if (std::isfinite(offset[i])) {
      for (double band : {options.far, options.near}) {
        const double cut = s.length + offset[i] - band;
        if (cut > cuts.back() + kSplitEpsilon && cut < s.length - kSplitEpsilon) cuts.push_back(cut);
      }
    }
    cuts.push_back(s.length);
    first_piece[i] = out.size();
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      StreetSegment piece = sub_segment(s, cuts[k], cuts[k + 1]);
      const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
      piece.intersection_class = std::isfinite(offset[i])
                                     ? classify_distance(s.length - mid + offset[i], options)
                                     : IntersectionClass::not_visible;
      piece.id = segment_id(out.size());
      out.push_back(std::move(piece));
    }
    last_piece[i] = out.size() - 1;
  }

  for (const auto& s : graph.segments()) {
    const std::size_t i = index_of(s.id);
    for (std::size_t k = first_piece[i]; k < last_piece[i]; ++k) {
      out[k].successors.push_back(segment_id(k + 1));
      out[k + 1].predecessors.push_back(segment_id(k));
    }
    for (SegmentId next : s.successors) {
      out[last_piece[i]].successors.push_back(segment_id(first_piece[index_of(next)]));
    }
    for (SegmentId prev : s.predecessors) {
      out[first_piece[i]].predecessors.push_back(segment_id(last_piece[index_of(prev)]));
    }
  }
  return RoadGraph(std::move(out), graph.frame_origin());
}

AffineMap4 reparameterization(const RoadGraph& graph, SegmentId from, SegmentId to) {
  const StreetSegment& a = graph.segment(from);
  const StreetSegment& b = graph.segment(to);
  if (!graph.is_successor(from, to))
    throw TopologyError("segment " + id_string(to) + " is not a successor of " + id_string(from));
  // d' = d - l_a;  theta' = theta + (alpha_a - alpha_b) (d - l_a) + wrap(end heading of a - beta_b)
  const double curvature_gap = a.alpha - b.alpha;
  const double turn = wrap_angle(a.end_heading() - b.beta);
  AffineMap4 map;
  map.matrix(2, 0) = curvature_gap;
  map.matrix(3, 1) = curvature_gap;
  map.offset << -a.length, -a.length, turn - curvature_gap * a.length, turn - curvature_gap * a.length;
  return map;
}

Eigen::Vector4d reparameterize_pose(const Eigen::Vector4d& s, SegmentId from, SegmentId to,
                                    const RoadGraph& graph) {
  return reparameterization(graph, from, to).apply(s);
}

}  // namespace semloc
