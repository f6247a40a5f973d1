#include "semloc/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "semloc/angles.hpp"
#include "semloc/csv.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

struct LineClass {
  double speed;
  RoadType type;
};

LineClass pick_class(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  if (x < 0.45) return {30.0, RoadType::non_highway};
  if (x < 0.80) return {50.0, RoadType::non_highway};
  return {100.0, RoadType::highway};
}

void add_two_way(std::vector<StreetSegment>& out, const StreetSegment& s) {
  out.push_back(s);
  out.push_back(reversed(s));
}

std::vector<double> jittered_positions(int count, double block, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> pos{0.0};
  for (int i = 1; i < count; ++i) pos.push_back(pos.back() + block * (1.0 + jitter * u(rng)));
  return pos;
}

std::vector<StreetSegment> grid_segments(const SyntheticMapParams& p) {
  if (p.rows < 2 || p.cols < 2) throw ConfigError("grid needs at least 2 x 2 junctions");
  if (!(p.block > 0.0)) throw ConfigError("grid block length must be positive");
  if (!(p.jitter >= 0.0 && p.jitter < 1.0)) throw ConfigError("grid jitter must lie in [0, 1)");
  std::mt19937_64 rng(p.seed);
  const auto xs = jittered_positions(p.cols, p.block, p.jitter, rng);
  const auto ys = jittered_positions(p.rows, p.block, p.jitter, rng);
  const LineClass fixed{p.speed_limit, RoadType::non_highway};

  std::vector<StreetSegment> out;
  for (int j = 0; j < p.rows; ++j) {
    const LineClass c = p.mixed_classes ? pick_class(rng) : fixed;
    for (int i = 0; i + 1 < p.cols; ++i)
      add_two_way(out, make_line_segment({xs[i], ys[j]}, {xs[i + 1], ys[j]}, c.speed, c.type));
  }
  for (int i = 0; i < p.cols; ++i) {
    const LineClass c = p.mixed_classes ? pick_class(rng) : fixed;
    for (int j = 0; j + 1 < p.rows; ++j)
      add_two_way(out, make_line_segment({xs[i], ys[j]}, {xs[i], ys[j + 1]}, c.speed, c.type));
  }
  return out;
}

std::vector<StreetSegment> loop_segments(const SyntheticMapParams& p) {
  const double w = p.loop_width / 2.0;
  const double h = p.loop_height / 2.0;
  const double r = p.corner_radius;
  if (!(w > 0.0 && h > 0.0)) throw ConfigError("loop dimensions must be positive");
  if (!(r >= 0.0 && r < 0.9 * std::min(w, h))) throw ConfigError("corner radius too large for the loop");
  const double v = p.speed_limit;
  const RoadType t = RoadType::non_highway;

  std::vector<StreetSegment> ring;
  auto line = [&](Point2 a, Point2 b) { ring.push_back(make_line_segment(a, b, v, t)); };
  auto arc = [&](Point2 a, double beta) {
    if (r > 0.0) ring.push_back(make_arc_segment(a, beta, 1.0 / r, kPi * r / 2.0, v, t));
  };
  line({-w + r, -h}, {0.0, -h});
  line({0.0, -h}, {w - r, -h});
  arc({w - r, -h}, 0.0);
  line({w, -h + r}, {w, h - r});
  arc({w, h - r}, kPi / 2.0);
  line({w - r, h}, {0.0, h});
  line({0.0, h}, {-w + r, h});
  arc({-w + r, h}, kPi);
  line({-w, h - r}, {-w, -h + r});
  arc({-w, -h + r}, -kPi / 2.0);
  if (p.loop_connector) ring.push_back(make_line_segment({0.0, -h}, {0.0, h}, v, t));

  std::vector<StreetSegment> out;
  for (const auto& s : ring) add_two_way(out, s);
  return out;
}

std::vector<StreetSegment> radial_segments(const SyntheticMapParams& p) {
  if (p.spokes < 3) throw ConfigError("radial map needs at least 3 spokes");
  if (!(p.spoke_length > 0.0)) throw ConfigError("spoke length must be positive");
  std::vector<StreetSegment> out;
  for (int k = 0; k < p.spokes; ++k) {
    const double a = kTwoPi * k / p.spokes;
    const Point2 tip = p.spoke_length * Point2(std::cos(a), std::sin(a));
    add_two_way(out, make_line_segment(Point2::Zero(), tip, p.speed_limit, RoadType::non_highway));
  }
  return out;
}

std::mt19937_64 observation_rng(std::uint64_t seed) { return std::mt19937_64(seed ^ 0x5DEECE66DULL); }

Eigen::Matrix2d covariance_root(const Eigen::Matrix2d& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

bool sun_scheduled(const SimConfig& sim, double elapsed) {
  switch (sim.sun) {
    case SunAvailability::always: return true;
    case SunAvailability::never: return false;
    case SunAvailability::schedule: {
      const double period = sim.sun_on + sim.sun_off;
      if (!(period > 0.0)) return false;
      return std::fmod(elapsed, period) < sim.sun_on;
    }
  }
  return true;
}

}  // namespace

std::string_view to_string(MapKind kind) noexcept {
  switch (kind) {
    case MapKind::grid: return "grid";
    case MapKind::symmetric_loop: return "symmetric_loop";
    case MapKind::radial: return "radial";
  }
  return "grid";
}

MapKind map_kind_from_string(std::string_view text) {
  if (text == "grid") return MapKind::grid;
  if (text == "symmetric_loop") return MapKind::symmetric_loop;
  if (text == "radial") return MapKind::radial;
  throw ConfigError("unknown map kind '" + std::string(text) + "'");
}

StreetSegment reversed(const StreetSegment& s) {
  if (!s.is_arc()) return make_line_segment(s.p1, s.p0, s.speed_limit, s.road_type);
  StreetSegment r = make_arc_segment(s.p1, s.end_heading() + kPi, -s.alpha, s.length, s.speed_limit, s.road_type);
  r.p1 = s.p0;
  return r;
}

RoadGraph make_synthetic_map(MapKind kind, const SyntheticMapParams& params) {
  if (!(params.speed_limit > 0.0)) throw ConfigError("speed limit must be positive");
  std::vector<StreetSegment> segments;
  switch (kind) {
    case MapKind::grid: segments = grid_segments(params); break;
    case MapKind::symmetric_loop: segments = loop_segments(params); break;
    case MapKind::radial: segments = radial_segments(params); break;
  }
  for (auto& s : segments) s.beta = wrap_angle(s.beta);
  const RoadGraph raw = connect_segments(std::move(segments), params.origin);
  return partition_for_intersections(raw, params.partition);
}

Eigen::Matrix2d SimConfig::default_odometry_cov() {
  return Eigen::Vector2d(0.09, std::pow(deg2rad(0.5), 2)).asDiagonal();
}

SimConfig SimConfig::noiseless() {
  SimConfig sim;
  sim.odometry_cov.setZero();
  sim.sun_variance = 0.0;
  sim.gamma = 1.0;
  sim.beta = 1.0;
  return sim;
}

void SimConfig::validate() const {
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(sun_variance >= 0.0)) throw ConfigError("sun variance must be non-negative");
  if (!(speed_fraction > 0.0)) throw ConfigError("speed fraction must be positive");
  if (!(max_accel > 0.0)) throw ConfigError("max_accel must be positive");
  if (!(heading_sd >= 0.0)) throw ConfigError("heading_sd must be non-negative");
  if (!(sun_on >= 0.0 && sun_off >= 0.0)) throw ConfigError("sun schedule must be non-negative");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(odometry_cov);
  if (!odometry_cov.allFinite() || !odometry_cov.isApprox(odometry_cov.transpose()) ||
      es.eigenvalues().minCoeff() < 0.0)
    throw ConfigError("odometry covariance must be symmetric positive semi-definite");
}

std::vector<SegmentId> random_route(const RoadGraph& graph, SegmentId start, double min_length,
                                    std::mt19937_64& rng) {
  std::vector<SegmentId> route{start};
  double length = graph.segment(start).length;
  while (length < min_length) {
    const auto& next = graph.segment(route.back()).successors;
    if (next.empty()) break;
    std::vector<SegmentId> live;
    for (SegmentId v : next) {
      if (!graph.segment(v).successors.empty()) live.push_back(v);
    }
    const auto& pool = live.empty() ? next : live;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    route.push_back(pool[pick(rng)]);
    length += graph.segment(route.back()).length;
  }
  return route;
}

std::vector<SegmentId> straight_route(const RoadGraph& graph, SegmentId start, double min_length) {
  std::vector<SegmentId> route{start};
  double length = graph.segment(start).length;
  while (length < min_length) {
    const StreetSegment& cur = graph.segment(route.back());
    if (cur.successors.empty()) break;
    const auto best = std::min_element(cur.successors.begin(), cur.successors.end(), [&](SegmentId a, SegmentId b) {
      return std::abs(wrap_angle(graph.segment(a).beta - cur.end_heading())) <
             std::abs(wrap_angle(graph.segment(b).beta - cur.end_heading()));
    });
    route.push_back(*best);
    length += graph.segment(*best).length;
  }
  return route;
}

std::vector<GroundTruthFrame> simulate_drive(const RoadGraph& graph, std::span<const SegmentId> route,
                                             const SimConfig& sim, double start_d) {
  sim.validate();
  if (route.empty()) throw DomainError("route is empty");
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    if (!graph.is_successor(route[i], route[i + 1]))
      throw TopologyError("route is disconnected between segments " + std::to_string(index_of(route[i])) +
                          " and " + std::to_string(index_of(route[i + 1])));
  }
  if (!(start_d >= 0.0 && start_d < graph.segment(route[0]).length))
    throw DomainError("start offset outside the first route segment");

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> heading_noise(0.0, 1.0);
  const double dt = sim.dt();
  std::size_t idx = 0;
  double d = start_d;
  auto target_speed = [&](const StreetSegment& s) { return sim.speed_fraction * s.speed_limit / 3.6; };
  // Fastest speed for the coming step that still allows braking at max_accel
  // to every slower segment ahead.
  auto speed_cap = [&](std::size_t at, double d_at, double speed_now) {
    const double a = sim.max_accel;
    const StreetSegment& here = graph.segment(route[at]);
    double cap = target_speed(here);
    double ahead = here.length - d_at;
    const double reach = std::pow(speed_now + a * dt, 2) / (2.0 * a) + (speed_now + a * dt) * dt;
    for (std::size_t j = at + 1; j < route.size() && ahead <= reach; ++j) {
      const double v = target_speed(graph.segment(route[j]));
      cap = std::min(cap, -a * dt + std::sqrt(a * a * dt * dt + v * v + 2.0 * a * std::max(ahead, 0.0)));
      ahead += graph.segment(route[j]).length;
    }
    return cap;
  };
  const double v0 = target_speed(graph.segment(route[0]));
  double speed = std::min(v0, speed_cap(0, start_d, v0));
  double travelled = 0.0;

  std::vector<GroundTruthFrame> frames;
  for (std::size_t k = 0;; ++k) {
    GroundTruthFrame f;
    f.t = sim.start_utc + static_cast<double>(k) * dt;
    f.pose = MapPose{route[idx], d, sim.heading_sd > 0.0 ? sim.heading_sd * heading_noise(rng) : 0.0};
    const StreetSegment& seg = graph.segment(route[idx]);
    f.position = seg.point_at(d);
    f.heading = global_heading(f.pose, graph);
    f.velocity = speed;
    f.travelled = travelled;
    frames.push_back(f);

    const double target = speed_cap(idx, d, speed);
    speed = std::min(speed + sim.max_accel * dt, target);
    travelled = speed * dt;
    d += travelled;
    while (d >= graph.segment(route[idx]).length) {
      d -= graph.segment(route[idx]).length;
      if (++idx == route.size()) return frames;
    }
  }
}

std::vector<ObservationFrame> emit_observations(std::span<const GroundTruthFrame> gt, const RoadGraph& graph,
                                                const SimConfig& sim) {
  sim.validate();
  auto rng = observation_rng(sim.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Matrix2d odo_root = covariance_root(sim.odometry_cov);
  const double sun_sd = std::sqrt(sim.sun_variance);
  const GeoPoint origin = graph.frame_origin();

  std::vector<ObservationFrame> out;
  out.reserve(gt.size());
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const GroundTruthFrame& f = gt[k];
    const StreetSegment& seg = graph.segment(f.pose.u);
    ObservationFrame y;
    y.t = f.t;
    const Eigen::Vector2d odo_noise = odo_root * Eigen::Vector2d(normal(rng), normal(rng));
    const double sun_noise = sun_sd * normal(rng);
    const double inter_draw = uniform(rng);
    const double rtype_draw = uniform(rng);

    if (k > 0) {
      y.odometry = Odometry{f.travelled + odo_noise(0),
                            wrap_angle(f.heading - gt[k - 1].heading + odo_noise(1))};
    }
    y.velocity = f.velocity * 3.6;
    if (sun_scheduled(sim, f.t - gt.front().t)) {
      const SunPosition sun = sun_position(f.t, origin.lat, origin.lon);
      if (sun.daytime()) y.phi = wrap_angle(sun.map_azimuth() - f.heading + sun_noise);
    }
    const bool visible = seg.intersection_class == IntersectionClass::visible;
    const bool inter_label = inter_draw < sim.gamma ? visible : !visible;
    y.intersection = inter_label ? IntersectionObs::visible : IntersectionObs::not_visible;
    const bool rtype_ok = rtype_draw < sim.beta;
    y.road_type = rtype_ok ? seg.road_type
                           : (seg.road_type == RoadType::highway ? RoadType::non_highway : RoadType::highway);
    out.push_back(y);
  }
  return out;
}

std::string ground_truth_to_csv(std::span<const GroundTruthFrame> gt) {
  std::string out = "t,segment_id,d,theta,x,y,heading,v\n";
  for (const auto& f : gt) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", f.t, index_of(f.pose.u), f.pose.d, f.pose.theta,
                       f.position.x(), f.position.y(), f.heading, f.velocity);
  }
  return out;
}

std::vector<GroundTruthFrame> ground_truth_from_csv(std::string_view text) {
  const CsvTable table = CsvTable::parse(text);
  const auto c_t = table.column("t"), c_u = table.column("segment_id"), c_d = table.column("d");
  const auto c_th = table.column("theta"), c_x = table.column("x"), c_y = table.column("y");
  const auto c_h = table.column("heading"), c_v = table.column("v");
  std::vector<GroundTruthFrame> out;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    GroundTruthFrame f;
    f.t = table.required_number(r, c_t);
    const double u = table.required_number(r, c_u);
    if (u < 0.0 || u != std::floor(u)) throw FormatError("segment_id must be a non-negative integer");
    f.pose = MapPose{segment_id(static_cast<std::size_t>(u)), table.required_number(r, c_d),
                     table.required_number(r, c_th)};
    f.position = Point2(table.required_number(r, c_x), table.required_number(r, c_y));
    f.heading = table.required_number(r, c_h);
    f.velocity = table.required_number(r, c_v);
    if (!out.empty()) f.travelled = f.velocity * (f.t - out.back().t);
    out.push_back(f);
  }
  return out;
}

std::vector<SegmentId> route_from_text(std::string_view text) {
  std::vector<SegmentId> route;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw FormatError("invalid segment id '" + token + "' in route");
    route.push_back(segment_id(v));
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  if (route.empty()) throw FormatError("route file is empty");
  return route;
}

}  // namespace semloc
