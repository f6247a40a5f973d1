#include "semloc/observation_model.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "semloc/angles.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

constexpr double kSpeedMass = 0.99;

double gaussian_density(double residual, double variance) {
  return std::exp(-0.5 * residual * residual / variance) / std::sqrt(kTwoPi * variance);
}

bool is_spd(const Eigen::Matrix2d& m) {
  if (!m.allFinite() || std::abs(m(0, 1) - m(1, 0)) > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
    return false;
  return Eigen::LLT<Eigen::Matrix2d>(m).info() == Eigen::Success;
}

// 1 - p evaluated on the shortest decimal form of p, so that 0.8 maps to exactly 0.2.
double complement_probability(double p) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), p, std::chars_format::fixed);
  const std::string_view text(buf.data(), ec == std::errc() ? static_cast<std::size_t>(end - buf.data()) : 0);
  const auto dot = text.find('.');
  const std::size_t digits = dot == std::string_view::npos ? 0 : text.size() - dot - 1;
  if (text.empty() || digits > 15) return 1.0 - p;
  const double scale = std::pow(10.0, static_cast<double>(digits));
  const double n = std::round(p * scale);
  return (scale - n) / scale;
}

std::string_view class_name(RoadType type) { return type == RoadType::highway ? "highway" : "city"; }

}  // namespace

NoiseModel NoiseModel::defaults() {
  NoiseModel nm;
  nm.sun_variance = std::pow(deg2rad(15.0), 2);
  const double sd = 0.3;
  const double st = deg2rad(0.5);
  nm.odometry_city = Eigen::Vector2d(sd * sd, st * st).asDiagonal();
  nm.odometry_highway = Eigen::Vector2d(4 * sd * sd, 4 * st * st).asDiagonal();
  return nm;
}

void NoiseModel::validate() const {
  if (!(sun_variance > 0.0) || !std::isfinite(sun_variance))
    throw ConfigError("sun variance must be positive");
  if (!is_spd(odometry_city)) throw ConfigError("city odometry covariance is not SPD");
  if (!is_spd(odometry_highway)) throw ConfigError("highway odometry covariance is not SPD");
  if (!(gamma_inter > 0.5 && gamma_inter <= 1.0)) throw ConfigError("gamma_inter must lie in (0.5, 1]");
  if (!(beta_rtype > 0.5 && beta_rtype <= 1.0)) throw ConfigError("beta_rtype must lie in (0.5, 1]");
  if (!(v0 >= 0.0)) throw ConfigError("v0 must be non-negative");
  if (!(eps_speed > 0.0)) throw ConfigError("eps_speed must be positive");
}

LinearSunObservation sun_observation_map(const StreetSegment& segment, const SunPosition& sun) {
  LinearSunObservation obs;
  obs.h << -segment.alpha, 0.0, -1.0, 0.0;
  obs.offset = sun.map_azimuth() - segment.beta;
  return obs;
}

Eigen::Matrix<double, 2, 4> odometry_matrix(const StreetSegment& segment) {
  Eigen::Matrix<double, 2, 4> m;
  m << 1.0, -1.0, 0.0, 0.0, segment.alpha, -segment.alpha, 1.0, -1.0;
  return m;
}

double sun_likelihood(double phi_obs, const VehicleState& state, const RoadGraph& graph,
                      const SunPosition& sun, const NoiseModel& nm) {
  if (!sun.daytime()) return 1.0;
  const auto map = sun_observation_map(graph.segment(state.u), sun);
  return gaussian_density(wrap_angle(phi_obs - map.predict(state.s)), nm.sun_variance);
}

double intersection_likelihood(IntersectionObs obs, SegmentId u, const RoadGraph& graph,
                               const NoiseModel& nm) {
  const bool visible = graph.segment(u).intersection_class == IntersectionClass::visible;
  const bool match = visible == (obs == IntersectionObs::visible);
  return match ? nm.gamma_inter : complement_probability(nm.gamma_inter);
}

double road_type_likelihood(std::optional<RoadType> obs, SegmentId u, const RoadGraph& graph,
                            const NoiseModel& nm) {
  if (!obs) return 1.0;
  return *obs == graph.segment(u).road_type ? nm.beta_rtype : complement_probability(nm.beta_rtype);
}

double speed_likelihood(double velocity, SegmentId u, const RoadGraph& graph, const NoiseModel& nm) {
  if (velocity < 0.0) throw DomainError("velocity must be non-negative");
  const double v_max = graph.segment(u).speed_limit + nm.v0;
  return velocity <= v_max ? kSpeedMass / v_max : nm.eps_speed;
}

double odometry_likelihood(const Odometry& odom, const StateVector& s, SegmentId u,
                           const RoadGraph& graph, const NoiseModel& nm) {
  const StreetSegment& segment = graph.segment(u);
  const Eigen::Matrix2d& cov = nm.odometry_covariance(segment.road_type);
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("odometry covariance is singular");
  Eigen::Vector2d r = Eigen::Vector2d(odom.forward, odom.heading_change) - odometry_matrix(segment) * s;
  r(1) = wrap_angle(r(1));
  const double maha = r.dot(llt.solve(r));
  const double det = cov.determinant();
  return std::exp(-0.5 * maha) / (kTwoPi * std::sqrt(det));
}

double segment_likelihood(const ObservationFrame& y, SegmentId u, const RoadGraph& graph,
                          const NoiseModel& nm) {
  double p = 1.0;
  if (y.intersection) p *= intersection_likelihood(*y.intersection, u, graph, nm);
  if (y.road_type) p *= road_type_likelihood(y.road_type, u, graph, nm);
  if (y.velocity) p *= speed_likelihood(*y.velocity, u, graph, nm);
  return p;
}

double frame_likelihood(const ObservationFrame& y, const VehicleState& x, const RoadGraph& graph,
                        const std::optional<SunPosition>& sun, const NoiseModel& nm) {
  double p = segment_likelihood(y, x.u, graph, nm);
  if (y.phi && sun) p *= sun_likelihood(*y.phi, x, graph, *sun, nm);
  if (y.odometry) p *= odometry_likelihood(*y.odometry, x.s, x.u, graph, nm);
  return p;
}

NoiseModel fit_noise(std::span<const ResidualRecord> records, const VarianceFloors& floors,
                     std::vector<std::string>* warnings) {
  auto warn = [&](std::string message) {
    if (warnings != nullptr) warnings->push_back(std::move(message));
  };
  NoiseModel nm = NoiseModel::defaults();

  for (RoadType cls : {RoadType::non_highway, RoadType::highway}) {
    std::vector<Eigen::Vector2d> samples;
    for (const auto& r : records) {
      if (r.road_class == cls && r.res_d && r.res_theta)
        samples.emplace_back(*r.res_d, wrap_angle(*r.res_theta));
    }
    const std::string name(class_name(cls));
    if (samples.empty()) {
      warn("no odometry residuals for class " + name + "; keeping default covariance");
      continue;
    }
    if (samples.size() < 2) throw FitError("need at least 2 odometry residuals for class " + name);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& s : samples) cov += (s - mean) * (s - mean).transpose();
    cov /= static_cast<double>(samples.size());

    bool floored = false;
    if (cov(0, 0) < floors.odometry_d) cov(0, 0) = floors.odometry_d, floored = true;
    if (cov(1, 1) < floors.odometry_theta) cov(1, 1) = floors.odometry_theta, floored = true;
    const double max_cross = 0.99 * std::sqrt(cov(0, 0) * cov(1, 1));
    if (std::abs(cov(0, 1)) > max_cross) {
      cov(0, 1) = cov(1, 0) = std::copysign(max_cross, cov(0, 1));
      floored = true;
    }
    if (floored) warn("odometry covariance for class " + name + " was degenerate; floor applied");
    (cls == RoadType::highway ? nm.odometry_highway : nm.odometry_city) = cov;
  }

  std::vector<double> sun;
  for (const auto& r : records) {
    if (r.res_sun) sun.push_back(wrap_angle(*r.res_sun));
  }
  if (sun.empty()) {
    warn("no sun residuals; keeping default sun variance");
  } else {
    if (sun.size() < 2) throw FitError("need at least 2 sun residuals");
    double mean = 0.0;
    for (double v : sun) mean += v;
    mean /= static_cast<double>(sun.size());
    double var = 0.0;
    for (double v : sun) var += (v - mean) * (v - mean);
    var /= static_cast<double>(sun.size());
    if (var < floors.sun) {
      warn("sun variance was degenerate; floor applied");
      var = floors.sun;
    }
    nm.sun_variance = var;
  }

  auto confusion_rate = [&](auto&& pick, std::string_view cue, double fallback) {
    std::size_t total = 0;
    std::size_t match = 0;
    for (const auto& r : records) {
      auto [pred, gt] = pick(r);
      if (!pred || !gt) continue;
      ++total;
      if (*pred == *gt) ++match;
    }
    if (total == 0) {
      warn("no " + std::string(cue) + " labels; keeping default");
      return fallback;
    }
    const double rate = static_cast<double>(match) / static_cast<double>(total);
    if (!(rate > 0.5)) throw FitError(std::string(cue) + " accuracy " + std::to_string(rate) + " is not above chance");
    return rate;
  };
  nm.gamma_inter = confusion_rate(
      [](const ResidualRecord& r) { return std::pair{r.inter_pred, r.inter_gt}; }, "intersection",
      nm.gamma_inter);
  nm.beta_rtype = confusion_rate(
      [](const ResidualRecord& r) { return std::pair{r.rtype_pred, r.rtype_gt}; }, "road type",
      nm.beta_rtype);
  nm.validate();
  return nm;
}

}  // namespace semloc
