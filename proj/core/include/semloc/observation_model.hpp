#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semloc/road_map.hpp"
#include "semloc/solar_compass.hpp"

namespace semloc {

/// Continuous state (d, d_prev, theta, theta_prev) expressed on segment u.
using StateVector = Eigen::Vector4d;
using StateCovariance = Eigen::Matrix4d;

struct VehicleState {
  SegmentId u{};
  StateVector s = StateVector::Zero();
};

enum class IntersectionObs : std::uint8_t { visible, not_visible };

struct Odometry {
  double forward = 0.0;         // meters travelled since the previous frame
  double heading_change = 0.0;  // radians, CCW positive
};

/// One time step of observations; absent cues are std::nullopt.
struct ObservationFrame {
  UtcSeconds t = 0.0;
  std::optional<double> phi;  // relative sun direction, radians
  std::optional<IntersectionObs> intersection;
  std::optional<RoadType> road_type;
  std::optional<double> velocity;  // km/h
  std::optional<Odometry> odometry;

  [[nodiscard]] bool empty() const noexcept {
    return !phi && !intersection && !road_type && !velocity && !odometry;
  }
};

struct NoiseModel {
  double sun_variance = 0.0;  // rad^2
  Eigen::Matrix2d odometry_highway = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d odometry_city = Eigen::Matrix2d::Identity();
  double gamma_inter = 0.8;
  double beta_rtype = 0.9;
  double v0 = 25.0;  // km/h of slack over the speed limit
  double eps_speed = 1e-4;

  /// 15 deg sun noise; odometry 0.3 m / 0.5 deg in the city, doubled on highways.
  static NoiseModel defaults();

  [[nodiscard]] const Eigen::Matrix2d& odometry_covariance(RoadType type) const noexcept {
    return type == RoadType::highway ? odometry_highway : odometry_city;
  }
  /// Throws ConfigError when a covariance is not SPD or a probability is outside (0.5, 1].
  void validate() const;
};

/// Predicted relative sun direction as an affine function of the state:
/// phi = h * s + offset, with h = -(alpha, 0, 1, 0) and offset = map azimuth - beta.
struct LinearSunObservation {
  Eigen::RowVector4d h = Eigen::RowVector4d::Zero();
  double offset = 0.0;

  [[nodiscard]] double predict(const StateVector& s) const { return h.dot(s) + offset; }
};

LinearSunObservation sun_observation_map(const StreetSegment& segment, const SunPosition& sun);

/// Odometry observation matrix M_u with rows (1, -1, 0, 0) and (alpha, -alpha, 1, -1).
Eigen::Matrix<double, 2, 4> odometry_matrix(const StreetSegment& segment);

/// Gaussian density of the wrapped sun residual; 1 when the sun is below the horizon.
double sun_likelihood(double phi_obs, const VehicleState& state, const RoadGraph& graph,
                      const SunPosition& sun, const NoiseModel& nm);

double intersection_likelihood(IntersectionObs obs, SegmentId u, const RoadGraph& graph,
                               const NoiseModel& nm);

double road_type_likelihood(std::optional<RoadType> obs, SegmentId u, const RoadGraph& graph,
                            const NoiseModel& nm);

/// 0.99 / (V_u + V0) up to V_u + V0 inclusive, eps_speed above.
double speed_likelihood(double velocity, SegmentId u, const RoadGraph& graph, const NoiseModel& nm);

/// Bivariate Gaussian density of the odometry about M_u s with the road-class covariance.
double odometry_likelihood(const Odometry& odom, const StateVector& s, SegmentId u,
                           const RoadGraph& graph, const NoiseModel& nm);

/// Product of the present terms; absent cues contribute a factor of 1.
double frame_likelihood(const ObservationFrame& y, const VehicleState& x, const RoadGraph& graph,
                        const std::optional<SunPosition>& sun, const NoiseModel& nm);

/// Product of the cues that depend only on the segment (intersection, road type, speed).
double segment_likelihood(const ObservationFrame& y, SegmentId u, const RoadGraph& graph,
                          const NoiseModel& nm);

// ---------------------------------------------------------------------------
// Parameter learning

/// One training residual; empty optionals are missing columns.
struct ResidualRecord {
  double t = 0.0;
  RoadType road_class = RoadType::non_highway;
  std::optional<double> res_d;
  std::optional<double> res_theta;
  std::optional<double> res_sun;
  std::optional<bool> inter_pred;
  std::optional<bool> inter_gt;
  std::optional<RoadType> rtype_pred;
  std::optional<RoadType> rtype_gt;
};

struct VarianceFloors {
  double sun = 0.0012184696791468343;       // (2 deg)^2
  double odometry_d = 0.0025;               // (0.05 m)^2
  double odometry_theta = 1.2184696791468344e-05;  // (0.2 deg)^2
};

/// Maximum-likelihood noise parameters: per-class odometry covariance (divide
/// by N), wrapped sun residual variance, and gamma / beta from confusion counts.
/// Missing cues keep their defaults (a warning is recorded); a class or cue with
/// a single sample throws FitError.
NoiseModel fit_noise(std::span<const ResidualRecord> records, const VarianceFloors& floors = {},
                     std::vector<std::string>* warnings = nullptr);

}  // namespace semloc
