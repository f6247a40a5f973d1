#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "semloc/observation_model.hpp"
#include "semloc/road_map.hpp"
#include "semloc/solar_compass.hpp"

namespace semloc {

struct GaussianComponent {
  double weight = 1.0;  // within-segment mixture weight
  StateVector mean = StateVector::Zero();
  StateCovariance cov = StateCovariance::Identity();
};

struct SegmentBelief {
  SegmentId u{};
  double weight = 0.0;
  std::vector<GaussianComponent> components;
};

/// p(u, s | y_1:t): a discrete distribution over segments times a Gaussian
/// mixture over s per segment. Only segments carrying mass are stored, sorted by id.
struct Posterior {
  double t = 0.0;
  std::vector<SegmentBelief> segments;

  [[nodiscard]] const SegmentBelief* find(SegmentId u) const noexcept;
  [[nodiscard]] double total_weight() const noexcept;
  [[nodiscard]] std::size_t component_count() const noexcept;
};

struct FilterConfig {
  std::size_t max_components = 4;     // per segment
  double prune_weight = 1e-6;         // on w_u * pi_k
  double merge_mahalanobis = 1.0;
  double transition_sharpness = 5.0;  // lambda, meters
  double dt = 1.0;                    // seconds per frame
  /// Diagonal on (d, d_prev, theta, theta_prev).
  StateCovariance process_noise = default_process_noise();
  double component_spacing = 20.0;  // meters between initial components
  double init_speed = 8.0;          // m/s
  double init_speed_sd = 8.0;       // m/s
  /// theta' = heading_decay * theta + heading_velocity * (theta - theta_prev).
  double heading_decay = 0.0;
  double heading_velocity = 0.0;
  /// Segments a component may traverse in one step.
  int max_hops = 3;

  static StateCovariance default_process_noise();
  [[nodiscard]] Eigen::Matrix4d transition_matrix() const;
  /// Throws ConfigError on non-positive sizes or a process noise that is not SPD.
  void validate() const;
};

/// Distribution over "stay" and each successor for one component mean.
struct TransitionProbs {
  double stay = 1.0;
  std::vector<std::pair<SegmentId, double>> successors;
};

struct UpdateResult {
  Posterior posterior;
  double log_likelihood = 0.0;  // log p(y_t | y_1:t-1)
};

/// Segment weights proportional to length; components every `component_spacing` meters.
Posterior init_uniform(const RoadGraph& graph, const FilterConfig& config);

/// p(leave) = sigmoid((2d - d_prev - l_u) / lambda), split uniformly over successors.
TransitionProbs street_transition_probs(const StateVector& mean, SegmentId u, const RoadGraph& graph,
                                        const FilterConfig& config);

/// Time update. Transition probabilities are averaged over each component's
/// Gaussian and the stay / leave branches are moment matched.
Posterior predict(const Posterior& post, const RoadGraph& graph, const FilterConfig& config);

/// Measurement update; throws DivergenceError when the marginal likelihood
/// underflows 1e-300.
UpdateResult update(const Posterior& post, const ObservationFrame& y, const RoadGraph& graph,
                    const std::optional<SunPosition>& sun, const NoiseModel& nm);

Posterior merge_prune(const Posterior& post, const FilterConfig& config);

UpdateResult step(const Posterior& post, const ObservationFrame& y, const RoadGraph& graph,
                  const std::optional<SunPosition>& sun, const NoiseModel& nm,
                  const FilterConfig& config);

/// Moment-matched single Gaussian of a weighted component set (weights need not sum to 1).
GaussianComponent moment_match(const std::vector<GaussianComponent>& components);

/// Dense street marginals indexed by segment.
std::vector<double> street_marginals(const Posterior& post, std::size_t segment_count);
double street_entropy(const Posterior& post);

/// Runs the filter over a stream of frames. The first frame is update-only; a
/// divergence resets the posterior to init_uniform and re-applies the frame.
class Localizer {
 public:
  Localizer(const RoadGraph& graph, NoiseModel nm, FilterConfig config = {});

  UpdateResult process(const ObservationFrame& y);

  [[nodiscard]] const Posterior& posterior() const noexcept { return posterior_; }
  [[nodiscard]] std::size_t resets() const noexcept { return resets_; }
  [[nodiscard]] std::size_t frames() const noexcept { return frames_; }

 private:
  std::optional<SunPosition> sun_for(const ObservationFrame& y) const;

  const RoadGraph* graph_;
  NoiseModel nm_;
  FilterConfig config_;
  Posterior posterior_;
  std::size_t frames_ = 0;
  std::size_t resets_ = 0;
};

}  // namespace semloc
