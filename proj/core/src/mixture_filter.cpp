#include "semloc/mixture_filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "semloc/angles.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

constexpr double kLogUnderflow = -690.7755278982137;  // log(1e-300)
constexpr double kNegligible = 1e-13;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sum_exp(const std::vector<double>& v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

void symmetrize(StateCovariance& m) { m = 0.5 * (m + m.transpose()).eval(); }

// 16-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::array<double, 16> x{};
  std::array<double, 16> w{};

  GaussLegendre() {
    constexpr int n = 16;
    for (int i = 0; i < n; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre rule;
  return rule;
}

struct Moments1d {
  double mass = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

// Moments of N(m, s^2) reweighted by sigmoid(z) (leave) and sigmoid(-z) (stay).
std::pair<Moments1d, Moments1d> tilted_moments(double m, double s) {
  constexpr double kSpan = 8.0;
  const double u0 = -m / s;
  std::vector<double> cuts{-kSpan, kSpan};
  for (double c : {u0 - 10.0 / s, u0, u0 + 10.0 / s}) {
    if (c > -kSpan && c < kSpan) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());

  const auto& gl = gauss_legendre();
  std::array<double, 3> leave{}, stay{};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double half = 0.5 * (cuts[i + 1] - cuts[i]);
    const double mid = 0.5 * (cuts[i + 1] + cuts[i]);
    if (half <= 0.0) continue;
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
      const double u = mid + half * gl.x[k];
      const double phi = std::exp(-0.5 * u * u) / std::sqrt(kTwoPi) * gl.w[k] * half;
      const double z = m + s * u;
      const double pl = sigmoid(z);
      const double ps = sigmoid(-z);
      leave[0] += phi * pl, leave[1] += phi * pl * z, leave[2] += phi * pl * z * z;
      stay[0] += phi * ps, stay[1] += phi * ps * z, stay[2] += phi * ps * z * z;
    }
  }
  auto finish = [&](const std::array<double, 3>& a) {
    Moments1d r;
    r.mass = a[0];
    if (a[0] <= 0.0) return Moments1d{0.0, m, s * s};
    r.mean = a[1] / a[0];
    r.var = std::max(a[2] / a[0] - r.mean * r.mean, 1e-12 * s * s);
    return r;
  };
  return {finish(leave), finish(stay)};
}

struct Weighted {
  double weight;
  StateVector mean;
  StateCovariance cov;
};

// Conditions a Gaussian on the scalar g.s having the given tilted moments.
Weighted retarget(const Weighted& c, const Eigen::Vector4d& g, double v, double m,
                  const Moments1d& tilted, double mass) {
  const Eigen::Vector4d sg = c.cov * g;
  Weighted out{mass, c.mean + sg * ((tilted.mean - m) / v), c.cov};
  out.cov += sg * sg.transpose() * ((tilted.var - v) / (v * v));
  symmetrize(out.cov);
  return out;
}

class Predictor {
 public:
  Predictor(const RoadGraph& graph, const FilterConfig& config)
      : graph_(graph),
        config_(config),
        a_(config.transition_matrix()),
        buckets_(graph.size()) {}

  void branch(SegmentId u, const Weighted& c, int hop) {
    const StreetSegment& seg = graph_.segment(u);
    const auto& next = seg.successors;
    if (next.empty() || hop >= config_.max_hops) {
      settle(u, c, next.empty());
      return;
    }
    const double lambda = config_.transition_sharpness;
    const Eigen::Vector4d g(2.0 / lambda, -1.0 / lambda, 0.0, 0.0);
    const double m = g.dot(c.mean) - seg.length / lambda;
    const double v = g.dot(c.cov * g);
    const double s = std::sqrt(std::max(v, 0.0));

    Weighted leave = c, stay = c;
    double p_leave;
    if (m + 8.0 * s < -30.0) {
      p_leave = 0.0;
    } else if (m - 8.0 * s > 30.0) {
      p_leave = 1.0;
    } else if (s < 1e-9) {
      p_leave = sigmoid(m);
    } else {
      const auto [lm, sm] = tilted_moments(m, s);
      p_leave = lm.mass;
      leave = retarget(c, g, v, m, lm, 0.0);
      stay = retarget(c, g, v, m, sm, 0.0);
    }
    if (p_leave < kNegligible) p_leave = 0.0;
    if (p_leave > 1.0 - kNegligible) p_leave = 1.0;

    if (p_leave < 1.0) {
      stay.weight = c.weight * (1.0 - p_leave);
      settle(u, stay, false);
    }
    if (p_leave > 0.0) {
      const double share = c.weight * p_leave / static_cast<double>(next.size());
      for (SegmentId w : next) {
        const AffineMap4 map = reparameterization(graph_, u, w);
        Weighted moved{share, map.apply(leave.mean), map.matrix * leave.cov * map.matrix.transpose()};
        symmetrize(moved.cov);
        branch(w, moved, hop + 1);
      }
    }
  }

  Posterior collect(double t) {
    Posterior out;
    out.t = t;
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
      auto& bucket = buckets_[i];
      if (bucket.empty()) continue;
      SegmentBelief belief;
      belief.u = segment_id(i);
      for (const auto& c : bucket) belief.weight += c.weight;
      if (!(belief.weight > 0.0)) continue;
      for (auto& c : bucket) belief.components.push_back({c.weight / belief.weight, c.mean, c.cov});
      out.segments.push_back(std::move(belief));
    }
    return out;
  }

 private:
  void settle(SegmentId u, const Weighted& c, bool dead_end) {
    Weighted p{c.weight, a_ * c.mean, a_ * c.cov * a_.transpose() + config_.process_noise};
    symmetrize(p.cov);
    if (dead_end) {
      const double l = graph_.segment(u).length;
      p.mean(0) = std::min(p.mean(0), l);
      p.mean(1) = std::min(p.mean(1), l);
    }
    buckets_[index_of(u)].push_back(std::move(p));
  }

  const RoadGraph& graph_;
  const FilterConfig& config_;
  Eigen::Matrix4d a_;
  std::vector<std::vector<Weighted>> buckets_;
};

double symmetric_mahalanobis(const GaussianComponent& a, const GaussianComponent& b) {
  const Eigen::Vector4d diff = a.mean - b.mean;
  const double da = diff.dot(a.cov.ldlt().solve(diff));
  const double db = diff.dot(b.cov.ldlt().solve(diff));
  return 0.5 * (da + db);
}

}  // namespace

const SegmentBelief* Posterior::find(SegmentId u) const noexcept {
  auto it = std::lower_bound(segments.begin(), segments.end(), u,
                             [](const SegmentBelief& b, SegmentId id) { return b.u < id; });
  return it != segments.end() && it->u == u ? &*it : nullptr;
}

double Posterior::total_weight() const noexcept {
  double total = 0.0;
  for (const auto& b : segments) total += b.weight;
  return total;
}

std::size_t Posterior::component_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : segments) n += b.components.size();
  return n;
}

StateCovariance FilterConfig::default_process_noise() {
  return Eigen::Vector4d(1.0, 1e-6, std::pow(deg2rad(2.0), 2), 1e-6).asDiagonal();
}

Eigen::Matrix4d FilterConfig::transition_matrix() const {
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a(0, 0) = 2.0, a(0, 1) = -1.0;
  a(1, 0) = 1.0;
  a(2, 2) = heading_decay + heading_velocity, a(2, 3) = -heading_velocity;
  a(3, 2) = 1.0;
  return a;
}

void FilterConfig::validate() const {
  if (max_components == 0) throw ConfigError("max_components must be positive");
  if (!(prune_weight >= 0.0)) throw ConfigError("prune_weight must be non-negative");
  if (!(merge_mahalanobis >= 0.0)) throw ConfigError("merge_mahalanobis must be non-negative");
  if (!(transition_sharpness > 0.0)) throw ConfigError("transition_sharpness must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(component_spacing > 0.0)) throw ConfigError("component_spacing must be positive");
  if (!(init_speed_sd > 0.0)) throw ConfigError("init_speed_sd must be positive");
  if (max_hops < 1) throw ConfigError("max_hops must be at least 1");
  if (!process_noise.allFinite() || !process_noise.isApprox(process_noise.transpose()) ||
      Eigen::LLT<StateCovariance>(process_noise).info() != Eigen::Success)
    throw ConfigError("process noise must be SPD");
}

Posterior init_uniform(const RoadGraph& graph, const FilterConfig& config) {
  if (graph.empty()) throw EmptyMapError("cannot initialise a filter on an empty map");
  config.validate();
  const double total = graph.total_length();
  const double q_theta = config.process_noise(2, 2);
  const double v0 = config.init_speed * config.dt;
  const double var_v = std::pow(config.init_speed_sd * config.dt, 2);

  Posterior post;
  for (const auto& seg : graph.segments()) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(seg.length / config.component_spacing - 1e-9)));
    const double cell = seg.length / static_cast<double>(n);
    const double var_d = std::pow(0.5 * cell, 2);
    SegmentBelief belief{seg.id, seg.length / total, {}};
    for (std::size_t k = 0; k < n; ++k) {
      GaussianComponent c;
      c.weight = 1.0 / static_cast<double>(n);
      const double d = (static_cast<double>(k) + 0.5) * cell;
      c.mean << d, d - v0, 0.0, 0.0;
      c.cov.setZero();
      c.cov(0, 0) = var_d;
      c.cov(0, 1) = c.cov(1, 0) = var_d;
      c.cov(1, 1) = var_d + var_v;
      c.cov(2, 2) = q_theta;
      c.cov(3, 3) = q_theta;
      belief.components.push_back(c);
    }
    post.segments.push_back(std::move(belief));
  }
  return post;
}

TransitionProbs street_transition_probs(const StateVector& mean, SegmentId u, const RoadGraph& graph,
                                        const FilterConfig& config) {
  const StreetSegment& seg = graph.segment(u);
  TransitionProbs probs;
  if (seg.successors.empty()) return probs;
  const double ahead = mean(0) + (mean(0) - mean(1));
  const double leave = sigmoid((ahead - seg.length) / config.transition_sharpness);
  probs.stay = 1.0 - leave;
  const double share = leave / static_cast<double>(seg.successors.size());
  for (SegmentId v : seg.successors) probs.successors.emplace_back(v, share);
  return probs;
}

Posterior predict(const Posterior& post, const RoadGraph& graph, const FilterConfig& config) {
  Predictor predictor(graph, config);
  for (const auto& belief : post.segments) {
    for (const auto& c : belief.components) {
      predictor.branch(belief.u, Weighted{belief.weight * c.weight, c.mean, c.cov}, 0);
    }
  }
  Posterior out = predictor.collect(post.t + config.dt);
  const double total = out.total_weight();
  if (total > 0.0) {
    for (auto& b : out.segments) b.weight /= total;
  }
  return out;
}

UpdateResult update(const Posterior& post, const ObservationFrame& y, const RoadGraph& graph,
                    const std::optional<SunPosition>& sun, const NoiseModel& nm) {
  const bool use_sun = y.phi && sun && sun->daytime();
  const double sun_var = nm.sun_variance;

  Posterior out;
  out.t = y.t;
  out.segments = post.segments;
  std::vector<double> log_w;
  log_w.reserve(post.component_count());

  for (auto& belief : out.segments) {
    const StreetSegment& seg = graph.segment(belief.u);
    const double log_seg = std::log(segment_likelihood(y, belief.u, graph, nm)) + std::log(belief.weight);
    std::optional<LinearSunObservation> h;
    if (use_sun) h = sun_observation_map(seg, *sun);
    const Eigen::Matrix<double, 2, 4> m = odometry_matrix(seg);
    const Eigen::Matrix2d& r = nm.odometry_covariance(seg.road_type);

    for (auto& c : belief.components) {
      double lw = log_seg + std::log(c.weight);
      if (h) {
        const Eigen::Vector4d ph = c.cov * h->h.transpose();
        const double s = h->h.dot(ph) + sun_var;
        const double innov = wrap_angle(*y.phi - h->predict(c.mean));
        c.mean += ph * (innov / s);
        c.cov -= ph * ph.transpose() / s;
        symmetrize(c.cov);
        lw += -0.5 * (innov * innov / s + std::log(kTwoPi * s));
      }
      if (y.odometry) {
        const Eigen::Matrix<double, 4, 2> pm = c.cov * m.transpose();
        const Eigen::Matrix2d s = m * pm + r;
        Eigen::Vector2d innov = Eigen::Vector2d(y.odometry->forward, y.odometry->heading_change) - m * c.mean;
        innov(1) = wrap_angle(innov(1));
        const Eigen::LLT<Eigen::Matrix2d> llt(s);
        const Eigen::Matrix<double, 4, 2> gain = llt.solve(pm.transpose()).transpose();
        c.mean += gain * innov;
        c.cov -= gain * pm.transpose();
        symmetrize(c.cov);
        const Eigen::Matrix2d l = llt.matrixL();
        const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
        lw += -0.5 * (innov.dot(llt.solve(innov)) + log_det) - std::log(kTwoPi);
      }
      log_w.push_back(lw);
    }
  }

  const double log_z = log_sum_exp(log_w);
  if (!(log_z >= kLogUnderflow)) {
    throw DivergenceError("posterior mass vanished at t=" + std::to_string(y.t));
  }
  std::size_t i = 0;
  for (auto& belief : out.segments) {
    double w = 0.0;
    for (auto& c : belief.components) {
      c.weight = std::exp(log_w[i++] - log_z);
      w += c.weight;
    }
    belief.weight = w;
    if (w > 0.0) {
      for (auto& c : belief.components) c.weight /= w;
    } else {
      for (auto& c : belief.components) c.weight = 1.0 / static_cast<double>(belief.components.size());
    }
  }
  std::erase_if(out.segments, [](const SegmentBelief& b) { return !(b.weight > 0.0); });
  return {std::move(out), log_z};
}

GaussianComponent moment_match(const std::vector<GaussianComponent>& components) {
  GaussianComponent out;
  double w = 0.0;
  out.mean.setZero();
  for (const auto& c : components) {
    w += c.weight;
    out.mean += c.weight * c.mean;
  }
  out.mean /= w;
  out.cov.setZero();
  for (const auto& c : components) {
    const Eigen::Vector4d diff = c.mean - out.mean;
    out.cov += c.weight * (c.cov + diff * diff.transpose());
  }
  out.cov /= w;
  symmetrize(out.cov);
  out.weight = w;
  return out;
}

Posterior merge_prune(const Posterior& post, const FilterConfig& config) {
  Posterior out;
  out.t = post.t;
  for (const auto& belief : post.segments) {
    std::vector<GaussianComponent> kept;
    for (const auto& c : belief.components) {
      if (c.weight * belief.weight >= config.prune_weight) kept.push_back(c);
    }
    if (kept.empty()) continue;
    std::stable_sort(kept.begin(), kept.end(),
                     [](const GaussianComponent& a, const GaussianComponent& b) { return a.weight > b.weight; });

    std::vector<GaussianComponent> merged;
    std::vector<bool> used(kept.size(), false);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (used[i]) continue;
      std::vector<GaussianComponent> group{kept[i]};
      used[i] = true;
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (!used[j] && symmetric_mahalanobis(kept[i], kept[j]) < config.merge_mahalanobis) {
          group.push_back(kept[j]);
          used[j] = true;
        }
      }
      merged.push_back(group.size() == 1 ? group.front() : moment_match(group));
    }
    std::stable_sort(merged.begin(), merged.end(),
                     [](const GaussianComponent& a, const GaussianComponent& b) { return a.weight > b.weight; });
    if (merged.size() > config.max_components) {
      std::vector<GaussianComponent> tail(merged.begin() + static_cast<std::ptrdiff_t>(config.max_components) - 1,
                                          merged.end());
      merged.resize(config.max_components - 1);
      merged.push_back(moment_match(tail));
    }

    SegmentBelief b{belief.u, 0.0, std::move(merged)};
    double mass = 0.0;
    for (const auto& c : b.components) mass += c.weight;
    for (auto& c : b.components) c.weight /= mass;
    b.weight = belief.weight * mass;
    out.segments.push_back(std::move(b));
  }
  const double total = out.total_weight();
  if (total > 0.0) {
    for (auto& b : out.segments) b.weight /= total;
  }
  return out;
}

UpdateResult step(const Posterior& post, const ObservationFrame& y, const RoadGraph& graph,
                  const std::optional<SunPosition>& sun, const NoiseModel& nm,
                  const FilterConfig& config) {
  UpdateResult r = update(predict(post, graph, config), y, graph, sun, nm);
  r.posterior = merge_prune(r.posterior, config);
  return r;
}

std::vector<double> street_marginals(const Posterior& post, std::size_t segment_count) {
  std::vector<double> out(segment_count, 0.0);
  for (const auto& b : post.segments) {
    if (index_of(b.u) < segment_count) out[index_of(b.u)] += b.weight;
  }
  return out;
}

double street_entropy(const Posterior& post) {
  double h = 0.0;
  for (const auto& b : post.segments) {
    if (b.weight > 0.0) h -= b.weight * std::log(b.weight);
  }
  return h;
}

Localizer::Localizer(const RoadGraph& graph, NoiseModel nm, FilterConfig config)
    : graph_(&graph), nm_(std::move(nm)), config_(std::move(config)) {
  nm_.validate();
  config_.validate();
  posterior_ = init_uniform(*graph_, config_);
}

std::optional<SunPosition> Localizer::sun_for(const ObservationFrame& y) const {
  if (!y.phi) return std::nullopt;
  const GeoPoint origin = graph_->frame_origin();
  return sun_position(y.t, origin.lat, origin.lon);
}

UpdateResult Localizer::process(const ObservationFrame& y) {
  const auto sun = sun_for(y);
  UpdateResult r;
  try {
    if (frames_ == 0) {
      r = update(posterior_, y, *graph_, sun, nm_);
      r.posterior = merge_prune(r.posterior, config_);
    } else {
      r = step(posterior_, y, *graph_, sun, nm_, config_);
    }
  } catch (const DivergenceError& e) {
    ++resets_;
    spdlog::warn("filter diverged ({}); resetting to uniform", e.what());
    Posterior fresh = init_uniform(*graph_, config_);
    try {
      r = update(fresh, y, *graph_, sun, nm_);
      r.posterior = merge_prune(r.posterior, config_);
    } catch (const DivergenceError&) {
      r = UpdateResult{std::move(fresh), kLogUnderflow};
    }
  }
  r.posterior.t = y.t;
  posterior_ = r.posterior;
  ++frames_;
  return r;
}

}  // namespace semloc
