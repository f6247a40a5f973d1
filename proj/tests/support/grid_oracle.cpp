#include "grid_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <semloc/angles.hpp>

namespace semloc::testing {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double normal_pdf(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(kTwoPi * var); }

struct Outcome {
  SegmentId u{};
  double d = 0.0;
  double turn = 0.0;
  double p = 0.0;
};

}  // namespace

GridOracle::GridOracle(const RoadGraph& graph, const NoiseModel& nm, const FilterConfig& config)
    : GridOracle(graph, nm, config, Options{}) {}

GridOracle::GridOracle(const RoadGraph& graph, const NoiseModel& nm, const FilterConfig& config, Options options)
    : graph_(graph), nm_(nm), config_(config), options_(options) {
  for (const auto& s : graph.segments()) {
    if (s.is_arc()) throw std::invalid_argument("grid oracle supports straight segments only");
  }
  if (!nm.odometry_city.isApprox(nm.odometry_highway) || nm.odometry_city(0, 1) != 0.0)
    throw std::invalid_argument("grid oracle needs one diagonal odometry covariance");

  const int half = static_cast<int>(std::lround(options_.theta_span / options_.theta_step));
  const double q_theta = config_.process_noise(2, 2);
  double norm = 0.0;
  for (int i = -half; i <= half; ++i) {
    thetas_.push_back(i * options_.theta_step);
    theta_prior_.push_back(normal_pdf(thetas_.back(), q_theta));
    norm += theta_prior_.back();
  }
  for (double& p : theta_prior_) p /= norm;

  const Posterior init = init_uniform(graph, config);
  const std::size_t nt = thetas_.size();
  grids_.resize(graph.size());
  for (const auto& seg : graph.segments()) {
    Grid& g = grids_[index_of(seg.id)];
    g.bins = static_cast<int>(std::ceil((seg.length + 2.0 * options_.margin) / options_.cell));
    g.mass.assign(static_cast<std::size_t>(g.bins) * nt, 0.0);
  }
  for (const auto& belief : init.segments) {
    Grid& g = grids_[index_of(belief.u)];
    for (int j = 0; j < g.bins; ++j) {
      double density = 0.0;
      for (const auto& c : belief.components) density += c.weight * normal_pdf(position(j) - c.mean(0), c.cov(0, 0));
      const double m = belief.weight * density * options_.cell;
      for (std::size_t i = 0; i < nt; ++i) g.mass[static_cast<std::size_t>(j) * nt + i] = m * theta_prior_[i];
    }
  }
  v_mean_ = config_.init_speed * config_.dt;
  v_var_ = std::pow(config_.init_speed_sd * config_.dt, 2);
}

double GridOracle::position(int j) const noexcept {
  return -options_.margin + (j + 0.5) * options_.cell + offset_;
}

void GridOracle::deposit(std::vector<Grid>& out, SegmentId u, double d, const std::vector<double>& theta_mass) {
  Grid& g = out[index_of(u)];
  const double f = (d - offset_ + options_.margin) / options_.cell - 0.5;
  int j0 = static_cast<int>(std::floor(f));
  double frac = f - j0;
  if (j0 < 0) j0 = 0, frac = 0.0;
  if (j0 >= g.bins - 1) j0 = g.bins - 1, frac = 0.0;
  const std::size_t nt = thetas_.size();
  for (std::size_t i = 0; i < nt; ++i) {
    g.mass[static_cast<std::size_t>(j0) * nt + i] += (1.0 - frac) * theta_mass[i];
    if (frac > 0.0) g.mass[static_cast<std::size_t>(j0 + 1) * nt + i] += frac * theta_mass[i];
  }
}

double GridOracle::leave_probability(double x) const {
  const double lambda = config_.transition_sharpness;
  if (v_pre_var_ < 1e-12) return sigmoid((x + v_pre_mean_) / lambda);
  // Midpoint rule over +-7 sd of the pre-motion velocity.
  constexpr int n = 56;
  const double sd = std::sqrt(v_pre_var_);
  const double h = 14.0 / n;
  double acc = 0.0, wsum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = -7.0 + (k + 0.5) * h;
    const double w = std::exp(-0.5 * z * z);
    acc += w * sigmoid((x + v_pre_mean_ + sd * z) / lambda);
    wsum += w;
  }
  return acc / wsum;
}

void GridOracle::predict(const ObservationFrame& y) {
  const double q = config_.process_noise(0, 0) + config_.process_noise(1, 1);
  double v_next_mean = v_mean_, v_next_var = v_var_ + q;
  v_pre_mean_ = v_mean_;
  v_pre_var_ = v_var_;
  if (y.odometry) {
    const double r = nm_.odometry_city(0, 0);
    const double s = v_var_ + q + r;
    const double innov = y.odometry->forward - v_mean_;
    v_pre_mean_ = v_mean_ + v_var_ / s * innov;
    v_pre_var_ = v_var_ - v_var_ * v_var_ / s;
    v_next_mean = v_mean_ + (v_var_ + q) / s * innov;
    v_next_var = (v_var_ + q) - (v_var_ + q) * (v_var_ + q) / s;
  }

  const std::size_t nt = thetas_.size();
  const double r_theta = nm_.odometry_city(1, 1);
  std::map<long, std::vector<double>> kernels;  // keyed by turn in micro-radians
  auto kernel = [&](double turn) -> const std::vector<double>& {
    const long key = std::lround(turn * 1e6);
    auto it = kernels.find(key);
    if (it != kernels.end()) return it->second;
    std::vector<double> k(nt * nt);
    for (std::size_t a = 0; a < nt; ++a) {    // new theta
      for (std::size_t b = 0; b < nt; ++b) {  // previous theta
        double w = theta_prior_[a];
        if (y.odometry) {
          const double pred = thetas_[a] - thetas_[b] - turn;
          w *= normal_pdf(wrap_angle(y.odometry->heading_change - pred), r_theta);
        }
        k[a * nt + b] = w;
      }
    }
    return kernels.emplace(key, std::move(k)).first->second;
  };

  std::vector<Grid> out = grids_;
  for (auto& g : out) std::fill(g.mass.begin(), g.mass.end(), 0.0);

  std::vector<Outcome> outcomes;
  std::vector<double> mixed(nt);
  for (const auto& seg : graph_.segments()) {
    const Grid& g = grids_[index_of(seg.id)];
    for (int j = 0; j < g.bins; ++j) {
      const double* src = &g.mass[static_cast<std::size_t>(j) * nt];
      double total = 0.0;
      for (std::size_t i = 0; i < nt; ++i) total += src[i];
      if (!(total > 1e-300)) continue;

      outcomes.clear();
      // Depth-first over stay / leave branches, mirroring the filter's hop limit.
      struct Frame {
        SegmentId u;
        double d, turn, p;
        int hop;
      };
      std::vector<Frame> stack{{seg.id, position(j), 0.0, 1.0, 0}};
      while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        const StreetSegment& s = graph_.segment(f.u);
        if (s.successors.empty() || f.hop >= config_.max_hops) {
          outcomes.push_back({f.u, f.d, f.turn, f.p});
          continue;
        }
        const double pl = leave_probability(f.d - s.length);
        if (pl < 1.0) outcomes.push_back({f.u, f.d, f.turn, f.p * (1.0 - pl)});
        if (pl > 0.0) {
          const double share = f.p * pl / static_cast<double>(s.successors.size());
          for (SegmentId w : s.successors) {
            const AffineMap4 map = reparameterization(graph_, f.u, w);
            stack.push_back({w, f.d - s.length, f.turn + map.offset(2), share, f.hop + 1});
          }
        }
      }
      for (const auto& o : outcomes) {
        if (!(o.p > 0.0)) continue;
        const auto& k = kernel(o.turn);
        for (std::size_t a = 0; a < nt; ++a) {
          double acc = 0.0;
          for (std::size_t b = 0; b < nt; ++b) acc += k[a * nt + b] * src[b];
          mixed[a] = o.p * acc;
        }
        deposit(out, o.u, o.d, mixed);
      }
    }
  }

  // Common motion: every cell advances by the posterior velocity.
  offset_ += v_next_mean;
  const int shift = static_cast<int>(std::floor(offset_ / options_.cell));
  offset_ -= shift * options_.cell;
  for (auto& g : out) {
    std::vector<double> moved(g.mass.size(), 0.0);
    for (int j = 0; j < g.bins; ++j) {
      const int to = std::clamp(j + shift, 0, g.bins - 1);
      for (std::size_t i = 0; i < nt; ++i)
        moved[static_cast<std::size_t>(to) * nt + i] += g.mass[static_cast<std::size_t>(j) * nt + i];
    }
    g.mass = std::move(moved);
  }
  grids_ = std::move(out);
  v_mean_ = v_next_mean;
  v_var_ = v_next_var;
}

void GridOracle::update(const ObservationFrame& y) {
  std::optional<SunPosition> sun;
  if (y.phi) {
    const GeoPoint o = graph_.frame_origin();
    sun = sun_position(y.t, o.lat, o.lon);
    if (!sun->daytime()) sun.reset();
  }
  const std::size_t nt = thetas_.size();
  double total = 0.0;
  for (const auto& seg : graph_.segments()) {
    Grid& g = grids_[index_of(seg.id)];
    const double lik = segment_likelihood(y, seg.id, graph_, nm_);
    std::vector<double> sun_lik(nt, 1.0);
    if (sun) {
      const LinearSunObservation h = sun_observation_map(seg, *sun);
      for (std::size_t i = 0; i < nt; ++i) {
        const StateVector s(0.0, 0.0, thetas_[i], 0.0);
        sun_lik[i] = normal_pdf(wrap_angle(*y.phi - h.predict(s)), nm_.sun_variance);
      }
    }
    for (int j = 0; j < g.bins; ++j) {
      for (std::size_t i = 0; i < nt; ++i) {
        double& m = g.mass[static_cast<std::size_t>(j) * nt + i];
        m *= lik * sun_lik[i];
        total += m;
      }
    }
  }
  if (!(total > 0.0)) throw std::runtime_error("grid oracle lost all mass");
  for (auto& g : grids_) {
    for (double& m : g.mass) m /= total;
  }
}

void GridOracle::process(const ObservationFrame& y) {
  if (started_) predict(y);
  update(y);
  started_ = true;
}

std::vector<double> GridOracle::street_marginals() const {
  std::vector<double> out(grids_.size(), 0.0);
  for (std::size_t u = 0; u < grids_.size(); ++u) {
    for (double m : grids_[u].mass) out[u] += m;
  }
  return out;
}

}  // namespace semloc::testing
