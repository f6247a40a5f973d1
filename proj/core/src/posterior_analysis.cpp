#include "semloc/posterior_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "semloc/angles.hpp"
#include "semloc/csv.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::size_t bin_count(double length, double bin) {
  return static_cast<std::size_t>(std::max(1.0, std::ceil(length / bin - 1e-9)));
}

}  // namespace

std::vector<WeightedPoint> component_points(const Posterior& post, const RoadGraph& graph) {
  std::vector<WeightedPoint> points;
  points.reserve(post.component_count());
  for (const auto& b : post.segments) {
    const StreetSegment& seg = graph.segment(b.u);
    for (const auto& c : b.components) {
      const double d = c.mean(0);
      points.push_back({seg.point_at(d), wrap_angle(seg.heading_at(d) + c.mean(2)), b.weight * c.weight});
    }
  }
  return points;
}

std::vector<Mode> cluster_modes(std::vector<WeightedPoint> points, double radius, double core_radius) {
  std::stable_sort(points.begin(), points.end(),
                   [](const WeightedPoint& a, const WeightedPoint& b) { return a.mass > b.mass; });
  std::vector<bool> used(points.size(), false);
  std::vector<Mode> modes;
  const double r2 = radius * radius;
  const double c2 = core_radius * core_radius;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (used[i]) continue;
    const Point2 seed = points[i].position;
    Mode mode;
    Point2 acc = Point2::Zero();
    double core = 0.0, cs = 0.0, sn = 0.0;
    for (std::size_t j = i; j < points.size(); ++j) {
      const double dist2 = (points[j].position - seed).squaredNorm();
      if (used[j] || dist2 > r2) continue;
      used[j] = true;
      const auto& p = points[j];
      mode.mass += p.mass;
      if (dist2 > c2) continue;
      core += p.mass;
      acc += p.mass * p.position;
      cs += p.mass * std::cos(p.heading);
      sn += p.mass * std::sin(p.heading);
    }
    mode.position = core > 0.0 ? Point2(acc / core) : seed;
    mode.heading = core > 0.0 ? std::atan2(sn, cs) : points[i].heading;
    modes.push_back(mode);
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.mass > b.mass; });
  return modes;
}

std::vector<Mode> mode_analysis(const Posterior& post, const RoadGraph& graph, double radius, double core_radius) {
  return cluster_modes(component_points(post, graph), radius, core_radius);
}

bool is_localized(std::span<const double> top_mode_mass, const LocalizationCriterion& criterion) {
  if (criterion.window == 0 || top_mode_mass.size() < criterion.window) return false;
  const auto tail = top_mode_mass.subspan(top_mode_mass.size() - criterion.window);
  return std::all_of(tail.begin(), tail.end(), [&](double m) { return m >= criterion.dominance; });
}

std::optional<std::size_t> localization_frame(std::span<const double> top_mode_mass,
                                              const LocalizationCriterion& criterion,
                                              const std::vector<bool>& correct) {
  if (!correct.empty() && correct.size() != top_mode_mass.size())
    throw DomainError("correctness flags must match the mode history length");
  std::size_t run = 0;
  for (std::size_t i = 0; i < top_mode_mass.size(); ++i) {
    const bool ok = top_mode_mass[i] >= criterion.dominance && (correct.empty() || correct[i]);
    run = ok ? run + 1 : 0;
    if (criterion.window > 0 && run >= criterion.window) return i;
  }
  return std::nullopt;
}

std::vector<DumpRow> posterior_bins(const Posterior& post, const RoadGraph& graph, double bin,
                                    double min_mass) {
  if (!(bin > 0.0)) throw DomainError("bin width must be positive");
  std::vector<DumpRow> rows;
  std::vector<double> mass;
  for (const auto& b : post.segments) {
    const StreetSegment& seg = graph.segment(b.u);
    const std::size_t n = bin_count(seg.length, bin);
    mass.assign(n, 0.0);
    for (const auto& c : b.components) {
      const double w = b.weight * c.weight;
      const double sd = std::sqrt(std::max(c.cov(0, 0), 1e-18));
      double prev = 0.0;  // CDF at the lower edge, with the mass below 0 folded in
      for (std::size_t k = 0; k < n; ++k) {
        const double hi = k + 1 == n ? 1.0 : normal_cdf((static_cast<double>(k + 1) * bin - c.mean(0)) / sd);
        mass[k] += w * (hi - prev);
        prev = hi;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (mass[k] > 0.0 && mass[k] >= min_mass)
        rows.push_back({post.t, b.u, static_cast<double>(k) * bin, mass[k]});
    }
  }
  return rows;
}

std::string dump_header() { return "t,segment_id,bin_start_m,mass\n"; }

std::string dump_rows_to_csv(std::span<const DumpRow> rows) {
  std::string out;
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.t, index_of(r.u), r.bin_start, r.mass);
  return out;
}

std::vector<DumpRow> dump_from_csv(std::string_view text) {
  const CsvTable table = CsvTable::parse(text);
  const auto c_t = table.column("t"), c_u = table.column("segment_id");
  const auto c_b = table.column("bin_start_m"), c_m = table.column("mass");
  std::vector<DumpRow> rows;
  rows.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double u = table.required_number(r, c_u);
    if (u < 0.0 || u != std::floor(u)) throw FormatError("segment_id must be a non-negative integer");
    rows.push_back({table.required_number(r, c_t), segment_id(static_cast<std::size_t>(u)),
                    table.required_number(r, c_b), table.required_number(r, c_m)});
  }
  return rows;
}

std::vector<std::vector<DumpRow>> split_frames(std::span<const DumpRow> rows) {
  std::vector<std::vector<DumpRow>> frames;
  std::map<double, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, inserted] = index.try_emplace(r.t, frames.size());
    if (inserted) frames.emplace_back();
    frames[it->second].push_back(r);
  }
  return frames;
}

std::vector<WeightedPoint> bin_points(std::span<const DumpRow> frame, const RoadGraph& graph, double bin) {
  std::vector<WeightedPoint> points;
  points.reserve(frame.size());
  for (const auto& r : frame) {
    const StreetSegment& seg = graph.segment(r.u);
    const double d = std::min(r.bin_start + 0.5 * bin, 0.5 * (r.bin_start + seg.length));
    const double dc = std::clamp(d, 0.0, seg.length);
    points.push_back({seg.point_at(dc), wrap_angle(seg.heading_at(dc)), r.mass});
  }
  return points;
}

}  // namespace semloc
