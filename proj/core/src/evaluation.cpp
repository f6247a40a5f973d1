#include "semloc/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "semloc/angles.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

double frame_dt(std::span<const FrameSummary> frames) {
  return frames.size() >= 2 ? frames[1].t - frames[0].t : 1.0;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{:.6g}", *v) : std::string("*");
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::vector<bool> correctness(std::span<const FrameSummary> frames, std::span<const GroundTruthFrame> gt,
                              double radius) {
  std::vector<bool> ok(frames.size(), false);
  for (std::size_t k = 0; k < frames.size() && k < gt.size(); ++k) {
    if (!frames[k].modes.empty())
      ok[k] = (frames[k].modes.front().position - gt[k].position).norm() <= radius;
  }
  return ok;
}

std::vector<double> top_masses(std::span<const FrameSummary> frames) {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.modes.empty() ? 0.0 : f.modes.front().mass);
  return out;
}

std::optional<std::size_t> first_localized(std::span<const FrameSummary> frames,
                                           std::span<const GroundTruthFrame> gt, const RunOptions& options,
                                           bool strict) {
  const auto masses = top_masses(frames);
  if (!strict) return localization_frame(masses, options.criterion);
  return localization_frame(masses, options.criterion, correctness(frames, gt, options.correctness_radius));
}

RunReport summarize(std::span<const FrameSummary> frames, std::span<const GroundTruthFrame> gt,
                    const RunOptions& options) {
  RunReport report;
  report.frames = frames.size();
  const bool strict = options.strict_correctness && !gt.empty();
  const auto first = first_localized(frames, gt, options, strict);
  const auto loose = first_localized(frames, gt, options, false);
  const double dt = frame_dt(frames);
  if (first) report.localization_time = frames[*first].t - frames.front().t + dt;
  if (loose) report.localization_time_loose = frames[*loose].t - frames.front().t + dt;
  report.localized = first.has_value();
  if (first && !gt.empty()) {
    if (const auto err = error_metrics(frames, gt, first)) {
      report.position_error = err->position;
      report.heading_error = err->heading;
    }
  }
  std::vector<double> times;
  std::vector<std::size_t> counts;
  double wall = 0.0;
  for (const auto& f : frames) {
    times.push_back(f.t);
    counts.push_back(f.bins_above);
    wall += f.wall_time;
  }
  report.gini = gini_index(times, counts);
  report.wall_time_per_frame = frames.empty() ? 0.0 : wall / static_cast<double>(frames.size());
  return report;
}

}  // namespace

CueSet CueSet::parse(std::string_view letters) {
  CueSet c = none();
  for (char ch : letters) {
    switch (ch) {
      case 'O': c.odometry = true; break;
      case 'S': c.sun = true; break;
      case 'I': c.intersection = true; break;
      case 'R': c.road_type = true; break;
      case 'V': c.velocity = true; break;
      default: throw ConfigError("unknown cue '" + std::string(1, ch) + "'; expected letters from OSIRV");
    }
  }
  return c;
}

std::string CueSet::to_string() const {
  std::string s;
  if (odometry) s += 'O';
  if (sun) s += 'S';
  if (intersection) s += 'I';
  if (road_type) s += 'R';
  if (velocity) s += 'V';
  return s;
}

ObservationFrame mask_cues(const ObservationFrame& y, const CueSet& cues) {
  ObservationFrame out = y;
  if (!cues.odometry) out.odometry.reset();
  if (!cues.sun) out.phi.reset();
  if (!cues.intersection) out.intersection.reset();
  if (!cues.road_type) out.road_type.reset();
  if (!cues.velocity) out.velocity.reset();
  return out;
}

std::optional<double> localization_time(std::span<const FrameSummary> frames,
                                        std::span<const GroundTruthFrame> gt, const RunOptions& options,
                                        bool strict) {
  const auto first = first_localized(frames, gt, options, strict);
  if (!first) return std::nullopt;
  return frames[*first].t - frames.front().t + frame_dt(frames);
}

double gini_index(std::span<const double> times, std::span<const std::size_t> counts) {
  if (times.size() != counts.size()) throw DomainError("times and counts differ in length");
  if (times.size() < 2) return 0.0;
  const double n0 = static_cast<double>(counts.front());
  double area_b = 0.0;
  double area_total = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double h = times[i + 1] - times[i];
    area_b += 0.5 * h * static_cast<double>(counts[i] + counts[i + 1]);
    area_total += h * n0;
  }
  if (!(area_total > 0.0)) return 0.0;
  return std::clamp((area_total - area_b) / area_total, 0.0, 1.0);
}

std::optional<ErrorMetrics> error_metrics(std::span<const FrameSummary> frames,
                                          std::span<const GroundTruthFrame> gt, std::optional<std::size_t> first) {
  if (!first) return std::nullopt;
  ErrorMetrics e;
  std::size_t n = 0;
  for (std::size_t k = *first; k < frames.size() && k < gt.size(); ++k) {
    if (frames[k].modes.empty()) continue;
    const Mode& m = frames[k].modes.front();
    e.position += (m.position - gt[k].position).norm();
    e.heading += rad2deg(std::abs(wrap_angle(m.heading - gt[k].heading)));
    ++n;
  }
  if (n == 0) return std::nullopt;
  e.position /= static_cast<double>(n);
  e.heading /= static_cast<double>(n);
  return e;
}

RunTrace run_filter(const RoadGraph& graph, std::span<const ObservationFrame> observations,
                    std::span<const GroundTruthFrame> gt, const NoiseModel& nm, const FilterConfig& config,
                    const CueSet& cues, const RunOptions& options) {
  RunTrace trace;
  Localizer localizer(graph, nm, config);
  trace.frames.reserve(observations.size());
  for (const auto& y : observations) {
    const auto start = std::chrono::steady_clock::now();
    const UpdateResult r = localizer.process(mask_cues(y, cues));
    const auto stop = std::chrono::steady_clock::now();

    FrameSummary f;
    f.t = y.t;
    f.wall_time = std::chrono::duration<double>(stop - start).count();
    f.log_likelihood = r.log_likelihood;
    f.modes = mode_analysis(r.posterior, graph, options.mode_radius);
    auto bins = posterior_bins(r.posterior, graph, options.bin, 1e-12);
    f.bins_above = static_cast<std::size_t>(std::count_if(
        bins.begin(), bins.end(), [&](const DumpRow& row) { return row.mass > options.gini_threshold; }));
    if (options.keep_dump) trace.dump.insert(trace.dump.end(), bins.begin(), bins.end());
    trace.frames.push_back(std::move(f));
  }
  trace.report = summarize(trace.frames, gt, options);
  trace.report.cues = cues.to_string();
  trace.report.resets = localizer.resets();
  return trace;
}

std::vector<RunTrace> run_ablation(const RoadGraph& graph, std::span<const ObservationFrame> observations,
                                   std::span<const GroundTruthFrame> gt, std::span<const CueSet> subsets,
                                   const NoiseModel& nm, const FilterConfig& config, const RunOptions& options) {
  std::vector<std::future<RunTrace>> jobs;
  jobs.reserve(subsets.size());
  for (const CueSet& cues : subsets) {
    jobs.push_back(std::async(std::launch::async, [&, cues] {
      return run_filter(graph, observations, gt, nm, config, cues, options);
    }));
  }
  std::vector<RunTrace> out;
  out.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      out.push_back(jobs[i].get());
    } catch (const std::exception& e) {
      RunTrace failed;
      failed.report.cues = subsets[i].to_string();
      failed.report.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

RunReport evaluate_dump(const RoadGraph& graph, std::span<const DumpRow> dump,
                        std::span<const GroundTruthFrame> gt, const RunOptions& options) {
  const auto grouped = split_frames(dump);
  std::map<double, std::size_t> gt_index;
  for (std::size_t k = 0; k < gt.size(); ++k) gt_index.emplace(gt[k].t, k);

  std::vector<FrameSummary> frames;
  std::vector<GroundTruthFrame> aligned;
  for (const auto& rows : grouped) {
    FrameSummary f;
    f.t = rows.front().t;
    f.modes = cluster_modes(bin_points(rows, graph, options.bin), options.mode_radius);
    f.bins_above = static_cast<std::size_t>(std::count_if(
        rows.begin(), rows.end(), [&](const DumpRow& r) { return r.mass > options.gini_threshold; }));
    if (!gt.empty()) {
      const auto it = gt_index.find(f.t);
      if (it == gt_index.end()) throw FormatError(fmt::format("no ground truth at t={}", f.t));
      aligned.push_back(gt[it->second]);
    }
    frames.push_back(std::move(f));
  }
  return summarize(frames, aligned, options);
}

std::string report_to_json(const RunReport& r) {
  nlohmann::json j{
      {"cues", r.cues},
      {"localized", r.localized},
      {"localization_time", optional_json(r.localization_time)},
      {"localization_time_loose", optional_json(r.localization_time_loose)},
      {"position_error_m", optional_json(r.position_error)},
      {"heading_error_deg", optional_json(r.heading_error)},
      {"gini", r.gini},
      {"wall_time_per_frame_s", r.wall_time_per_frame},
      {"frames", r.frames},
      {"resets", r.resets},
  };
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump(2);
}

std::string reports_to_table_csv(std::span<const RunReport> reports) {
  std::string out =
      "cues,localized,localization_time_s,position_error_m,heading_error_deg,gini,wall_time_per_frame_s,resets,error\n";
  for (const auto& r : reports) {
    out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{},{}\n", r.cues.empty() ? "-" : r.cues,
                       r.localized ? 1 : 0, format_optional(r.localization_time), format_optional(r.position_error),
                       format_optional(r.heading_error), r.gini, r.wall_time_per_frame, r.resets, r.error);
  }
  return out;
}

ScenarioData realize(const Scenario& scenario) { return realize(scenario, make_synthetic_map(scenario.kind, scenario.map)); }

ScenarioData realize(const Scenario& scenario, RoadGraph graph) {
  ScenarioData data{std::move(graph), {}, {}, {}};
  std::mt19937_64 rng(scenario.sim.seed * 7919 + 17);
  SegmentId start{};
  if (scenario.start_segment) {
    start = *scenario.start_segment;
    (void)data.graph.segment(start);
  } else {
    std::vector<SegmentId> candidates;
    for (const auto& s : data.graph.segments()) {
      if (!s.successors.empty()) candidates.push_back(s.id);
    }
    if (candidates.empty()) throw ConfigError("map has no drivable start segment");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    start = candidates[pick(rng)];
  }
  data.route = scenario.straight ? straight_route(data.graph, start, scenario.route_length)
                                 : random_route(data.graph, start, scenario.route_length, rng);
  const double first_length = data.graph.segment(start).length;
  const double start_d = std::clamp(scenario.start_d, 0.0, 0.999 * first_length);
  data.gt = simulate_drive(data.graph, data.route, scenario.sim, start_d);
  data.observations = emit_observations(data.gt, data.graph, scenario.sim);
  return data;
}

}  // namespace semloc
