#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/mixture_filter.hpp"
#include "semloc/observation_model.hpp"
#include "semloc/posterior_analysis.hpp"
#include "semloc/road_map.hpp"
#include "semloc/sim_harness.hpp"

namespace semloc {

/// Subset of the observation channels O (odometry), S (sun), I (intersection),
/// R (road type) and V (velocity).
struct CueSet {
  bool odometry = true;
  bool sun = true;
  bool intersection = true;
  bool road_type = true;
  bool velocity = true;

  /// Letters from "OSIRV" in any order; throws ConfigError on anything else.
  static CueSet parse(std::string_view letters);
  static CueSet all() { return {}; }
  static CueSet none() { return {false, false, false, false, false}; }
  [[nodiscard]] std::string to_string() const;
  bool operator==(const CueSet&) const = default;
};

ObservationFrame mask_cues(const ObservationFrame& y, const CueSet& cues);

struct RunOptions {
  LocalizationCriterion criterion{};
  double mode_radius = 200.0;
  double correctness_radius = 20.0;  // meters between the top mode and ground truth
  bool strict_correctness = true;
  double bin = 3.0;
  double gini_threshold = 0.0;  // bins with more mass count as alive
  bool keep_dump = false;
};

/// Per-frame summary of a posterior.
struct FrameSummary {
  double t = 0.0;
  std::vector<Mode> modes;  // sorted by mass
  std::size_t bins_above = 0;
  double wall_time = 0.0;
  double log_likelihood = 0.0;
};

struct RunReport {
  std::string cues;
  bool localized = false;
  std::optional<double> localization_time;  // seconds, "*" when absent
  std::optional<double> localization_time_loose;  // without the correctness requirement
  std::optional<double> position_error;  // meters, mean over localized frames
  std::optional<double> heading_error;   // degrees
  double gini = 0.0;
  double wall_time_per_frame = 0.0;
  std::size_t frames = 0;
  std::size_t resets = 0;
  std::string error;  // set when the run failed
};

struct RunTrace {
  RunReport report;
  std::vector<FrameSummary> frames;
  std::vector<DumpRow> dump;
};

/// Driving time at the first localized frame: t_k - t_0 + dt.
std::optional<double> localization_time(std::span<const FrameSummary> frames,
                                        std::span<const GroundTruthFrame> gt, const RunOptions& options,
                                        bool strict);

/// A / (A + B) over the per-frame count of bins above the threshold.
double gini_index(std::span<const double> times, std::span<const std::size_t> counts);

struct ErrorMetrics {
  double position = 0.0;  // meters
  double heading = 0.0;   // degrees
};

/// Mean top-mode error over frames from `first` on.
std::optional<ErrorMetrics> error_metrics(std::span<const FrameSummary> frames,
                                          std::span<const GroundTruthFrame> gt, std::optional<std::size_t> first);

/// Runs the filter over `observations` with the cues outside `cues` masked.
RunTrace run_filter(const RoadGraph& graph, std::span<const ObservationFrame> observations,
                    std::span<const GroundTruthFrame> gt, const NoiseModel& nm, const FilterConfig& config,
                    const CueSet& cues, const RunOptions& options = {});

/// One run per cue subset on identical observations; runs execute concurrently
/// and a failing run is reported rather than aborting the table.
std::vector<RunTrace> run_ablation(const RoadGraph& graph, std::span<const ObservationFrame> observations,
                                   std::span<const GroundTruthFrame> gt, std::span<const CueSet> subsets,
                                   const NoiseModel& nm, const FilterConfig& config,
                                   const RunOptions& options = {});

/// Recomputes a report from a posterior dump and ground truth.
RunReport evaluate_dump(const RoadGraph& graph, std::span<const DumpRow> dump,
                        std::span<const GroundTruthFrame> gt, const RunOptions& options = {});

std::string report_to_json(const RunReport& report);
std::string reports_to_table_csv(std::span<const RunReport> reports);

/// A reproducible simulated drive: map, route and noisy observations.
struct Scenario {
  MapKind kind = MapKind::grid;
  SyntheticMapParams map{};
  SimConfig sim{};
  double route_length = 3000.0;  // meters
  bool straight = false;         // follow the straightest successor instead of a random one
  std::optional<SegmentId> start_segment;
  double start_d = 0.0;
};

struct ScenarioData {
  RoadGraph graph;
  std::vector<SegmentId> route;
  std::vector<GroundTruthFrame> gt;
  std::vector<ObservationFrame> observations;
};

ScenarioData realize(const Scenario& scenario);
/// Same drive on a given map; `kind` and `map` of the scenario are ignored.
ScenarioData realize(const Scenario& scenario, RoadGraph graph);

}  // namespace semloc
