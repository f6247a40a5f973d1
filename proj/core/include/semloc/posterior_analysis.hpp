#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/mixture_filter.hpp"
#include "semloc/road_map.hpp"

namespace semloc {

/// Probability mass at a map location with the vehicle heading there.
struct WeightedPoint {
  Point2 position = Point2::Zero();
  double heading = 0.0;  // global, radians
  double mass = 0.0;
};

struct Mode {
  Point2 position = Point2::Zero();  // mass-weighted mean of the core members
  double heading = 0.0;              // circular mean of the core members
  double mass = 0.0;                 // total mass of all members
};

/// One point per mixture component at its mean (d may extrapolate past the segment ends).
std::vector<WeightedPoint> component_points(const Posterior& post, const RoadGraph& graph);

/// Greedy clustering: seed at the heaviest unassigned point, absorb everything
/// within `radius`, repeat. The location of a mode is averaged over members
/// within `core_radius` of its seed. Sorted by decreasing mass.
std::vector<Mode> cluster_modes(std::vector<WeightedPoint> points, double radius = 200.0,
                                double core_radius = 25.0);

std::vector<Mode> mode_analysis(const Posterior& post, const RoadGraph& graph, double radius = 200.0,
                                double core_radius = 25.0);

struct LocalizationCriterion {
  double dominance = 0.95;
  std::size_t window = 10;  // frames
};

/// True when every one of the last `window` entries is at least `dominance`.
bool is_localized(std::span<const double> top_mode_mass, const LocalizationCriterion& criterion = {});

/// Index of the first frame at which the criterion holds; later frames are
/// localized by latching. `correct` (optional, same length) additionally
/// requires the mode to be correct on every frame of the window.
std::optional<std::size_t> localization_frame(std::span<const double> top_mode_mass,
                                              const LocalizationCriterion& criterion = {},
                                              const std::vector<bool>& correct = {});

// ---------------------------------------------------------------------------
// Posterior dumps: t,segment_id,bin_start_m,mass

struct DumpRow {
  double t = 0.0;
  SegmentId u{};
  double bin_start = 0.0;
  double mass = 0.0;
};

/// Mass of each `bin` meter slice of every segment carrying weight. Mass
/// outside [0, length] is folded into the end bins. Rows below `min_mass` are omitted.
std::vector<DumpRow> posterior_bins(const Posterior& post, const RoadGraph& graph, double bin = 3.0,
                                    double min_mass = 0.0);

std::string dump_header();
std::string dump_rows_to_csv(std::span<const DumpRow> rows);
std::vector<DumpRow> dump_from_csv(std::string_view text);

/// Groups dump rows by frame time, preserving order of first appearance.
std::vector<std::vector<DumpRow>> split_frames(std::span<const DumpRow> rows);

/// Bin-centre points of one frame of a dump.
std::vector<WeightedPoint> bin_points(std::span<const DumpRow> frame, const RoadGraph& graph, double bin = 3.0);

}  // namespace semloc
