#pragma once

#include <optional>
#include <string_view>

#include "semloc/road_map.hpp"

namespace semloc {

/// UTC time as seconds since the Unix epoch.
using UtcSeconds = double;

/// Parses `YYYY-MM-DDThh:mm[:ss[.fff]]` with an optional `Z` or `+hh:mm` suffix.
UtcSeconds parse_iso8601(std::string_view text);

/// Horizontal sun coordinates: azimuth clockwise from true north, elevation above horizon.
struct SunPosition {
  double azimuth = 0.0;    // radians in [0, 2pi)
  double elevation = 0.0;  // radians in [-pi/2, pi/2]
  UtcSeconds timestamp = 0.0;

  [[nodiscard]] bool daytime() const noexcept { return elevation > 0.0; }
  /// Azimuth in the map frame: radians CCW from +x (east).
  [[nodiscard]] double map_azimuth() const noexcept;
};

/// Low-precision solar ephemeris (fractional year, declination, equation of
/// time); good to a few tenths of a degree between 1950 and 2050.
SunPosition sun_position(UtcSeconds utc, double lat_deg, double lon_deg);

/// Relative sun direction expected at `pose`: wrap(map azimuth - global heading).
/// 0 means straight ahead, +pi/2 to the left. Empty at night.
std::optional<double> predicted_relative_sun(const MapPose& pose, const RoadGraph& graph,
                                             const SunPosition& sun);

}  // namespace semloc
