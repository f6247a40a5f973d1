#include "semloc/solar_compass.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "semloc/angles.hpp"
#include "semloc/errors.hpp"

namespace semloc {

namespace {

constexpr double kSecondsPerDay = 86400.0;

struct CivilTime {
  int year;
  unsigned day_of_year;  // 1-based
  double seconds_of_day;
  bool leap;
};

CivilTime to_civil(UtcSeconds utc) {
  using namespace std::chrono;
  const double days_floor = std::floor(utc / kSecondsPerDay);
  const sys_days day{days{static_cast<int>(days_floor)}};
  const year_month_day ymd{day};
  const sys_days jan1{ymd.year() / January / 1};
  return {static_cast<int>(ymd.year()),
          static_cast<unsigned>((day - jan1).count()) + 1U,
          utc - days_floor * kSecondsPerDay, ymd.year().is_leap()};
}

}  // namespace

UtcSeconds parse_iso8601(std::string_view text) {
  const std::string s(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d%n", &y, &mo, &d, &h, &mi, &consumed) != 5)
    throw FormatError("invalid ISO-8601 time '" + s + "'");
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == ':') {
    int n = 0;
    if (std::sscanf(s.c_str() + pos + 1, "%lf%n", &sec, &n) != 1)
      throw FormatError("invalid seconds in '" + s + "'");
    pos += 1 + static_cast<std::size_t>(n);
  }
  double offset_minutes = 0.0;
  if (pos < s.size()) {
    const char sign = s[pos];
    int oh = 0, om = 0;
    if (sign == 'Z' && pos + 1 == s.size()) {
    } else if ((sign == '+' || sign == '-') &&
               std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &oh, &om) == 2) {
      offset_minutes = (sign == '+' ? 1.0 : -1.0) * (oh * 60.0 + om);
    } else {
      throw FormatError("invalid zone suffix in '" + s + "'");
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec < 0.0 || sec >= 61.0)
    throw FormatError("out-of-range field in '" + s + "'");
  const double days_since_epoch = static_cast<double>(sys_days{ymd}.time_since_epoch().count());
  return days_since_epoch * kSecondsPerDay + h * 3600.0 + mi * 60.0 + sec - offset_minutes * 60.0;
}

double SunPosition::map_azimuth() const noexcept { return wrap_angle(kPi / 2.0 - azimuth); }

SunPosition sun_position(UtcSeconds utc, double lat_deg, double lon_deg) {
  if (!(std::abs(lat_deg) <= 90.0) || !(std::abs(lon_deg) <= 180.0))
    throw DomainError("latitude/longitude out of range");
  const CivilTime civil = to_civil(utc);
  if (civil.year < 1950 || civil.year > 2050) throw DomainError("timestamp outside 1950-2050");

  const double hours = civil.seconds_of_day / 3600.0;
  const double year_days = civil.leap ? 366.0 : 365.0;
  const double g = kTwoPi / year_days * (civil.day_of_year - 1.0 + (hours - 12.0) / 24.0);

  const double eqtime_min =
      229.18 * (0.000075 + 0.001868 * std::cos(g) - 0.032077 * std::sin(g) -
                0.014615 * std::cos(2 * g) - 0.040849 * std::sin(2 * g));
  const double decl = 0.006918 - 0.399912 * std::cos(g) + 0.070257 * std::sin(g) -
                      0.006758 * std::cos(2 * g) + 0.000907 * std::sin(2 * g) -
                      0.002697 * std::cos(3 * g) + 0.00148 * std::sin(3 * g);

  const double true_solar_min = hours * 60.0 + eqtime_min + 4.0 * lon_deg;
  const double hour_angle = deg2rad(true_solar_min / 4.0 - 180.0);
  const double lat = deg2rad(lat_deg);

  // Sun direction in local east-north-up coordinates.
  const double east = -std::cos(decl) * std::sin(hour_angle);
  const double north = std::sin(decl) * std::cos(lat) - std::cos(decl) * std::sin(lat) * std::cos(hour_angle);
  const double up = std::sin(decl) * std::sin(lat) + std::cos(decl) * std::cos(lat) * std::cos(hour_angle);

  SunPosition sun;
  sun.azimuth = wrap_positive(std::atan2(east, north));
  sun.elevation = std::asin(std::clamp(up, -1.0, 1.0));
  sun.timestamp = utc;
  return sun;
}

std::optional<double> predicted_relative_sun(const MapPose& pose, const RoadGraph& graph,
                                             const SunPosition& sun) {
  if (!sun.daytime()) return std::nullopt;
  return wrap_angle(sun.map_azimuth() - global_heading(pose, graph));
}

}  // namespace semloc
