#include "config.hpp"

#include <cmath>
#include <set>
#include <string>

#include <fmt/format.h>
#include <toml.hpp>

#include <semloc/angles.hpp>
#include <semloc/errors.hpp>
#include <semloc/road_graph_io.hpp>

namespace semloc::cli {
namespace {

void check_keys(const toml::table& table, std::string_view where, std::initializer_list<std::string_view> known) {
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, value] : table) {
    if (!allowed.contains(key.str())) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key.str()));
  }
}

template <typename T>
void read(const toml::table& table, std::string_view key, T& out) {
  const toml::node* node = table.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (auto v = node->value<std::int64_t>(); v && *v >= 0) {
      out = static_cast<T>(*v);
      return;
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = node->value<double>()) {
      out = *v;
      return;
    }
  } else {
    if (auto v = node->value<std::string>()) {
      out = *v;
      return;
    }
  }
  throw ConfigError(fmt::format("key '{}' has the wrong type", key));
}

const toml::table* subtable(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError(fmt::format("'{}' must be a table", name));
  return node->as_table();
}

toml::table parse_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return toml::parse(text, path.string());
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string(e.description()), static_cast<long>(e.source().begin.line),
                     static_cast<long>(e.source().begin.column));
  }
}

void read_map(const toml::table& t, SyntheticMapParams& p) {
  check_keys(t, "[map]",
             {"rows", "cols", "block", "jitter", "mixed_classes", "loop_width", "loop_height", "loop_connector",
              "corner_radius", "spokes", "spoke_length", "speed_limit", "seed", "lat", "lon"});
  read(t, "rows", p.rows);
  read(t, "cols", p.cols);
  read(t, "block", p.block);
  read(t, "jitter", p.jitter);
  read(t, "mixed_classes", p.mixed_classes);
  read(t, "loop_width", p.loop_width);
  read(t, "loop_height", p.loop_height);
  read(t, "loop_connector", p.loop_connector);
  read(t, "corner_radius", p.corner_radius);
  read(t, "spokes", p.spokes);
  read(t, "spoke_length", p.spoke_length);
  read(t, "speed_limit", p.speed_limit);
  read(t, "seed", p.seed);
  read(t, "lat", p.origin.lat);
  read(t, "lon", p.origin.lon);
}

void read_sim(const toml::table& t, SimConfig& sim) {
  check_keys(t, "[sim]",
             {"noiseless", "seed", "frame_rate", "odometry_sd_m", "odometry_sd_deg", "sun_sd_deg", "gamma", "beta",
              "speed_fraction", "max_accel", "heading_sd_deg", "sun", "sun_on", "sun_off", "lat", "lon", "start_utc"});
  bool noiseless = false;
  read(t, "noiseless", noiseless);
  if (noiseless) {
    const SimConfig keep = sim;
    sim = SimConfig::noiseless();
    sim.seed = keep.seed;
    sim.origin = keep.origin;
  }
  read(t, "seed", sim.seed);
  read(t, "frame_rate", sim.frame_rate);
  double sd_m = std::sqrt(sim.odometry_cov(0, 0));
  double sd_deg = rad2deg(std::sqrt(sim.odometry_cov(1, 1)));
  read(t, "odometry_sd_m", sd_m);
  read(t, "odometry_sd_deg", sd_deg);
  sim.odometry_cov = Eigen::Vector2d(sd_m * sd_m, std::pow(deg2rad(sd_deg), 2)).asDiagonal();
  double sun_sd = rad2deg(std::sqrt(sim.sun_variance));
  read(t, "sun_sd_deg", sun_sd);
  sim.sun_variance = std::pow(deg2rad(sun_sd), 2);
  read(t, "gamma", sim.gamma);
  read(t, "beta", sim.beta);
  read(t, "speed_fraction", sim.speed_fraction);
  read(t, "max_accel", sim.max_accel);
  double heading_sd = rad2deg(sim.heading_sd);
  read(t, "heading_sd_deg", heading_sd);
  sim.heading_sd = deg2rad(heading_sd);
  std::string sun;
  read(t, "sun", sun);
  if (sun == "always") sim.sun = SunAvailability::always;
  else if (sun == "never") sim.sun = SunAvailability::never;
  else if (sun == "schedule") sim.sun = SunAvailability::schedule;
  else if (!sun.empty()) throw ConfigError(fmt::format("[sim] sun must be always, never or schedule, not '{}'", sun));
  read(t, "sun_on", sim.sun_on);
  read(t, "sun_off", sim.sun_off);
  read(t, "lat", sim.origin.lat);
  read(t, "lon", sim.origin.lon);
  std::string start;
  read(t, "start_utc", start);
  if (!start.empty()) sim.start_utc = parse_iso8601(start);
}

void read_route(const toml::table& t, Scenario& sc) {
  check_keys(t, "[route]", {"length", "straight", "start_segment", "start_d"});
  read(t, "length", sc.route_length);
  read(t, "straight", sc.straight);
  if (t.contains("start_segment")) {
    std::size_t id = 0;
    read(t, "start_segment", id);
    sc.start_segment = segment_id(id);
  }
  read(t, "start_d", sc.start_d);
}

}  // namespace

ScenarioFile load_scenario(const std::filesystem::path& path) {
  const toml::table root = parse_file(path);
  check_keys(root, path.filename().string(), {"kind", "seeds", "cues", "map", "sim", "route"});
  ScenarioFile out;
  std::string kind;
  read(root, "kind", kind);
  if (!kind.empty()) out.scenario.kind = map_kind_from_string(kind);
  if (const auto* t = subtable(root, "map")) read_map(*t, out.scenario.map);
  if (const auto* t = subtable(root, "sim")) read_sim(*t, out.scenario.sim);
  if (const auto* t = subtable(root, "route")) read_route(*t, out.scenario);
  out.scenario.sim.validate();

  if (const toml::node* seeds = root.get("seeds")) {
    if (auto n = seeds->value<std::int64_t>(); n && *n > 0) {
      for (std::int64_t s = 1; s <= *n; ++s) out.seeds.push_back(static_cast<std::uint64_t>(s));
    } else if (const auto* list = seeds->as_array()) {
      for (const auto& v : *list) {
        auto s = v.value<std::int64_t>();
        if (!s || *s < 0) throw ConfigError("seeds must be non-negative integers");
        out.seeds.push_back(static_cast<std::uint64_t>(*s));
      }
    } else {
      throw ConfigError("seeds must be a positive count or a list of integers");
    }
  }
  if (const toml::node* cues = root.get("cues")) {
    const auto* list = cues->as_array();
    if (!list) throw ConfigError("cues must be a list of strings");
    for (const auto& v : *list) {
      auto s = v.value<std::string>();
      if (!s) throw ConfigError("cues must be a list of strings");
      out.cues.push_back(CueSet::parse(*s));
    }
  }
  return out;
}

IngestConfig load_ingest_config(const std::filesystem::path& path) {
  const toml::table root = parse_file(path);
  check_keys(root, path.filename().string(), {"drivable", "fallback", "allow_u_turns", "speeds"});
  IngestConfig config;
  if (const toml::node* drivable = root.get("drivable")) {
    const auto* list = drivable->as_array();
    if (!list) throw ConfigError("drivable must be a list of highway values");
    config.drivable.clear();
    for (const auto& v : *list) {
      auto s = v.value<std::string>();
      if (!s) throw ConfigError("drivable must be a list of highway values");
      config.drivable.push_back(*s);
    }
  }
  read(root, "fallback", config.fallback_speed);
  read(root, "allow_u_turns", config.allow_u_turns);
  if (const auto* speeds = subtable(root, "speeds")) {
    for (const auto& [key, value] : *speeds) {
      auto v = value.value<double>();
      if (!v || !(*v > 0.0)) throw ConfigError(fmt::format("[speeds] {} must be a positive number", key.str()));
      config.default_speeds[std::string(key.str())] = *v;
    }
  }
  if (!(config.fallback_speed > 0.0)) throw ConfigError("fallback must be positive");
  return config;
}

}  // namespace semloc::cli
