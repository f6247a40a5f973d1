#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "semloc/road_map.hpp"

namespace semloc {

using OsmTags = std::map<std::string, std::string, std::less<>>;

struct OsmWay {
  std::int64_t id = 0;
  std::vector<std::int64_t> node_ids;
  OsmTags tags;
};

/// Nodes and drivable ways of an OpenStreetMap XML extract. Ordered by id so
/// downstream construction is deterministic.
struct OsmExtract {
  std::map<std::int64_t, GeoPoint> nodes;
  std::map<std::int64_t, OsmWay> ways;
};

struct IngestConfig {
  /// `highway` values considered drivable; `_link` variants are matched through their base value.
  std::vector<std::string> drivable{"motorway", "trunk", "primary", "secondary", "tertiary",
                                    "residential", "unclassified", "service", "living_street"};
  /// Speed used when `maxspeed` is missing or unparseable, keyed by base `highway` value (km/h).
  std::map<std::string, double, std::less<>> default_speeds{
      {"motorway", 100.0},   {"trunk", 100.0},        {"primary", 60.0},
      {"secondary", 50.0},   {"tertiary", 50.0},      {"residential", 30.0},
      {"living_street", 30.0}, {"service", 30.0},     {"unclassified", 30.0}};
  double fallback_speed = 30.0;
  bool allow_u_turns = false;
  PartitionOptions partition;
};

/// Parses the node/way/tag/nd subset of OSM XML, keeping only drivable ways.
/// Throws ParseError for malformed XML and ReferentialError when a drivable way
/// references a node absent from the extract.
OsmExtract parse_osm(std::string_view xml, const IngestConfig& config = {});

bool is_drivable(const OsmTags& tags, const IngestConfig& config = {});

/// trunk, trunk_link, motorway and motorway_link are highways; everything else is not.
RoadType classify_road_type(const OsmTags& tags);

/// Parses `maxspeed` (km/h, or "N mph"); falls back to the class default and
/// appends a warning when the tag is present but unparseable.
double resolve_speed_limit(const OsmTags& tags, RoadType type, const IngestConfig& config = {},
                           std::vector<std::string>* warnings = nullptr);

/// Splits ways into one linear segment per consecutive node pair (both directions
/// unless one-way), connects them at shared nodes and applies intersection
/// partitioning. Throws EmptyMapError when no drivable segment remains.
RoadGraph build_graph(const OsmExtract& extract, const IngestConfig& config = {},
                      std::vector<std::string>* warnings = nullptr);

}  // namespace semloc
