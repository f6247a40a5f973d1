#include "semloc/osm_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <optional>

#include <expat.h>

#include "semloc/errors.hpp"

namespace semloc {

namespace {

constexpr double kKmPerMile = 1.609;

std::string_view base_highway(std::string_view value) {
  constexpr std::string_view kLink = "_link";
  if (value.size() > kLink.size() && value.ends_with(kLink)) value.remove_suffix(kLink.size());
  return value;
}

std::optional<std::string_view> tag(const OsmTags& tags, std::string_view key) {
  auto it = tags.find(key);
  if (it == tags.end()) return std::nullopt;
  return std::string_view(it->second);
}

const char* attribute(const XML_Char** attrs, std::string_view name) {
  for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
    if (name == attrs[i]) return attrs[i + 1];
  }
  return nullptr;
}

struct ParserState {
  XML_Parser parser = nullptr;
  const IngestConfig* config = nullptr;
  OsmExtract extract;
  std::vector<OsmWay> pending_ways;
  std::optional<OsmWay> current_way;
  std::optional<std::string> error;
  long error_line = 0;
  long error_column = 0;

  void fail(const std::string& message) {
    if (error) return;
    error = message;
    error_line = static_cast<long>(XML_GetCurrentLineNumber(parser));
    error_column = static_cast<long>(XML_GetCurrentColumnNumber(parser));
    XML_StopParser(parser, XML_FALSE);
  }
};

template <typename T>
bool parse_number(const char* text, T& out) {
  if (text == nullptr) return false;
  const char* end = text + std::char_traits<char>::length(text);
  auto [ptr, ec] = std::from_chars(text, end, out);
  return ec == std::errc() && ptr == end;
}

void on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto& state = *static_cast<ParserState*>(user);
  const std::string_view element(name);
  if (element == "node") {
    std::int64_t id = 0;
    GeoPoint p;
    if (!parse_number(attribute(attrs, "id"), id) || !parse_number(attribute(attrs, "lat"), p.lat) ||
        !parse_number(attribute(attrs, "lon"), p.lon)) {
      state.fail("node requires numeric id, lat and lon");
      return;
    }
    state.extract.nodes[id] = p;
  } else if (element == "way") {
    OsmWay way;
    if (!parse_number(attribute(attrs, "id"), way.id)) {
      state.fail("way requires a numeric id");
      return;
    }
    state.current_way = std::move(way);
  } else if (element == "nd" && state.current_way) {
    std::int64_t ref = 0;
    if (!parse_number(attribute(attrs, "ref"), ref)) {
      state.fail("nd requires a numeric ref");
      return;
    }
    state.current_way->node_ids.push_back(ref);
  } else if (element == "tag" && state.current_way) {
    const char* k = attribute(attrs, "k");
    const char* v = attribute(attrs, "v");
    if (k == nullptr || v == nullptr) {
      state.fail("tag requires k and v");
      return;
    }
    state.current_way->tags.insert_or_assign(k, v);
  }
}

void on_end(void* user, const XML_Char* name) {
  auto& state = *static_cast<ParserState*>(user);
  if (std::string_view(name) == "way" && state.current_way) {
    if (is_drivable(state.current_way->tags, *state.config))
      state.pending_ways.push_back(std::move(*state.current_way));
    state.current_way.reset();
  }
}

}  // namespace

bool is_drivable(const OsmTags& tags, const IngestConfig& config) {
  const auto highway = tag(tags, "highway");
  if (!highway) return false;
  const std::string_view base = base_highway(*highway);
  return std::find(config.drivable.begin(), config.drivable.end(), base) != config.drivable.end();
}

OsmExtract parse_osm(std::string_view xml, const IngestConfig& config) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate(nullptr), &XML_ParserFree);
  if (!parser) throw ParseError("cannot create XML parser", 0, 0);

  ParserState state;
  state.parser = parser.get();
  state.config = &config;
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), &on_start, &on_end);

  const auto status = XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE);
  if (state.error) throw ParseError(*state.error, state.error_line, state.error_column);
  if (status != XML_STATUS_OK) {
    throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())),
                     static_cast<long>(XML_GetCurrentLineNumber(parser.get())),
                     static_cast<long>(XML_GetCurrentColumnNumber(parser.get())));
  }

  for (auto& way : state.pending_ways) {
    std::vector<std::int64_t> missing;
    for (std::int64_t ref : way.node_ids) {
      if (!state.extract.nodes.contains(ref)) missing.push_back(ref);
    }
    if (!missing.empty()) {
      std::string message = "way " + std::to_string(way.id) + " references missing node(s)";
      for (std::int64_t ref : missing) message += " " + std::to_string(ref);
      throw ReferentialError(message);
    }
    const std::int64_t id = way.id;
    state.extract.ways.insert_or_assign(id, std::move(way));
  }
  return std::move(state.extract);
}

RoadType classify_road_type(const OsmTags& tags) {
  const auto highway = tag(tags, "highway");
  if (!highway) return RoadType::non_highway;
  static constexpr std::string_view kHighways[] = {"trunk", "trunk_link", "motorway", "motorway_link"};
  return std::find(std::begin(kHighways), std::end(kHighways), *highway) != std::end(kHighways)
             ? RoadType::highway
             : RoadType::non_highway;
}

double resolve_speed_limit(const OsmTags& tags, RoadType type, const IngestConfig& config,
                           std::vector<std::string>* warnings) {
  auto class_default = [&] {
    if (const auto highway = tag(tags, "highway")) {
      auto it = config.default_speeds.find(base_highway(*highway));
      if (it != config.default_speeds.end()) return it->second;
    }
    if (type == RoadType::highway) {
      auto it = config.default_speeds.find("motorway");
      if (it != config.default_speeds.end()) return it->second;
    }
    return config.fallback_speed;
  };

  const auto maxspeed = tag(tags, "maxspeed");
  if (!maxspeed) return class_default();

  std::string_view text = *maxspeed;
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  std::string_view unit(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
  while (!unit.empty() && unit.front() == ' ') unit.remove_prefix(1);
  while (!unit.empty() && unit.back() == ' ') unit.remove_suffix(1);

  if (ec == std::errc() && value > 0.0) {
    if (unit.empty() || unit == "km/h" || unit == "kmh" || unit == "kph") return value;
    if (unit == "mph") return value * kKmPerMile;
  }
  if (warnings != nullptr)
    warnings->push_back("unparseable maxspeed '" + std::string(*maxspeed) + "', using class default");
  return class_default();
}

RoadGraph build_graph(const OsmExtract& extract, const IngestConfig& config,
                      std::vector<std::string>* warnings) {
  // Frame origin at the bounding-box center of the nodes used by drivable ways.
  double min_lat = 90.0, max_lat = -90.0, min_lon = 180.0, max_lon = -180.0;
  for (const auto& [id, way] : extract.ways) {
    for (std::int64_t ref : way.node_ids) {
      const GeoPoint& p = extract.nodes.at(ref);
      min_lat = std::min(min_lat, p.lat);
      max_lat = std::max(max_lat, p.lat);
      min_lon = std::min(min_lon, p.lon);
      max_lon = std::max(max_lon, p.lon);
    }
  }
  const GeoPoint origin{0.5 * (min_lat + max_lat), 0.5 * (min_lon + max_lon)};
  const LocalFrame frame(origin);

  std::vector<StreetSegment> segments;
  for (const auto& [id, way] : extract.ways) {
    if (!is_drivable(way.tags, config)) continue;
    const RoadType type = classify_road_type(way.tags);
    const double speed = resolve_speed_limit(way.tags, type, config, warnings);
    const auto oneway = tag(way.tags, "oneway");
    const bool forward_only = oneway && (*oneway == "yes" || *oneway == "true" || *oneway == "1");
    const bool backward_only = oneway && *oneway == "-1";
    for (std::size_t k = 0; k + 1 < way.node_ids.size(); ++k) {
      const Point2 a = frame.project(extract.nodes.at(way.node_ids[k]));
      const Point2 b = frame.project(extract.nodes.at(way.node_ids[k + 1]));
      if ((b - a).norm() <= 1e-6) continue;
      if (!backward_only) segments.push_back(make_line_segment(a, b, speed, type));
      if (!forward_only) segments.push_back(make_line_segment(b, a, speed, type));
    }
  }
  if (segments.empty()) throw EmptyMapError("extract contains no drivable road segments");

  ConnectOptions connect;
  connect.allow_u_turns = config.allow_u_turns;
  return partition_for_intersections(connect_segments(std::move(segments), origin, connect),
                                     config.partition);
}

}  // namespace semloc
