#include "semloc/road_graph_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semloc/errors.hpp"

namespace semloc {

using nlohmann::json;

namespace {

json point_json(const Point2& p) { return json::array({p.x(), p.y()}); }

Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("point must be a [x, y] array");
  return {j[0].get<double>(), j[1].get<double>()};
}

json ids_json(const std::vector<SegmentId>& ids) {
  json out = json::array();
  for (SegmentId id : ids) out.push_back(index_of(id));
  return out;
}

std::vector<SegmentId> ids_from(const json& j) {
  std::vector<SegmentId> ids;
  for (const auto& v : j) ids.push_back(segment_id(v.get<std::size_t>()));
  return ids;
}

}  // namespace

std::string graph_to_json(const RoadGraph& graph) {
  json doc;
  doc["frame_origin"] = {{"lat", graph.frame_origin().lat}, {"lon", graph.frame_origin().lon}};
  json segments = json::array();
  for (const auto& s : graph.segments()) {
    segments.push_back({
        {"id", index_of(s.id)},
        {"p0", point_json(s.p0)},
        {"p1", point_json(s.p1)},
        {"beta", s.beta},
        {"alpha", s.alpha},
        {"length", s.length},
        {"speed_limit", s.speed_limit},
        {"road_type", to_string(s.road_type)},
        {"intersection_class", to_string(s.intersection_class)},
        {"successors", ids_json(s.successors)},
        {"predecessors", ids_json(s.predecessors)},
    });
  }
  doc["segments"] = std::move(segments);
  return doc.dump(1);
}

RoadGraph graph_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("graph JSON: ") + e.what());
  }
  try {
    GeoPoint origin{doc.at("frame_origin").at("lat").get<double>(),
                    doc.at("frame_origin").at("lon").get<double>()};
    std::vector<StreetSegment> segments;
    for (const auto& j : doc.at("segments")) {
      StreetSegment s;
      s.id = segment_id(j.at("id").get<std::size_t>());
      s.p0 = point_from(j.at("p0"));
      s.p1 = point_from(j.at("p1"));
      s.beta = j.at("beta").get<double>();
      s.alpha = j.at("alpha").get<double>();
      s.length = j.at("length").get<double>();
      s.speed_limit = j.at("speed_limit").get<double>();
      s.road_type = road_type_from_string(j.at("road_type").get<std::string>());
      s.intersection_class = intersection_class_from_string(j.at("intersection_class").get<std::string>());
      s.successors = ids_from(j.at("successors"));
      s.predecessors = ids_from(j.at("predecessors"));
      segments.push_back(std::move(s));
    }
    return RoadGraph(std::move(segments), origin);
  } catch (const json::exception& e) {
    throw FormatError(std::string("graph JSON: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void save_graph(const RoadGraph& graph, const std::filesystem::path& path) {
  write_text_file(path, graph_to_json(graph));
}

RoadGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_text_file(path)); }

}  // namespace semloc
