#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "semloc/road_map.hpp"

namespace semloc {

/// Serializes a graph as `{"frame_origin": {...}, "segments": [...]}`.
std::string graph_to_json(const RoadGraph& graph);
RoadGraph graph_from_json(std::string_view text);

void save_graph(const RoadGraph& graph, const std::filesystem::path& path);
RoadGraph load_graph(const std::filesystem::path& path);

/// Reads a whole file; throws IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace semloc
