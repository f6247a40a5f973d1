#pragma once

#include <filesystem>
#include <vector>

#include <semloc/evaluation.hpp>
#include <semloc/osm_ingest.hpp>

namespace semloc::cli {

/// A scenario file plus the ablation settings that only `semloc ablate` reads.
struct ScenarioFile {
  Scenario scenario;
  std::vector<std::uint64_t> seeds;  // empty: the sim seed only
  std::vector<CueSet> cues;
};

/// Tables: top-level `kind`, `seeds`, `cues`; `[map]`, `[sim]`, `[route]`.
/// Unknown keys are a ConfigError so typos do not go unnoticed.
ScenarioFile load_scenario(const std::filesystem::path& path);

/// `drivable = [...]`, `fallback = 30`, `allow_u_turns = false`, `[speeds] highway_value = km/h`.
IngestConfig load_ingest_config(const std::filesystem::path& path);

}  // namespace semloc::cli
