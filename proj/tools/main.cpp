#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <semloc/angles.hpp>
#include <semloc/errors.hpp>
#include <semloc/evaluation.hpp>
#include <semloc/observation_io.hpp>
#include <semloc/osm_ingest.hpp>
#include <semloc/road_graph_io.hpp>
#include <semloc/solar_compass.hpp>

#include "config.hpp"

namespace fs = std::filesystem;
using namespace semloc;

namespace {

void print_error(std::string_view kind, std::string_view message) {
  const nlohmann::json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) spdlog::warn("{}", w);
}

// Frame spacing of an observation stream; the filter assumes it is uniform.
double frame_spacing(const std::vector<ObservationFrame>& obs) {
  if (obs.size() < 2) return 1.0;
  std::vector<double> dts;
  for (std::size_t k = 1; k < obs.size(); ++k) dts.push_back(obs[k].t - obs[k - 1].t);
  std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
  const double dt = dts[dts.size() / 2];
  if (!(dt > 0.0)) throw FormatError("observation timestamps must increase");
  return dt;
}

NoiseModel load_noise(const std::string& path) {
  if (path.empty()) return NoiseModel::defaults();
  return noise_model_from_json(read_text_file(path));
}

struct RunFlags {
  double gini_threshold = 0.0;
  std::string strict = "on";

  void add_to(CLI::App* app) {
    app->add_option("--gini-threshold", gini_threshold, "bins with more mass count as alive")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--strict-correctness", strict, "require the localized mode within 20 m of ground truth")
        ->check(CLI::IsMember({"on", "off"}));
  }
  [[nodiscard]] RunOptions options() const {
    RunOptions o;
    o.gini_threshold = gini_threshold;
    o.strict_correctness = strict == "on";
    return o;
  }
};

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_text_file(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("semloc"));
  spdlog::set_pattern("%l: %v");

  CLI::App app{"Semantic map localization: map ingestion, simulation, filtering and evaluation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  // ingest-map
  auto* ingest = app.add_subcommand("ingest-map", "Build a road graph from an OSM XML extract");
  std::string osm_path, map_out, speeds_path;
  ingest->add_option("--osm", osm_path, "OSM XML file")->required();
  ingest->add_option("--out", map_out, "road graph JSON")->required();
  ingest->add_option("--defaults", speeds_path, "TOML with drivable classes and default speeds");

  // sun
  auto* sun = app.add_subcommand("sun", "Sun azimuth and elevation in degrees");
  std::string utc;
  double lat = 0.0, lon = 0.0;
  bool sun_json = false;
  sun->add_option("--utc", utc, "ISO 8601 time")->required();
  sun->add_option("--lat", lat, "degrees north")->required();
  sun->add_option("--lon", lon, "degrees east")->required();
  sun->add_flag("--json", sun_json, "print JSON");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate a drive and its observations");
  std::string sim_map, sim_kind, route_arg = "auto", sim_config, out_dir;
  simulate->add_option("--map", sim_map, "road graph JSON; written here when --kind generates one");
  simulate->add_option("--kind", sim_kind, "generate a synthetic map")
      ->check(CLI::IsMember({"grid", "symmetric_loop", "radial"}));
  simulate->add_option("--route", route_arg, "auto, or a file of segment ids");
  simulate->add_option("--config", sim_config, "scenario TOML");
  simulate->add_option("--out-dir", out_dir, "output directory")->required();

  // localize
  auto* localize = app.add_subcommand("localize", "Run the filter over an observation stream");
  std::string loc_map, obs_path, noise_path, cues = "OSIRV", dump_path, report_path, loc_gt;
  RunFlags loc_flags;
  localize->add_option("--map", loc_map, "road graph JSON")->required();
  localize->add_option("--obs", obs_path, "observation CSV")->required();
  localize->add_option("--noise", noise_path, "noise model JSON (defaults when omitted)");
  localize->add_option("--cues", cues, "subset of OSIRV");
  localize->add_option("--dump", dump_path, "posterior dump CSV");
  localize->add_option("--report", report_path, "report JSON (stdout when omitted)");
  localize->add_option("--gt", loc_gt, "ground truth CSV for localization time and errors");
  loc_flags.add_to(localize);

  // learn-params
  auto* learn = app.add_subcommand("learn-params", "Fit the noise model from residuals");
  std::string residuals_path, noise_out;
  learn->add_option("--residuals", residuals_path, "residual CSV")->required();
  learn->add_option("--out", noise_out, "noise model JSON")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a posterior dump against ground truth");
  std::string eval_dump, eval_gt, eval_report, eval_map;
  RunFlags eval_flags;
  evaluate->add_option("--dump", eval_dump, "posterior dump CSV")->required();
  evaluate->add_option("--gt", eval_gt, "ground truth CSV")->required();
  evaluate->add_option("--map", eval_map, "road graph JSON the dump refers to")->required();
  evaluate->add_option("--report", eval_report, "report JSON (stdout when omitted)");
  eval_flags.add_to(evaluate);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run every cue subset over seeded scenarios");
  std::string abl_map, scenario_path, table_out, abl_noise;
  RunFlags abl_flags;
  ablate->add_option("--map", abl_map, "road graph JSON (generated from the scenario when omitted)");
  ablate->add_option("--scenario", scenario_path, "scenario TOML")->required();
  ablate->add_option("--noise", abl_noise, "noise model JSON (defaults when omitted)");
  ablate->add_option("--out", table_out, "table CSV (stdout when omitted)");
  abl_flags.add_to(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*ingest) {
      const IngestConfig config = speeds_path.empty() ? IngestConfig{} : cli::load_ingest_config(speeds_path);
      std::vector<std::string> warnings;
      const OsmExtract extract = parse_osm(read_text_file(osm_path), config);
      const RoadGraph graph = build_graph(extract, config, &warnings);
      warn_all(warnings);
      save_graph(graph, map_out);
      spdlog::info("{} ways, {} segments", extract.ways.size(), graph.size());
    } else if (*sun) {
      const SunPosition p = sun_position(parse_iso8601(utc), lat, lon);
      const double az = rad2deg(p.azimuth), el = rad2deg(p.elevation);
      if (sun_json) {
        std::cout << nlohmann::json{{"azimuth_deg", az}, {"elevation_deg", el}}.dump() << '\n';
      } else {
        fmt::print("azimuth {:.4f} deg\nelevation {:.4f} deg\n", az, el);
      }
    } else if (*simulate) {
      cli::ScenarioFile file;
      if (!sim_config.empty()) file = cli::load_scenario(sim_config);
      Scenario& sc = file.scenario;
      if (!sim_kind.empty()) sc.kind = map_kind_from_string(sim_kind);
      const bool generate = !sim_kind.empty() || sim_map.empty();
      RoadGraph graph = generate ? make_synthetic_map(sc.kind, sc.map) : load_graph(sim_map);

      fs::create_directories(out_dir);
      const fs::path dir(out_dir);
      ScenarioData data;
      if (route_arg == "auto") {
        data = realize(sc, std::move(graph));
      } else {
        data.graph = std::move(graph);
        data.route = route_from_text(read_text_file(route_arg));
        const double first = data.graph.segment(data.route.front()).length;
        data.gt = simulate_drive(data.graph, data.route, sc.sim, std::clamp(sc.start_d, 0.0, 0.999 * first));
        data.observations = emit_observations(data.gt, data.graph, sc.sim);
      }
      if (generate) {
        save_graph(data.graph, dir / "map.json");
        if (!sim_map.empty()) save_graph(data.graph, sim_map);
      }
      std::string route_text;
      for (SegmentId u : data.route) route_text += fmt::format("{}\n", index_of(u));
      write_text_file(dir / "route.txt", route_text);
      write_text_file(dir / "gt.csv", ground_truth_to_csv(data.gt));
      write_text_file(dir / "obs.csv", observations_to_csv(data.observations));
      spdlog::info("{} segments, {} frames", data.graph.size(), data.gt.size());
    } else if (*localize) {
      const RoadGraph graph = load_graph(loc_map);
      const auto obs = observations_from_csv(read_text_file(obs_path));
      if (obs.empty()) throw FormatError("observation file has no frames");
      const std::vector<GroundTruthFrame> gt =
          loc_gt.empty() ? std::vector<GroundTruthFrame>{} : ground_truth_from_csv(read_text_file(loc_gt));
      FilterConfig config;
      config.dt = frame_spacing(obs);
      RunOptions options = loc_flags.options();
      options.keep_dump = !dump_path.empty();
      const RunTrace trace = run_filter(graph, obs, gt, load_noise(noise_path), config, CueSet::parse(cues), options);
      if (!dump_path.empty()) write_text_file(dump_path, dump_header() + dump_rows_to_csv(trace.dump));
      write_or_print(report_path, report_to_json(trace.report));
    } else if (*learn) {
      std::vector<std::string> warnings;
      const auto records = residuals_from_csv(read_text_file(residuals_path));
      const NoiseModel nm = fit_noise(records, {}, &warnings);
      warn_all(warnings);
      write_text_file(noise_out, noise_model_to_json(nm));
    } else if (*evaluate) {
      const RoadGraph graph = load_graph(eval_map);
      const auto dump = dump_from_csv(read_text_file(eval_dump));
      const auto gt = ground_truth_from_csv(read_text_file(eval_gt));
      write_or_print(eval_report, report_to_json(evaluate_dump(graph, dump, gt, eval_flags.options())));
    } else if (*ablate) {
      cli::ScenarioFile file = cli::load_scenario(scenario_path);
      if (file.seeds.empty()) file.seeds.push_back(file.scenario.sim.seed);
      if (file.cues.empty()) {
        for (const char* c : {"O", "OS", "OI", "OR", "OV", "OSIRV"}) file.cues.push_back(CueSet::parse(c));
      }
      const NoiseModel nm = load_noise(abl_noise);
      FilterConfig config;
      config.dt = file.scenario.sim.dt();
      const std::optional<RoadGraph> fixed_map =
          abl_map.empty() ? std::nullopt : std::optional<RoadGraph>(load_graph(abl_map));

      std::string table;
      for (std::uint64_t seed : file.seeds) {
        Scenario sc = file.scenario;
        sc.sim.seed = seed;
        sc.map.seed = seed;
        const ScenarioData data = fixed_map ? realize(sc, *fixed_map) : realize(sc);
        const auto traces = run_ablation(data.graph, data.observations, data.gt, file.cues, nm, config,
                                         abl_flags.options());
        std::vector<RunReport> reports;
        for (const auto& t : traces) reports.push_back(t.report);
        const std::string csv = reports_to_table_csv(reports);
        std::size_t line_start = 0;
        bool header = true;
        while (line_start < csv.size()) {
          const std::size_t end = csv.find('\n', line_start);
          const std::string line = csv.substr(line_start, end - line_start);
          if (header) {
            if (table.empty()) table = "seed," + line + "\n";
            header = false;
          } else {
            table += fmt::format("{},{}\n", seed, line);
          }
          line_start = end + 1;
        }
        spdlog::info("seed {} done", seed);
      }
      write_or_print(table_out, table);
    }
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
