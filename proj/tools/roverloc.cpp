// roverloc: simulate scenes, localize the rover camera, evaluate results.

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "roverloc/digest.hpp"
#include "roverloc/formats.hpp"
#include "roverloc/pipeline.hpp"
#include "roverloc/simulator.hpp"
#include "roverloc/svg.hpp"

namespace fs = std::filesystem;
using namespace roverloc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitEmptyScene = 2;
constexpr int kExitFrameMismatch = 6;


int Simulate(const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed) {
  SceneConfig cfg = SceneConfigFromJson(detail::ParseJson(ReadTextFile(config_path), config_path));
  if (seed) cfg.rng_seed = *seed;
  Scene scene;
  try {
    scene = GenerateScene(cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyVisibleSet) throw;
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitEmptyScene;
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::pair<const char*, std::string> files[] = {
      {kUavRocksFile, FormatUavRocks(scene.uav_rocks)},
      {kDetectionsFile, FormatDetections(scene.detections)},
      {kStereoMatchesFile, FormatStereoMatches(scene.stereo_matches)},
      {kTruthFile, Dump(TruthToJson(scene))},
      {kPipelineFile, Dump(ToJson(PipelineConfigForScene(cfg)))},
  };
  for (const auto& [name, text] : files) {
    WriteTextFile(dir / name, text);
    std::cout << Sha256Hex(text) << "  " << name << "\n";
  }
  return 0;
}

struct LocalizeArgs {
  std::string dir;
  std::string config;
  std::string output = "result.json";
  bool plots = false;
  bool verbose = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> iterations;
};

int Localize(const LocalizeArgs& a) {
  const fs::path dir(a.dir);
  fs::path cfg_path = a.config;
  if (cfg_path.empty() && fs::exists(dir / kPipelineFile)) cfg_path = dir / kPipelineFile;
  Json cfg_json = Json::object();
  if (!cfg_path.empty()) cfg_json = detail::ParseJson(ReadTextFile(cfg_path), cfg_path.string());
  PipelineConfig cfg = PipelineConfigFromJson(cfg_json);
  if (a.seed) cfg.match.rng_seed = *a.seed;
  if (a.iterations) cfg.match.iterations = *a.iterations;
  if (a.threads) cfg.match.threads = *a.threads;
  cfg.Validate();

  const std::string uav_text = ReadTextFile(dir / kUavRocksFile);
  const std::string det_text = ReadTextFile(dir / kDetectionsFile);
  const std::string match_text = ReadTextFile(dir / kStereoMatchesFile);
  const PipelineInputs in{ParseUavRocks(uav_text), ParseDetections(det_text),
                          ParseStereoMatches(match_text)};

  // Thread count does not affect the result, so it is left out of the digest.
  PipelineConfig digest_cfg = cfg;
  digest_cfg.match.threads = 1;
  Json digest_json = ToJson(digest_cfg);
  digest_json["match"].erase("threads");

  const LocalizationResult r = roverloc::Localize(in, cfg);
  const Provenance prov{Sha256Hex(uav_text), Sha256Hex(det_text), Sha256Hex(match_text),
                        Sha256Hex(digest_json.dump()), cfg.match.rng_seed};
  Json out = ResultToJson(r, prov);
  const fs::path out_path(a.output);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  WriteTextFile(out_path, Dump(out));

  if (a.plots) {
    const fs::path base = out_path.parent_path() / out_path.stem();
    WriteTextFile(base.string() + "_distributions.svg", svg::Distributions(r.rover_set, r.uav_set));
    WriteTextFile(base.string() + "_overlay.svg", svg::Overlay(r.rover_set, r.uav_set, r.match.transform));
    WriteTextFile(base.string() + "_correspondences.svg",
              svg::Correspondences(r.rover_set, r.uav_set, r.match.correspondences));
  }
  if (a.verbose) {
    std::cerr << "located " << r.intersection.located << "/" << r.intersection.detections
              << ", near " << r.observations.size() << ", inliers " << r.match.inlier_count
              << ", resection iterations " << r.resection.iterations
              << (r.resection.converged ? "" : " (not converged)") << "\n";
  }
  std::printf("planar_position %s %s\n", FormatNumber(r.planar_position.x).c_str(),
              FormatNumber(r.planar_position.y).c_str());
  return 0;
}

int Evaluate(const std::string& result_path, const std::string& truth_path,
             const std::string& out_path) {
  const FramedPosition computed =
      FramedPositionFromJson(detail::ParseJson(ReadTextFile(result_path), result_path));
  const FramedPosition reference =
      FramedPositionFromJson(detail::ParseJson(ReadTextFile(truth_path), truth_path));
  if (computed.frame != reference.frame) {
    std::cerr << "evaluate: frame mismatch: '" << computed.frame << "' vs '" << reference.frame
              << "'\n";
    return kExitFrameMismatch;
  }
  const PlanarError e = EvaluatePlanar(computed.planar_position, reference.planar_position);
  std::printf("dX %.4f\ndY %.4f\ntotal %.4f\n", e.dx, e.dy, e.total);
  if (!out_path.empty()) {
    const Json report = {{"frame", computed.frame},
                         {"computed", ToJson(computed.planar_position)},
                         {"reference", ToJson(reference.planar_position)},
                         {"dx_m", e.dx},
                         {"dy_m", e.dy},
                         {"total_m", e.total}};
    WriteTextFile(out_path, Dump(report));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rover localization from UAV-mapped rock distributions"};
  app.require_subcommand(1);

  std::string scene_cfg, sim_out;
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scene and its input files");
  sim->add_option("scene-config", scene_cfg, "Scene config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--output", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "Override rng_seed");

  LocalizeArgs loc_args;
  auto* loc = app.add_subcommand("localize", "Localize the rover from an input directory");
  loc->add_option("dir", loc_args.dir, "Input directory")->required()->check(CLI::ExistingDirectory);
  loc->add_option("-c,--config", loc_args.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  loc->add_option("-o,--output", loc_args.output, "Result file");
  loc->add_flag("--plots", loc_args.plots, "Write SVG plots next to the result");
  loc->add_option("--seed", loc_args.seed, "Override the matcher seed");
  loc->add_option("--threads", loc_args.threads, "Matcher threads (0 = all cores)");
  loc->add_option("--iterations", loc_args.iterations, "Override matcher trial count");
  loc->add_flag("-v,--verbose", loc_args.verbose, "Print stage summary");

  std::string result_path, truth_path, report_path;
  auto* ev = app.add_subcommand("evaluate", "Planar error of a result against a reference");
  ev->add_option("result", result_path, "Result JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("truth", truth_path, "Truth JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("-o,--output", report_path, "Write report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return Simulate(scene_cfg, sim_out, sim_seed);
    if (*loc) return Localize(loc_args);
    if (*ev) return Evaluate(result_path, truth_path, report_path);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << " [" << ToString(e.code()) << "]\n";
    return ExitCode(e.stage());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << " [" << ToString(e.code()) << "]\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
