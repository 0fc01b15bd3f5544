#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gvimp/gvimp.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kNoProgress = 2, kIo = 3 };

int report(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian variational inference motion planner"};
  app.require_subcommand(1);

  std::string scenario_path;
  gvimp::RunOptions options;
  std::string mode;
  int samples = -1;
  long long seed = -1;
  auto* run = app.add_subcommand("run", "plan a scenario and write result files");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--out", options.out_dir, "output directory")->capture_default_str();
  run->add_option("--mode", mode, "gvi, map or both (overrides the scenario)")
      ->check(CLI::IsMember({"gvi", "map", "both"}));
  run->add_option("--samples", samples, "number of trajectory samples")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "sampling seed")->check(CLI::NonNegativeNumber);

  std::string spec_path, sdf_out;
  auto* make_sdf = app.add_subcommand("make-sdf", "rasterize rectangle obstacles into an SDF file");
  make_sdf->add_option("spec", spec_path, "obstacle spec file")->required();
  make_sdf->add_option("out", sdf_out, "output SDF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      if (!mode.empty()) {
        options.mode = mode == "gvi" ? gvimp::RunMode::gvi : mode == "map" ? gvimp::RunMode::map : gvimp::RunMode::both;
      }
      if (samples >= 0) options.samples = samples;
      if (seed >= 0) options.seed = static_cast<unsigned long long>(seed);
      const gvimp::Scenario scenario = gvimp::load_scenario(scenario_path);
      return gvimp::run_scenario(scenario, options, std::cout).exit_code == 2 ? kNoProgress : kOk;
    }
    std::ifstream in(spec_path);
    if (!in) throw gvimp::IoError("cannot open obstacle spec '" + spec_path + "'");
    gvimp::ObstacleSpec spec;
    try {
      spec = gvimp::parse_obstacle_spec(in);
    } catch (const gvimp::ParseError& e) {
      throw gvimp::ParseError(spec_path + ": " + e.what());
    }
    gvimp::save_sdf(sdf_out, gvimp::make_sdf(spec));
    return kOk;
  } catch (const gvimp::IoError& e) {
    return report(e, kIo);
  } catch (const gvimp::ParseError& e) {
    return report(e, kUsage);
  } catch (const gvimp::DomainError& e) {
    return report(e, kUsage);
  } catch (const gvimp::ShapeError& e) {
    return report(e, kUsage);
  } catch (const gvimp::ResourceError& e) {
    return report(e, kUsage);
  } catch (const gvimp::Error& e) {
    // numerical or out-of-map failure while solving
    return report(e, kNoProgress);
  }
}
