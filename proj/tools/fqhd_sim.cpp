#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fqhd/errors.hpp"
#include "fqhd/experiment.hpp"

namespace {

constexpr int kConverged = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;

void configure_logging() {
  const char* env = std::getenv("FQHD_SIM_LOG");
  const std::string level = env ? env : "info";
  if (level == "error")
    spdlog::set_level(spdlog::level::err);
  else if (level == "debug")
    spdlog::set_level(spdlog::level::debug);
  else
    spdlog::set_level(spdlog::level::info);
  if (level != "error" && level != "info" && level != "debug")
    spdlog::warn("FQHD_SIM_LOG='{}' not recognised, using info", level);
}

std::string load_config(const std::string& source) {
  if (std::filesystem::exists(source)) {
    std::ifstream is(source);
    if (!is) throw fqhd::ConfigError("", "cannot read " + source);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }
  for (const auto& name : fqhd::preset_names())
    if (name == source) return fqhd::preset_text(name);
  throw fqhd::ConfigError("", "no such file or preset: " + source);
}

int run(const std::string& source, const std::string& out_override, int threads) {
  fqhd::ExperimentSpec spec;
  try {
    spec = fqhd::parse_config(load_config(source));
  } catch (const fqhd::ParseError& e) {
    spdlog::error("{}: {}", source, e.what());
    return kConfigError;
  } catch (const fqhd::ConfigError& e) {
    spdlog::error("{}: {}", source, e.what());
    return kConfigError;
  }
  const std::filesystem::path dir = out_override.empty() ? spec.output_dir : out_override;
  spdlog::info("running {} ({} cells) into {}", fqhd::to_string(spec.kind), spec.scenario.n_cells, dir.string());
  spdlog::debug("resolved configuration:\n{}", fqhd::serialize(spec));

  fqhd::RunOptions options;
  options.threads = threads;
  options.log = [](const std::string& msg) { spdlog::debug("{}", msg); };
  const auto result = fqhd::run_experiment(spec, options);

  try {
    fqhd::write_outputs(result, spec.scenario.build().grid, dir);
  } catch (const fqhd::Error& e) {
    spdlog::error("writing outputs: {}", e.what());
    return kSolverFailure;
  }
  const auto& s = result.summary;
  for (const auto& [k, v] : s.metrics) spdlog::info("  {} = {:.6g}", k, v);
  if (!s.converged) {
    spdlog::error("run failed after {:.2f} s: {}", s.wall_time, s.message);
    return kSolverFailure;
  }
  spdlog::info("converged in {:.2f} s, residual {:.3e}", s.wall_time, s.residual);
  return kConverged;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Quantum hydrodynamic semiconductor simulator"};
  app.require_subcommand(1);

  std::string config, out_dir;
  int threads = 1;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON configuration or preset name");
  run_cmd->add_option("config", config, "configuration file or preset name")->required();
  run_cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run_cmd->add_option("--threads", threads, "workers for sweep members")->check(CLI::PositiveNumber);

  std::string preset;
  auto* presets_cmd = app.add_subcommand("presets", "List built-in configurations or print one");
  presets_cmd->add_option("name", preset, "preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (*presets_cmd) {
    if (preset.empty()) {
      for (const auto& name : fqhd::preset_names()) std::cout << name << '\n';
      return 0;
    }
    try {
      std::cout << fqhd::preset_text(preset);
    } catch (const fqhd::ConfigError& e) {
      spdlog::error("{}", e.what());
      return kConfigError;
    }
    return 0;
  }
  return run(config, out_dir, threads);
}
