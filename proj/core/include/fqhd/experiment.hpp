#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fqhd/model.hpp"
#include "fqhd/stationary.hpp"
#include "fqhd/transient.hpp"

namespace fqhd {

enum class ExperimentKind { stationary, transient_decay, semiclassical_stationary, semiclassical_transient };

std::string to_string(ExperimentKind kind);

struct DopingPreset {
  enum class Tag { flat, npn };
  Tag tag = Tag::flat;
  double low = 1.0;
  double high = 1.0;  ///< also the level of the flat profile
  double junction_width = 0.05;

  void validate() const;
  DopingProfile build(const Grid& grid) const;
  friend bool operator==(const DopingPreset&, const DopingPreset&) = default;
};

struct ScenarioSpec {
  int n_cells = 200;
  double eps = 0.25;
  double theta_L = 1.0;
  BoundaryData boundary;
  DopingPreset doping;

  ScenarioParams build() const;
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct StepperSpec {
  std::optional<double> dt;  ///< unset selects StepperConfig::default_dt
  TimeScheme scheme = TimeScheme::implicit_newton;
  double t_end = 1.0;
  int snapshot_stride = 1;
  int picard_sweeps = 1;

  StepperConfig build(const Grid& grid, double eps) const;
  friend bool operator==(const StepperSpec&, const StepperSpec&) = default;
};

struct AnalysisSpec {
  double alpha = 0.01;
  /// Decay fit window; unset means [0.2 t_end, t_end].
  std::optional<std::pair<double, double>> fit_window;
  /// Fixed time at which semiclassical transient errors are compared.
  double horizon = 1.0;
  friend bool operator==(const AnalysisSpec&, const AnalysisSpec&) = default;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::stationary;
  ScenarioSpec scenario;
  /// eps values of the semiclassical studies, strictly decreasing.
  std::optional<std::vector<double>> sweep;
  StepperSpec stepper;
  SolverSettings solver;
  double perturbation_amplitude = 0.01;
  AnalysisSpec analysis;
  std::string output_dir = "out";

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Parses and validates a JSON configuration. Throws ParseError for malformed JSON and ConfigError,
/// naming the offending key path, for unknown keys or invalid values.
ExperimentSpec parse_config(const std::string& text);

/// Complete JSON form of a spec; parse_config(serialize(s)) == s.
std::string serialize(const ExperimentSpec& spec);

struct RunSummary {
  ExperimentKind kind = ExperimentKind::stationary;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::map<std::string, double> metrics;
  std::map<std::string, std::vector<double>> sequences;
  double wall_time = 0.0;
  std::string message;
};

struct SeriesRow {
  double t;
  double perturbation_norm;
  double energy_xi;
};

struct RunResult {
  RunSummary summary;
  std::optional<StationaryState> stationary;
  std::vector<TransientState> snapshots;  ///< excludes the initial state
  std::vector<SeriesRow> series;
  std::vector<std::pair<double, double>> convergence;
};

struct RunOptions {
  int threads = 1;
  std::function<void(const std::string&)> log;  ///< progress messages
};

/// Runs the experiment. Solver failures are captured in the summary with converged = false.
RunResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Writes summary.json and the CSV files that apply to the run into `dir`.
void write_outputs(const RunResult& result, const Grid& grid, const std::filesystem::path& dir);

/// Rows of a fields CSV (x, n, j, theta, phi) as written by write_outputs.
std::vector<std::vector<double>> read_csv(const std::filesystem::path& file);

std::string summary_json(const RunSummary& summary);

/// Names of the built-in experiment configurations.
std::vector<std::string> preset_names();
/// JSON text of a built-in configuration; ConfigError for unknown names.
std::string preset_text(const std::string& name);

}  // namespace fqhd
