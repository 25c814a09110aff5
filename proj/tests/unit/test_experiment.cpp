#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>
#include <sstream>

#include "fqhd/errors.hpp"
#include "fqhd/experiment.hpp"

using namespace fqhd;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

std::string config_error_field(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return {};
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("fqhd_test_" + name + "_" + std::to_string(std::random_device{}()));
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("minimal configuration takes the defaults") {
  const auto s = parse_config(R"({"kind": "stationary"})");
  CHECK(s == ExperimentSpec{});
  CHECK(s.scenario.n_cells == 200);
  CHECK(s.scenario.eps == 0.25);
  CHECK_FALSE(s.stepper.dt.has_value());
  CHECK(s.output_dir == "out");
}

TEST_CASE("configuration errors name the offending key") {
  CHECK(config_error_field(R"({"kind": "stationary", "scenario": {"eps": -0.1}})") == "scenario.eps");
  CHECK(config_error_field(R"({"kind": "semiclassical_stationary"})") == "sweep");
  CHECK(config_error_field(R"({"kind": "semiclassical_stationary", "sweep": [0.1, 0.2, 0.05]})") == "sweep");
  CHECK(config_error_field(R"({"kind": "stationary", "scenario": {"n_cels": 10}})") == "scenario.n_cels");
  CHECK(config_error_field(R"({"kind": "stationary", "colour": 1})") == "colour");
  CHECK(config_error_field(R"({"scenario": {}})") == "kind");
  CHECK(config_error_field(R"({"kind": "warp"})") == "kind");
  CHECK(config_error_field(R"({"kind": "stationary", "stepper": {"dt": 0}})") == "stepper.dt");
  CHECK(config_error_field(R"({"kind": "stationary", "scenario": {"n_cells": 2.5}})") == "scenario.n_cells");
  CHECK(config_error_field(R"({"kind": "stationary", "scenario": {"doping": {"tag": "pnp"}}})") ==
        "scenario.doping.tag");
  CHECK(config_error_field(R"({"kind": "stationary", "scenario": {"boundary": {"n_l": -1}}})") ==
        "scenario.boundary");
  CHECK(config_error_field(R"({"kind": "transient_decay", "scenario": {"eps": 0}})") == "scenario.eps");
  CHECK(config_error_field(R"({"kind": "transient_decay", "analysis": {"fit_window": [0.5, 0.2]}})") ==
        "analysis.fit_window");
  CHECK(config_error_field(R"({"kind": "stationary", "output_dir": ""})") == "output_dir");
}

TEST_CASE("malformed JSON reports its position") {
  try {
    parse_config("{\n  \"kind\": \"stationary\",\n  \"scenario\": {\"eps\": }\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() >= 19);
  }
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
}

TEST_CASE("serialization round trip") {
  ExperimentSpec s;
  s.kind = ExperimentKind::semiclassical_transient;
  s.sweep = std::vector<double>{0.3, 0.2, 0.1};
  s.stepper.dt = 0.1 / 3.0;
  s.stepper.scheme = TimeScheme::picard_frozen;
  s.analysis.fit_window = std::pair{0.1, 0.7};
  s.scenario.doping.tag = DopingPreset::Tag::npn;
  s.scenario.doping.low = 0.6;
  s.solver.damping = 0.7;
  const auto text = serialize(s);
  const auto back = parse_config(text);
  CHECK(back == s);
  CHECK(serialize(back) == text);
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto spec = parse_config(preset_text(name));
    CHECK(parse_config(serialize(spec)) == spec);
    CHECK(spec.output_dir == "out/" + name);
  }
  CHECK_THROWS_AS(preset_text("nope"), ConfigError);
}

TEST_CASE("flat stationary run") {
  auto spec = parse_config(R"({"kind": "stationary", "scenario": {"n_cells": 100}})");
  const auto r = run_experiment(spec);
  CHECK(r.summary.converged);
  CHECK(r.summary.residual <= 1e-10);
  CHECK(r.summary.metrics.at("J") == 0.0);
  REQUIRE(r.stationary.has_value());
  CHECK(r.snapshots.empty());

  const auto dir = scratch_dir("flat");
  write_outputs(r, spec.scenario.build().grid, dir);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["converged"] == true);
  CHECK(summary["kind"] == "stationary");
  const auto rows = read_csv(dir / "fields_stationary.csv");
  REQUIRE(rows.size() == 101);
  CHECK(rows[0].size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i][0] == spec.scenario.build().grid.x(i));
    CHECK(rows[i][1] == r.stationary->w[i] * r.stationary->w[i]);
    CHECK(rows[i][3] == r.stationary->theta[i]);
    CHECK(rows[i][4] == r.stationary->phi[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("failed runs still write a summary") {
  auto spec = parse_config(R"({"kind": "stationary",
    "scenario": {"boundary": {"n_l": 1, "n_r": 1.02, "theta_l": 1.01, "theta_r": 0.99, "phi_r": 0.01},
                 "doping": {"tag": "npn", "low": 0.6}},
    "solver": {"fp_max_iter": 1}})");
  const auto r = run_experiment(spec);
  CHECK_FALSE(r.summary.converged);
  CHECK_FALSE(r.summary.message.empty());
  const auto dir = scratch_dir("failed");
  write_outputs(r, spec.scenario.build().grid, dir);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["converged"] == false);
  CHECK(summary["message"].get<std::string>() == r.summary.message);
  fs::remove_all(dir);
}

TEST_CASE("transient outputs follow the snapshot stride") {
  auto spec = parse_config(R"({"kind": "transient_decay",
    "scenario": {"n_cells": 40,
                 "boundary": {"n_l": 1, "n_r": 1.02, "theta_l": 1.01, "theta_r": 0.99, "phi_r": 0.01},
                 "doping": {"tag": "npn", "low": 0.6}},
    "stepper": {"dt": 0.01, "t_end": 1.0, "snapshot_stride": 10}})");
  std::vector<std::string> messages;
  RunOptions opts;
  opts.log = [&](const std::string& m) { messages.push_back(m); };
  const auto r = run_experiment(spec, opts);
  REQUIRE(r.summary.converged);
  CHECK_FALSE(messages.empty());
  CHECK(r.snapshots.size() == 10);
  CHECK(r.series.size() == 101);
  CHECK(r.summary.metrics.at("gamma") > 0.0);
  const auto dir = scratch_dir("transient");
  write_outputs(r, spec.scenario.build().grid, dir);
  std::size_t fields = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("fields_", 0) == 0 && name != "fields_stationary.csv") ++fields;
  }
  CHECK(fields == 10);
  CHECK(count_lines(dir / "series.csv") == 102);
  const auto series = read_csv(dir / "series.csv");
  for (std::size_t k = 0; k < series.size(); ++k) {
    CHECK(series[k][0] == r.series[k].t);
    CHECK(series[k][1] == r.series[k].perturbation_norm);
    CHECK(series[k][2] == r.series[k].energy_xi);
  }
  const auto& last = r.snapshots.back();
  const auto rows = read_csv(dir / "fields_1.csv");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i][2] == last.j[i]);
    CHECK(rows[i][3] == last.theta[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("summary json writes non-finite values as null") {
  RunSummary s;
  s.metrics["slope"] = std::numeric_limits<double>::infinity();
  s.sequences["error"] = {1.0, std::nan("")};
  const auto j = nlohmann::json::parse(summary_json(s));
  CHECK(j["metrics"]["slope"].is_null());
  CHECK(j["sequences"]["error"][1].is_null());
  CHECK(j["sequences"]["error"][0] == 1.0);
}
