#include "fqhd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fqhd/diagnostics.hpp"
#include "fqhd/errors.hpp"

namespace fqhd {

namespace detail {
// Generated from presets/*.json at configure time.
extern const std::vector<std::pair<std::string, std::string>> kPresets;
}  // namespace detail

namespace {

using nlohmann::json;

const char* kind_names[] = {"stationary", "transient_decay", "semiclassical_stationary", "semiclassical_transient"};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(join(path, item.key()), "unknown key");
  }
}

double get_real(const json& obj, const std::string& path, const char* key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ConfigError(join(path, key), "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError(join(path, key), "must be finite");
  return v;
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  const auto v = it->get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(join(path, key), "integer out of range");
  return static_cast<int>(v);
}

std::string get_string(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError(join(path, key), "expected a string");
  return it->get<std::string>();
}

template <class F>
void validate_as(const std::string& path, F&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
}

ExperimentKind parse_kind(const std::string& s) {
  for (int k = 0; k < 4; ++k)
    if (s == kind_names[k]) return static_cast<ExperimentKind>(k);
  throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

BoundaryData parse_boundary(const json& j, const std::string& path) {
  reject_unknown(j, path, {"n_l", "n_r", "theta_l", "theta_r", "phi_r"});
  BoundaryData bd;
  bd.n_l = get_real(j, path, "n_l", bd.n_l);
  bd.n_r = get_real(j, path, "n_r", bd.n_r);
  bd.theta_l = get_real(j, path, "theta_l", bd.theta_l);
  bd.theta_r = get_real(j, path, "theta_r", bd.theta_r);
  bd.phi_r = get_real(j, path, "phi_r", bd.phi_r);
  validate_as(path, [&] { bd.validate(); });
  return bd;
}

DopingPreset parse_doping(const json& j, const std::string& path) {
  reject_unknown(j, path, {"tag", "low", "high", "junction_width"});
  DopingPreset d;
  const auto tag = get_string(j, path, "tag", "flat");
  if (tag == "flat")
    d.tag = DopingPreset::Tag::flat;
  else if (tag == "npn")
    d.tag = DopingPreset::Tag::npn;
  else
    throw ConfigError(join(path, "tag"), "expected 'flat' or 'npn'");
  d.low = get_real(j, path, "low", d.low);
  d.high = get_real(j, path, "high", d.high);
  d.junction_width = get_real(j, path, "junction_width", d.junction_width);
  validate_as(path, [&] { d.validate(); });
  return d;
}

ScenarioSpec parse_scenario(const json& j) {
  const std::string path = "scenario";
  reject_unknown(j, path, {"n_cells", "eps", "theta_L", "boundary", "doping"});
  ScenarioSpec s;
  s.n_cells = get_int(j, path, "n_cells", s.n_cells);
  if (s.n_cells < 8) throw ConfigError("scenario.n_cells", "must be at least 8");
  s.eps = get_real(j, path, "eps", s.eps);
  if (s.eps < 0.0) throw ConfigError("scenario.eps", "must be non-negative");
  s.theta_L = get_real(j, path, "theta_L", s.theta_L);
  if (!(s.theta_L > 0.0)) throw ConfigError("scenario.theta_L", "must be positive");
  if (auto it = j.find("boundary"); it != j.end()) s.boundary = parse_boundary(*it, "scenario.boundary");
  if (auto it = j.find("doping"); it != j.end()) s.doping = parse_doping(*it, "scenario.doping");
  return s;
}

StepperSpec parse_stepper(const json& j) {
  const std::string path = "stepper";
  reject_unknown(j, path, {"dt", "scheme", "t_end", "snapshot_stride", "picard_sweeps"});
  StepperSpec s;
  if (j.contains("dt")) {
    s.dt = get_real(j, path, "dt", 0.0);
    if (!(*s.dt > 0.0)) throw ConfigError("stepper.dt", "must be positive");
  }
  const auto scheme = get_string(j, path, "scheme", "implicit_newton");
  if (scheme == "implicit_newton")
    s.scheme = TimeScheme::implicit_newton;
  else if (scheme == "picard_frozen")
    s.scheme = TimeScheme::picard_frozen;
  else
    throw ConfigError("stepper.scheme", "expected 'implicit_newton' or 'picard_frozen'");
  s.t_end = get_real(j, path, "t_end", s.t_end);
  if (!(s.t_end > 0.0)) throw ConfigError("stepper.t_end", "must be positive");
  s.snapshot_stride = get_int(j, path, "snapshot_stride", s.snapshot_stride);
  if (s.snapshot_stride < 1) throw ConfigError("stepper.snapshot_stride", "must be at least 1");
  s.picard_sweeps = get_int(j, path, "picard_sweeps", s.picard_sweeps);
  if (s.picard_sweeps < 1) throw ConfigError("stepper.picard_sweeps", "must be at least 1");
  return s;
}

SolverSettings parse_solver(const json& j) {
  const std::string path = "solver";
  reject_unknown(j, path, {"newton_tol", "newton_max_iter", "fp_tol", "fp_max_iter", "damping", "delta_max"});
  SolverSettings s;
  s.newton_tol = get_real(j, path, "newton_tol", s.newton_tol);
  s.newton_max_iter = get_int(j, path, "newton_max_iter", s.newton_max_iter);
  s.fp_tol = get_real(j, path, "fp_tol", s.fp_tol);
  s.fp_max_iter = get_int(j, path, "fp_max_iter", s.fp_max_iter);
  s.damping = get_real(j, path, "damping", s.damping);
  s.delta_max = get_real(j, path, "delta_max", s.delta_max);
  validate_as(path, [&] { s.validate(); });
  return s;
}

AnalysisSpec parse_analysis(const json& j) {
  const std::string path = "analysis";
  reject_unknown(j, path, {"alpha", "fit_window", "horizon"});
  AnalysisSpec a;
  a.alpha = get_real(j, path, "alpha", a.alpha);
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ConfigError("analysis.alpha", "must lie in (0, 1)");
  if (auto it = j.find("fit_window"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      throw ConfigError("analysis.fit_window", "expected [t_start, t_end]");
    a.fit_window = std::pair{(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  a.horizon = get_real(j, path, "horizon", a.horizon);
  return a;
}

void validate_spec(const ExperimentSpec& s) {
  const bool semiclassical =
      s.kind == ExperimentKind::semiclassical_stationary || s.kind == ExperimentKind::semiclassical_transient;
  if (semiclassical && !s.sweep) throw ConfigError("sweep", "required for semiclassical experiments");
  if (s.sweep) {
    const auto& v = *s.sweep;
    if (v.size() < 3) throw ConfigError("sweep", "needs at least 3 eps values");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0)) throw ConfigError("sweep", "eps values must be positive");
      if (i > 0 && !(v[i] < v[i - 1])) throw ConfigError("sweep", "eps values must strictly decrease");
    }
  }
  if (s.kind == ExperimentKind::transient_decay && s.scenario.eps == 0.0)
    throw ConfigError("scenario.eps", "decay experiments need eps > 0");
  const double t_end = s.stepper.t_end;
  if (s.analysis.fit_window) {
    const auto [a, b] = *s.analysis.fit_window;
    if (!(a >= 0.0 && a < b && b <= t_end)) throw ConfigError("analysis.fit_window", "must satisfy 0 <= start < end <= t_end");
  }
  if (s.kind == ExperimentKind::semiclassical_transient && !(s.analysis.horizon > 0.0 && s.analysis.horizon <= t_end))
    throw ConfigError("analysis.horizon", "must lie in (0, t_end]");
  if (!(s.perturbation_amplitude >= 0.0)) throw ConfigError("perturbation_amplitude", "must be non-negative");
  if (s.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string time_tag(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

ScenarioParams scenario_at(const ScenarioSpec& s, double eps) {
  ScenarioSpec copy = s;
  copy.eps = eps;
  return copy.build();
}

StationaryState solve_any(const ScenarioParams& p, const SolverSettings& settings, StationaryStats* stats) {
  return p.eps == 0.0 ? solve_stationary_limit(p, settings, stats) : solve_stationary(p, settings, stats);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  for (std::size_t w = 0; w < workers; ++w)
    futures.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    }));
  for (auto& f : futures) f.get();
}

struct Runner {
  const ExperimentSpec& spec;
  const RunOptions& options;
  RunResult& out;

  void log(const std::string& msg) const {
    if (options.log) options.log(msg);
  }

  StepperConfig stepper(const Grid& g, double eps) const { return spec.stepper.build(g, eps); }

  void stationary() {
    const auto p = spec.scenario.build();
    StationaryStats stats;
    out.stationary = solve_any(p, spec.solver, &stats);
    auto& s = out.summary;
    s.iterations = stats.newton_iterations;
    s.residual = stationary_residual(*out.stationary, p);
    s.metrics["J"] = out.stationary->J;
    s.metrics["boundary_strength"] = boundary_strength(p.bd, p.theta_L);
    s.metrics["fixed_point_iterations"] = stats.fixed_point_iterations;
    s.metrics["wxx_left"] = stats.wxx_left;
    s.metrics["wxx_right"] = stats.wxx_right;
    const auto adm = check_admissible(out.stationary->fields());
    s.metrics["min_density"] = adm.min_density;
    s.metrics["min_sound_gap"] = adm.min_sound_gap;
    s.converged = true;
    log("stationary: J = " + fmt17(out.stationary->J) + ", residual = " + fmt17(s.residual));
  }

  void transient_decay() {
    const auto p = spec.scenario.build();
    StationaryStats stats;
    out.stationary = solve_any(p, spec.solver, &stats);
    auto& s = out.summary;
    s.residual = stationary_residual(*out.stationary, p);
    s.metrics["J"] = out.stationary->J;
    log("decay: stationary anchor solved, residual " + fmt17(s.residual));
    const auto anchor = equilibrate(from_stationary(*out.stationary), p);
    const auto init = compatible_perturbation(anchor, p, spec.perturbation_amplitude);
    auto cfg = stepper(p.grid, p.eps);
    std::vector<double> ts, pn, pe, xi;
    const int stride = cfg.snapshot_stride;
    cfg.snapshot_stride = std::numeric_limits<int>::max();
    auto traj = run_transient(init, p, cfg, [&](int k, const TransientState& st) {
      const auto parts = perturbation_norm_parts(st, anchor, p.eps, p.grid);
      const double e = energy_xi(st, anchor, p, spec.analysis.alpha);
      ts.push_back(st.t);
      pn.push_back(parts.total());
      pe.push_back(parts.eps_weighted);
      xi.push_back(e);
      out.series.push_back({st.t, parts.total(), e});
      if (k > 0 && k % stride == 0) out.snapshots.push_back(st);
    });
    s.iterations = traj.steps;
    s.metrics["steps"] = traj.steps;
    if (!traj.completed) {
      s.message = traj.failure;
      return;
    }
    const auto window = spec.analysis.fit_window.value_or(std::pair{0.2 * cfg.t_end, cfg.t_end});
    const auto fit = fit_decay_rate(ts, pn, window);
    s.metrics["gamma"] = fit.gamma;
    s.metrics["r_squared"] = fit.r_squared;
    s.metrics["amplitude"] = fit.amplitude;
    const auto fe = fit_decay_rate(ts, pe, window);
    s.metrics["gamma_eps_weighted"] = fe.gamma;
    s.metrics["r_squared_eps_weighted"] = fe.r_squared;
    if (std::all_of(xi.begin(), xi.end(), [](double v) { return v > 0.0; })) {
      const auto fx = fit_decay_rate(ts, xi, window);
      s.metrics["gamma_xi"] = fx.gamma;
      s.metrics["r_squared_xi"] = fx.r_squared;
    }
    s.metrics["initial_norm"] = pn.front();
    s.metrics["final_norm"] = pn.back();
    s.converged = true;
    log("decay: gamma = " + fmt17(fit.gamma) + ", r^2 = " + fmt17(fit.r_squared));
  }

  void semiclassical_stationary() {
    const auto& eps = *spec.sweep;
    const auto p0 = scenario_at(spec.scenario, 0.0);
    out.stationary = solve_stationary_limit(p0, spec.solver);
    std::vector<StationaryState> states(eps.size());
    std::vector<double> residuals(eps.size());
    parallel_for(eps.size(), options.threads, [&](std::size_t i) {
      const auto p = p0.with_eps(eps[i]);
      states[i] = solve_stationary(p, spec.solver);
      residuals[i] = stationary_residual(states[i], p);
    });
    std::vector<double> errors;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      errors.push_back(semiclassical_error(states[i], *out.stationary, p0.grid));
      out.convergence.emplace_back(eps[i], errors.back());
      log("semiclassical stationary: eps = " + fmt17(eps[i]) + ", error = " + fmt17(errors.back()));
    }
    auto& s = out.summary;
    s.residual = std::max(stationary_residual(*out.stationary, p0), *std::max_element(residuals.begin(), residuals.end()));
    s.iterations = static_cast<int>(eps.size()) + 1;
    s.sequences["eps"] = eps;
    s.sequences["error"] = errors;
    s.metrics["slope"] = make_convergence_study(eps, errors).slope;
    s.converged = true;
  }

  void semiclassical_transient() {
    const auto& eps = *spec.sweep;
    const auto p0 = scenario_at(spec.scenario, 0.0);
    out.stationary = solve_stationary_limit(p0, spec.solver);
    const auto init = compatible_perturbation(from_stationary(*out.stationary), p0, spec.perturbation_amplitude);
    // One dt for the whole sweep so that every member is sampled at the same times.
    auto cfg = stepper(p0.grid, eps.back());
    cfg.snapshot_stride = 1;
    const auto ref = run_transient(init, p0, cfg);
    if (!ref.completed) {
      out.summary.message = "limit trajectory: " + ref.failure;
      return;
    }
    log("semiclassical transient: limit trajectory done in " + std::to_string(ref.steps) + " steps");
    const double horizon = spec.analysis.horizon;
    std::size_t k_h = 0;
    for (std::size_t k = 0; k < ref.snapshots.size(); ++k)
      if (std::abs(ref.snapshots[k].t - horizon) < std::abs(ref.snapshots[k_h].t - horizon)) k_h = k;

    std::vector<double> err_h(eps.size()), err_sup(eps.size());
    std::vector<std::string> failures(eps.size());
    parallel_for(eps.size(), options.threads, [&](std::size_t i) {
      const auto p = p0.with_eps(eps[i]);
      double sup = 0.0, at_h = std::numeric_limits<double>::quiet_NaN();
      auto tr = run_transient(init, p, cfg, [&](int k, const TransientState& st) {
        const auto ku = static_cast<std::size_t>(k);
        if (ku >= ref.snapshots.size()) return;
        const double e = semiclassical_error(st, ref.snapshots[ku], p0.grid);
        sup = std::max(sup, e);
        if (ku == k_h) at_h = e;
      });
      if (!tr.completed) failures[i] = tr.failure;
      err_h[i] = at_h;
      err_sup[i] = sup;
    });
    auto& s = out.summary;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      if (!failures[i].empty()) {
        s.message = "eps = " + fmt17(eps[i]) + ": " + failures[i];
        return;
      }
      out.convergence.emplace_back(eps[i], err_h[i]);
      log("semiclassical transient: eps = " + fmt17(eps[i]) + ", error = " + fmt17(err_h[i]) +
          ", sup error = " + fmt17(err_sup[i]));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < eps.size(); ++i) monotone = monotone && err_sup[i] < err_sup[i - 1];
    s.iterations = ref.steps;
    s.residual = stationary_residual(*out.stationary, p0);
    s.sequences["eps"] = eps;
    s.sequences["error"] = err_h;
    s.sequences["sup_error"] = err_sup;
    s.metrics["horizon"] = ref.snapshots[k_h].t;
    s.metrics["slope"] = make_convergence_study(eps, err_h).slope;
    s.metrics["sup_slope"] = make_convergence_study(eps, err_sup).slope;
    s.metrics["sup_monotone"] = monotone ? 1.0 : 0.0;
    s.converged = true;
  }
};

void write_fields(const std::filesystem::path& file, const Grid& grid, std::span<const double> n,
                  std::span<const double> j, std::span<const double> theta, std::span<const double> phi) {
  std::ofstream os(file);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  os << "x,n,j,theta,phi\n";
  for (std::size_t i = 0; i < grid.n_nodes(); ++i)
    os << fmt17(grid.x(i)) << ',' << fmt17(n[i]) << ',' << fmt17(j[i]) << ',' << fmt17(theta[i]) << ','
       << fmt17(phi[i]) << '\n';
  if (!os) throw Error("failed writing " + file.string());
}

}  // namespace

std::string to_string(ExperimentKind kind) { return kind_names[static_cast<int>(kind)]; }

void DopingPreset::validate() const {
  if (!(low > 0.0 && low <= high)) throw DomainError("doping: require 0 < low <= high");
  if (!(junction_width > 0.0 && junction_width < 0.25)) throw DomainError("doping: junction_width must lie in (0, 0.25)");
}

DopingProfile DopingPreset::build(const Grid& grid) const {
  validate();
  if (tag == Tag::flat) return DopingProfile::flat(grid, high);
  return DopingProfile::npn(grid, low, high, junction_width);
}

ScenarioParams ScenarioSpec::build() const {
  Grid g(static_cast<std::size_t>(n_cells));
  auto d = doping.build(g);
  return ScenarioParams(std::move(g), std::move(d), boundary, eps, theta_L);
}

StepperConfig StepperSpec::build(const Grid& grid, double eps) const {
  StepperConfig c;
  c.dt = dt.value_or(StepperConfig::default_dt(grid, eps));
  c.scheme = scheme;
  c.t_end = t_end;
  c.snapshot_stride = snapshot_stride;
  c.picard_sweeps = picard_sweeps;
  c.validate();
  return c;
}

ExperimentSpec parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string what = e.what();
    if (auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
    throw ParseError(line, col, what);
  }
  reject_unknown(root, "",
                 {"kind", "scenario", "sweep", "stepper", "solver", "perturbation_amplitude", "analysis", "output_dir"});
  ExperimentSpec s;
  if (!root.contains("kind")) throw ConfigError("kind", "missing");
  s.kind = parse_kind(get_string(root, "", "kind", ""));
  if (auto it = root.find("scenario"); it != root.end()) s.scenario = parse_scenario(*it);
  if (auto it = root.find("sweep"); it != root.end()) {
    if (!it->is_array()) throw ConfigError("sweep", "expected an array of eps values");
    std::vector<double> v;
    for (const auto& e : *it) {
      if (!e.is_number()) throw ConfigError("sweep", "expected numbers");
      v.push_back(e.get<double>());
    }
    s.sweep = std::move(v);
  }
  if (auto it = root.find("stepper"); it != root.end()) s.stepper = parse_stepper(*it);
  if (auto it = root.find("solver"); it != root.end()) s.solver = parse_solver(*it);
  s.perturbation_amplitude = get_real(root, "", "perturbation_amplitude", s.perturbation_amplitude);
  if (auto it = root.find("analysis"); it != root.end()) s.analysis = parse_analysis(*it);
  s.output_dir = get_string(root, "", "output_dir", s.output_dir);
  validate_spec(s);
  return s;
}

std::string serialize(const ExperimentSpec& s) {
  json root;
  root["kind"] = to_string(s.kind);
  const auto& sc = s.scenario;
  root["scenario"] = {
      {"n_cells", sc.n_cells},
      {"eps", sc.eps},
      {"theta_L", sc.theta_L},
      {"boundary",
       {{"n_l", sc.boundary.n_l},
        {"n_r", sc.boundary.n_r},
        {"theta_l", sc.boundary.theta_l},
        {"theta_r", sc.boundary.theta_r},
        {"phi_r", sc.boundary.phi_r}}},
      {"doping",
       {{"tag", sc.doping.tag == DopingPreset::Tag::flat ? "flat" : "npn"},
        {"low", sc.doping.low},
        {"high", sc.doping.high},
        {"junction_width", sc.doping.junction_width}}},
  };
  if (s.sweep) root["sweep"] = *s.sweep;
  json st = {{"scheme", s.stepper.scheme == TimeScheme::implicit_newton ? "implicit_newton" : "picard_frozen"},
             {"t_end", s.stepper.t_end},
             {"snapshot_stride", s.stepper.snapshot_stride},
             {"picard_sweeps", s.stepper.picard_sweeps}};
  if (s.stepper.dt) st["dt"] = *s.stepper.dt;
  root["stepper"] = st;
  root["solver"] = {{"newton_tol", s.solver.newton_tol}, {"newton_max_iter", s.solver.newton_max_iter},
                    {"fp_tol", s.solver.fp_tol},         {"fp_max_iter", s.solver.fp_max_iter},
                    {"damping", s.solver.damping},       {"delta_max", s.solver.delta_max}};
  root["perturbation_amplitude"] = s.perturbation_amplitude;
  json an = {{"alpha", s.analysis.alpha}, {"horizon", s.analysis.horizon}};
  if (s.analysis.fit_window) an["fit_window"] = {s.analysis.fit_window->first, s.analysis.fit_window->second};
  root["analysis"] = an;
  root["output_dir"] = s.output_dir;
  return root.dump(2);
}

RunResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  RunResult out;
  out.summary.kind = spec.kind;
  const auto t0 = std::chrono::steady_clock::now();
  Runner r{spec, options, out};
  try {
    switch (spec.kind) {
      case ExperimentKind::stationary: r.stationary(); break;
      case ExperimentKind::transient_decay: r.transient_decay(); break;
      case ExperimentKind::semiclassical_stationary: r.semiclassical_stationary(); break;
      case ExperimentKind::semiclassical_transient: r.semiclassical_transient(); break;
    }
  } catch (const Error& e) {
    out.summary.converged = false;
    out.summary.message = e.what();
  }
  if (!out.summary.converged) r.log("run failed: " + out.summary.message);
  out.summary.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string summary_json(const RunSummary& s) {
  json root;
  root["kind"] = to_string(s.kind);
  root["converged"] = s.converged;
  root["iterations"] = s.iterations;
  root["residual"] = finite_or_null(s.residual);
  json m = json::object();
  for (const auto& [k, v] : s.metrics) m[k] = finite_or_null(v);
  root["metrics"] = m;
  json q = json::object();
  for (const auto& [k, v] : s.sequences) {
    json arr = json::array();
    for (double x : v) arr.push_back(finite_or_null(x));
    q[k] = arr;
  }
  root["sequences"] = q;
  root["wall_time"] = s.wall_time;
  root["message"] = s.message;
  return root.dump(2);
}

void write_outputs(const RunResult& result, const Grid& grid, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  {
    const auto file = dir / "summary.json";
    std::ofstream os(file);
    if (!os) throw Error("cannot open " + file.string() + " for writing");
    os << summary_json(result.summary) << '\n';
  }
  if (result.stationary) {
    const auto& s = *result.stationary;
    const auto n = s.density();
    const std::vector<double> j(n.size(), s.J);
    write_fields(dir / "fields_stationary.csv", grid, n, j, s.theta, s.phi);
  }
  for (const auto& st : result.snapshots)
    write_fields(dir / ("fields_" + time_tag(st.t) + ".csv"), grid, st.density(), st.j, st.theta, st.phi);
  if (!result.series.empty()) {
    std::ofstream os(dir / "series.csv");
    if (!os) throw Error("cannot open " + (dir / "series.csv").string() + " for writing");
    os << "t,perturbation_norm,energy_xi\n";
    for (const auto& r : result.series)
      os << fmt17(r.t) << ',' << fmt17(r.perturbation_norm) << ',' << fmt17(r.energy_xi) << '\n';
  }
  if (!result.convergence.empty()) {
    std::ofstream os(dir / "convergence.csv");
    if (!os) throw Error("cannot open " + (dir / "convergence.csv").string() + " for writing");
    os << "eps,error\n";
    for (const auto& [e, err] : result.convergence) os << fmt17(e) << ',' << fmt17(err) << '\n';
  }
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open " + file.string());
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw Error(file.string() + ": malformed number '" + cell + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::kPresets) names.push_back(name);
  return names;
}

std::string preset_text(const std::string& name) {
  for (const auto& [n, text] : detail::kPresets)
    if (n == name) return text;
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace fqhd
