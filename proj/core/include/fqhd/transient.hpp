#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fqhd/model.hpp"
#include "fqhd/stationary.hpp"

namespace fqhd {

/// Time-dependent state in square-root variables; density = w^2.
struct TransientState {
  double t = 0.0;
  std::vector<double> w;
  std::vector<double> j;
  std::vector<double> theta;
  std::vector<double> phi;
  /// Optional low-order parts: the stepped fields are w + w_lo etc. Empty means zero.
  std::vector<double> w_lo;
  std::vector<double> j_lo;
  std::vector<double> theta_lo;

  std::vector<double> density() const;
  FieldState fields() const;
};

/// Constant-current state with the stationary fields, at t = 0.
TransientState from_stationary(const StationaryState& s);

/// Builds a state from (w, j, theta) and fills phi from w^2.
TransientState make_state(double t, std::vector<double> w, std::vector<double> j, std::vector<double> theta,
                          const ScenarioParams& params);

enum class TimeScheme { implicit_newton, picard_frozen };

struct StepperConfig {
  double dt = 0.01;
  TimeScheme scheme = TimeScheme::implicit_newton;
  double t_end = 1.0;
  int snapshot_stride = 1;
  /// Newton on the backward-Euler system stops once the residual is below newton_tol or the
  /// update is below newton_step_tol relative to the state.
  double newton_tol = 1e-14;
  double newton_step_tol = 1e-17;
  int newton_max_iter = 40;
  /// Frozen-coefficient sweeps per step; 1 gives the linearly implicit scheme.
  int picard_sweeps = 1;
  double picard_tol = 1e-12;

  void validate() const;

  /// min(0.25 dx, 0.5 dx^2 / max(eps, dx)).
  static double default_dt(const Grid& grid, double eps);
};

struct CompatibilityCheck {
  std::string name;
  bool passed = false;
  double magnitude = 0.0;
};

struct CompatibilityReport {
  std::vector<CompatibilityCheck> checks;

  bool all_passed() const;
  const CompatibilityCheck& at(const std::string& name) const;
};

/// Traces of w and theta, discrete j_x and w_xx at both contacts, and admissibility of the data.
/// The w_xx condition is only checked when eps > 0. Traces must match to 1e-10; smooth data meet the
/// one-sided derivative conditions only to truncation order, so these default to a 50 dx^2 tolerance.
CompatibilityReport check_compatibility(const TransientState& initial, const ScenarioParams& params,
                                        std::optional<double> derivative_tol = std::nullopt);

struct TimeDerivatives {
  std::vector<double> w_t;
  std::vector<double> j_t;
  std::vector<double> theta_t;
};

/// Nodewise residuals of the three evolution equations for prescribed time derivatives.
/// Rows of the w and theta equations at the contacts carry Dirichlet data and are reported as 0.
std::array<std::vector<double>, 3> fqhd_residual(const TransientState& state, const TimeDerivatives& derivs,
                                                 const ScenarioParams& params);

struct StepInfo {
  int iterations = 0;
  double residual = 0.0;
};

/// One backward-Euler step solved by Newton.
TransientState step_implicit(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                             StepInfo* info = nullptr);

/// One step of the frozen-coefficient iteration; each sweep solves a linear system.
TransientState step_picard(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                           StepInfo* info = nullptr);

/// Dispatches on cfg.scheme.
TransientState step(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                    StepInfo* info = nullptr);

struct Trajectory {
  std::vector<TransientState> snapshots;
  int steps = 0;
  bool completed = false;
  std::string failure;
};

/// Called after every accepted step (and once for the initial state) with the step index.
using StepObserver = std::function<void(int, const TransientState&)>;

/// Integrates until cfg.t_end. Snapshots hold the initial state and every snapshot_stride-th step.
/// Solver failures end the run and are recorded in `failure`; the partial trajectory is kept.
Trajectory run_transient(const TransientState& initial, const ScenarioParams& params, const StepperConfig& cfg,
                         const StepObserver& observer = {});

/// base + amplitude * 64 x^3 (1-x)^3 in w (peak value `amplitude` at x = 1/2), followed by a correction
/// c1 x (1-x)^2 + c2 x^2 (1-x) that makes the discrete w_xx vanish at both contacts. Traces, j and theta
/// are left untouched, so compatible data stay compatible.
TransientState compatible_perturbation(const TransientState& base, const ScenarioParams& params, double amplitude);

/// Field-wise difference a - b including the low-order parts; field 0 = w, 1 = j, 2 = theta.
std::vector<double> field_difference(const TransientState& a, const TransientState& b, int field);

/// Converges a state to the steady solution of the discrete time-stepping scheme by implicit steps
/// with geometrically growing dt. Used to anchor perturbation studies at the scheme's own equilibrium.
TransientState equilibrate(const TransientState& guess, const ScenarioParams& params, double tol = 1e-15,
                           int max_steps = 200);

}  // namespace fqhd
