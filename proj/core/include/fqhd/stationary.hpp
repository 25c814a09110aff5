#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fqhd/model.hpp"

namespace fqhd {

/// Stationary solution in square-root variables: density = w^2, constant current J.
struct StationaryState {
  std::vector<double> w;
  double J = 0.0;
  std::vector<double> theta;
  std::vector<double> phi;
  double eps = 0.0;

  std::vector<double> density() const;
  FieldState fields() const;
};

struct SolverSettings {
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  double fp_tol = 1e-8;
  int fp_max_iter = 200;
  /// Relaxation of the temperature fixed point, q <- q + damping (Q - q).
  double damping = 1.0;
  /// Boundary strengths above this are rejected as outside the small-data regime.
  double delta_max = 0.5;

  void validate() const;

  friend bool operator==(const SolverSettings&, const SolverSettings&) = default;
};

struct StationaryStats {
  int fixed_point_iterations = 0;
  int newton_iterations = 0;
  double fixed_point_change = 0.0;
  double residual = 0.0;
  /// One-sided w_xx at both contacts; the reformulation only enforces these in the limit dx -> 0.
  double wxx_left = 0.0;
  double wxx_right = 0.0;
};

/// Denominator of the explicit current formula; throws SupersonicRegime on a negative discriminant.
double K_functional(std::span<const double> w, std::span<const double> theta, const ScenarioParams& params);

/// Constant current solving the current-voltage relation for the profile (w, theta).
double current_J(std::span<const double> w, std::span<const double> theta, const ScenarioParams& params);

/// Left minus right side of the current-voltage relation at current J.
double cvr_residual(double J, std::span<const double> w, std::span<const double> theta,
                    const ScenarioParams& params);

/// Nonlocal right-hand side of eps^2 u_xx = h(u, q); running integrals by cumulative trapezoid.
std::vector<double> rhs_h(std::span<const double> u, std::span<const double> q, double J,
                          std::span<const double> phi, const ScenarioParams& params);

/// Source of the temperature equation, including the eps^2 dispersive contribution.
std::vector<double> rhs_g(std::span<const double> u, double J, double eps, const Grid& grid);

/// Solves eps^2 u_xx = h(u_trunc, q), u(0) = w_l, u(1) = w_r. With eps = 0 the equation is h = 0.
std::vector<double> solve_P1(std::span<const double> q, const ScenarioParams& params, const SolverSettings& settings,
                             std::optional<std::span<const double>> initial_guess = std::nullopt,
                             int* iterations = nullptr);

/// max over interior nodes of |eps^2 D2 u - h(u, q)|, with J = J[u^2, q] and phi = G[u^2].
double p1_residual(std::span<const double> u, std::span<const double> q, const ScenarioParams& params);

/// Solves the linear nonlocal temperature problem for Q given (u, q).
std::vector<double> solve_P2(std::span<const double> u, std::span<const double> q, const ScenarioParams& params,
                             const SolverSettings& settings);

/// max over interior nodes of the assembled temperature-equation residual at Q.
double p2_residual(std::span<const double> Q, std::span<const double> u, std::span<const double> q,
                   const ScenarioParams& params);

/// Fixed point q -> Q of (P1, P2) for eps > 0.
StationaryState solve_stationary(const ScenarioParams& params, const SolverSettings& settings,
                                 StationaryStats* stats = nullptr);

/// The classical (eps = 0) stationary problem through the same pipeline.
StationaryState solve_stationary_limit(const ScenarioParams& params, const SolverSettings& settings,
                                       StationaryStats* stats = nullptr);

/// Residual of the discrete stationary system at a state: max of the density-equation residual,
/// the temperature-equation residual and the current-voltage residual.
double stationary_residual(const StationaryState& state, const ScenarioParams& params);

}  // namespace fqhd
