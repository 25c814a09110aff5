#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fqhd/model.hpp"
#include "fqhd/stationary.hpp"
#include "fqhd/transient.hpp"

namespace fqhd {

struct NormSpec {
  int order = 0;  ///< 0..3
  /// Add the eps-weighted third and fourth derivative terms in perturbation norms.
  bool eps_weighted = false;
  std::optional<std::vector<double>> weight;

  void validate(std::size_t n_nodes) const;
};

struct DecayFit {
  double gamma = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> window{0.0, 0.0};
};

struct ConvergenceStudy {
  std::vector<double> eps_values;
  std::vector<double> errors;
  double slope = 0.0;
};

/// Trapezoid-weighted l2 norm of f and its first `order` differences.
double discrete_norm(std::span<const double> f, const Grid& grid, const NormSpec& spec);

struct PerturbationNorm {
  double sobolev = 0.0;       ///< ||(w - w~, j - J~, theta - theta~)||_2
  double eps_weighted = 0.0;  ///< ||(eps w_xxx, eps j_xxx, eps^2 w_xxxx)|| of the perturbation
  double total() const { return sobolev + eps_weighted; }
};

PerturbationNorm perturbation_norm_parts(const TransientState& state, const TransientState& anchor, double eps,
                                         const Grid& grid);
double perturbation_norm(const TransientState& state, const TransientState& anchor, double eps, const Grid& grid);
double perturbation_norm(const TransientState& state, const StationaryState& anchor, double eps, const Grid& grid);

/// s - 1 - ln s.
double entropy_psi(double s);

/// Quadrature of the relative energy of `state` with respect to `anchor`.
double energy_xi(const TransientState& state, const TransientState& anchor, const ScenarioParams& params,
                 double alpha = 0.01);
double energy_xi(const TransientState& state, const StationaryState& anchor, const ScenarioParams& params,
                 double alpha = 0.01);

/// Least squares of ln(values) against time over the closed window; gamma = -slope.
DecayFit fit_decay_rate(std::span<const double> times, std::span<const double> values,
                        std::pair<double, double> window);

/// Stationary composite: ||n diff||_1 + |J diff| + ||theta diff||_2 + ||phi diff||_3.
double semiclassical_error(const StationaryState& a, const StationaryState& b, const Grid& grid);

/// Transient composite: ||(n, j, theta) diff||_1 + ||phi diff||_3.
double semiclassical_error(const TransientState& a, const TransientState& b, const Grid& grid);

/// Least-squares slope of log error against log eps; +infinity when any error is zero.
double convergence_slope(const ConvergenceStudy& study);

/// Builds a study and fills in its slope.
ConvergenceStudy make_convergence_study(std::vector<double> eps_values, std::vector<double> errors);

}  // namespace fqhd
