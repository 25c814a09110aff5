#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fqhd {

/// Uniform node grid on [0, 1]: x_i = i * dx, i = 0..n_cells.
class Grid {
 public:
  explicit Grid(std::size_t n_cells);

  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t n_nodes() const noexcept { return n_cells_ + 1; }
  double dx() const noexcept { return dx_; }
  double x(std::size_t i) const noexcept { return nodes_[i]; }
  std::span<const double> nodes() const noexcept { return nodes_; }

  /// Samples f at every node.
  std::vector<double> sample(const std::function<double(double)>& f) const;

  friend bool operator==(const Grid& a, const Grid& b) noexcept { return a.n_cells_ == b.n_cells_; }

 private:
  std::size_t n_cells_;
  double dx_;
  std::vector<double> nodes_;
};

/// Continuous, strictly positive background doping sampled at the nodes.
class DopingProfile {
 public:
  explicit DopingProfile(std::vector<double> samples);

  static DopingProfile flat(const Grid& grid, double level);
  /// High-low-high profile with logistic ramps of width `junction_width` at x = 0.25 and x = 0.75.
  static DopingProfile npn(const Grid& grid, double low, double high, double junction_width);

  std::span<const double> samples() const noexcept { return samples_; }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  double sup_norm() const noexcept { return sup_norm_; }

 private:
  std::vector<double> samples_;
  double sup_norm_;
};

/// Ohmic-contact data: densities and temperatures at both ends, potential at x = 1.
struct BoundaryData {
  double n_l = 1.0;
  double n_r = 1.0;
  double theta_l = 1.0;
  double theta_r = 1.0;
  double phi_r = 0.0;

  /// Throws DomainError unless densities and temperatures are positive.
  void validate() const;

  friend bool operator==(const BoundaryData&, const BoundaryData&) = default;
};

struct ScenarioParams {
  Grid grid;
  DopingProfile doping;
  BoundaryData bd;
  double eps;      ///< scaled Planck constant; 0 selects the classical limit model
  double theta_L;  ///< lattice temperature

  ScenarioParams(Grid grid, DopingProfile doping, BoundaryData bd, double eps, double theta_L);

  double w_l() const;
  double w_r() const;
  /// Same scenario with a different eps.
  ScenarioParams with_eps(double eps) const;
};

/// Node-collocated (n, j, theta, phi) fields.
struct FieldState {
  std::vector<double> n;
  std::vector<double> j;
  std::vector<double> theta;
  std::vector<double> phi;
};

struct AdmissibilityReport {
  double min_density = 0.0;
  double min_temperature = 0.0;
  double min_sound_gap = 0.0;
  bool admissible = false;
};

/// |n_l - n_r| + |theta_l - theta_L| + |theta_r - theta_L| + |phi_r|.
double boundary_strength(const BoundaryData& bd, double theta_L);

/// Subsonic gap theta - j^2 / n^2.
double sound_gap(double n, double j, double theta);

AdmissibilityReport check_admissible(const FieldState& state);

struct DensityBounds {
  double b;
  double B;
};

/// A-priori bounds b <= sqrt(n) <= B of the stationary density.
DensityBounds density_bounds(double n_l, double theta_L, double d_sup);

/// F(a1, a2, a3) = a2^2 / (2 a1^2) + a3 + a3 ln a1 (enthalpy-like primitive of the momentum balance).
double enthalpy_F(double a1, double a2, double a3);

}  // namespace fqhd
