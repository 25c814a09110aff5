#include "fqhd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fqhd/errors.hpp"

namespace fqhd {

Grid::Grid(std::size_t n_cells) : n_cells_(n_cells), dx_(0.0) {
  if (n_cells == 0) throw DomainError("Grid: n_cells must be positive");
  dx_ = 1.0 / static_cast<double>(n_cells);
  nodes_.resize(n_cells + 1);
  for (std::size_t i = 0; i <= n_cells; ++i) nodes_[i] = static_cast<double>(i) / static_cast<double>(n_cells);
}

std::vector<double> Grid::sample(const std::function<double(double)>& f) const {
  std::vector<double> out(n_nodes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(nodes_[i]);
  return out;
}

DopingProfile::DopingProfile(std::vector<double> samples) : samples_(std::move(samples)), sup_norm_(0.0) {
  if (samples_.size() < 2) throw ShapeError("DopingProfile: need at least two samples");
  for (double d : samples_) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("DopingProfile: samples must be finite and positive");
    sup_norm_ = std::max(sup_norm_, std::abs(d));
  }
}

DopingProfile DopingProfile::flat(const Grid& grid, double level) {
  return DopingProfile(std::vector<double>(grid.n_nodes(), level));
}

DopingProfile DopingProfile::npn(const Grid& grid, double low, double high, double junction_width) {
  if (!(low > 0.0) || !(low <= high)) throw DomainError("npn doping: need 0 < low <= high");
  if (!(junction_width > 0.0 && junction_width < 0.25)) throw DomainError("npn doping: junction_width must lie in (0, 0.25)");
  auto ramp = [&](double x, double xj) { return 1.0 / (1.0 + std::exp(-(x - xj) / junction_width)); };
  return DopingProfile(grid.sample([&](double x) { return high - (high - low) * (ramp(x, 0.25) - ramp(x, 0.75)); }));
}

void BoundaryData::validate() const {
  if (!(n_l > 0.0) || !(n_r > 0.0)) throw DomainError("BoundaryData: boundary densities must be positive");
  if (!(theta_l > 0.0) || !(theta_r > 0.0)) throw DomainError("BoundaryData: boundary temperatures must be positive");
  if (!std::isfinite(phi_r)) throw DomainError("BoundaryData: phi_r must be finite");
}

ScenarioParams::ScenarioParams(Grid grid_, DopingProfile doping_, BoundaryData bd_, double eps_, double theta_L_)
    : grid(std::move(grid_)), doping(std::move(doping_)), bd(bd_), eps(eps_), theta_L(theta_L_) {
  if (doping.size() != grid.n_nodes()) throw ShapeError("ScenarioParams: doping length does not match grid");
  bd.validate();
  if (!(eps >= 0.0)) throw DomainError("ScenarioParams: eps must be non-negative");
  if (!(theta_L > 0.0)) throw DomainError("ScenarioParams: theta_L must be positive");
}

double ScenarioParams::w_l() const { return std::sqrt(bd.n_l); }
double ScenarioParams::w_r() const { return std::sqrt(bd.n_r); }

ScenarioParams ScenarioParams::with_eps(double e) const { return ScenarioParams(grid, doping, bd, e, theta_L); }

double boundary_strength(const BoundaryData& bd, double theta_L) {
  return std::abs(bd.n_l - bd.n_r) + std::abs(bd.theta_l - theta_L) + std::abs(bd.theta_r - theta_L) +
         std::abs(bd.phi_r);
}

double sound_gap(double n, double j, double theta) {
  if (!(n > 0.0)) throw DomainError("sound_gap: density must be positive");
  return theta - j * j / (n * n);
}

AdmissibilityReport check_admissible(const FieldState& s) {
  const std::size_t len = s.n.size();
  if (s.j.size() != len || s.theta.size() != len) throw ShapeError("check_admissible: field lengths differ");
  AdmissibilityReport r;
  constexpr double inf = std::numeric_limits<double>::infinity();
  r.min_density = inf;
  r.min_temperature = inf;
  r.min_sound_gap = inf;
  for (std::size_t i = 0; i < len; ++i) {
    r.min_density = std::min(r.min_density, s.n[i]);
    r.min_temperature = std::min(r.min_temperature, s.theta[i]);
    // A vacuum node has no defined gap; it already fails the density test.
    const double gap = s.n[i] > 0.0 ? sound_gap(s.n[i], s.j[i], s.theta[i]) : -inf;
    r.min_sound_gap = std::min(r.min_sound_gap, gap);
  }
  r.admissible = r.min_density > 0.0 && r.min_temperature > 0.0 && r.min_sound_gap > 0.0;
  return r;
}

DensityBounds density_bounds(double n_l, double theta_L, double d_sup) {
  // d_sup = 0 is accepted as the degenerate limit of a vanishing doping.
  if (!(n_l > 0.0) || !(theta_L > 0.0) || !(d_sup >= 0.0)) throw DomainError("density_bounds: inputs must be positive");
  const double B = 1.5 * std::sqrt(n_l) * std::exp(2.0 * d_sup / theta_L);
  const double b = 0.5 * std::sqrt(n_l) * std::exp(-(B * B + 2.0 * d_sup) / theta_L);
  return {b, B};
}

double enthalpy_F(double a1, double a2, double a3) {
  if (!(a1 > 0.0)) throw DomainError("enthalpy_F: a1 must be positive");
  return a2 * a2 / (2.0 * a1 * a1) + a3 + a3 * std::log(a1);
}

}  // namespace fqhd
