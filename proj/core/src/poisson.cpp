#include "fqhd/poisson.hpp"

#include <algorithm>
#include <cmath>

#include "fqhd/errors.hpp"
#include "fqhd/numerics.hpp"

namespace fqhd {

namespace {

std::vector<double> net_charge(std::span<const double> rho, const DopingProfile& doping, const Grid& grid) {
  if (rho.size() != grid.n_nodes() || doping.size() != grid.n_nodes())
    throw ShapeError("potential_from_density: density length does not match grid");
  std::vector<double> f(rho.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rho[i] - doping[i];
  return f;
}

}  // namespace

double green_kernel(double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) throw DomainError("green_kernel: arguments must lie in [0,1]");
  if (x < y) return x * (y - 1.0);
  if (x > y) return y * (x - 1.0);
  return x * (x - 1.0);
}

std::vector<double> green_matrix(const Grid& grid) {
  const std::size_t n = grid.n_nodes();
  const double dx = grid.dx();
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double wt = (k == 0 || k + 1 == n) ? 0.5 * dx : dx;
      m[i * n + k] = wt * green_kernel(grid.x(i), grid.x(k));
    }
  }
  return m;
}

std::vector<double> potential_from_density(std::span<const double> rho, const DopingProfile& doping, double phi_r,
                                           const Grid& grid, PotentialMethod method) {
  const auto f = net_charge(rho, doping, grid);
  const std::size_t n = f.size();
  const double dx = grid.dx();
  std::vector<double> phi(n);
  if (method == PotentialMethod::double_integral) {
    const auto inner = cumulative_trapezoid(f, dx);
    const auto outer = cumulative_trapezoid(inner, dx);
    const double slope = phi_r - outer.back();
    for (std::size_t i = 0; i < n; ++i) phi[i] = outer[i] + slope * grid.x(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double wt = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
        acc += wt * green_kernel(grid.x(i), grid.x(k)) * f[k];
      }
      phi[i] = acc * dx + phi_r * grid.x(i);
    }
  }
  phi.front() = 0.0;
  phi.back() = phi_r;
  return phi;
}

std::vector<double> potential_gradient(std::span<const double> rho, const DopingProfile& doping, double phi_r,
                                       const Grid& grid) {
  const auto f = net_charge(rho, doping, grid);
  const auto inner = cumulative_trapezoid(f, grid.dx());
  const auto outer = cumulative_trapezoid(inner, grid.dx());
  const double slope = phi_r - outer.back();
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = inner[i] + slope;
  return g;
}

double poisson_residual(std::span<const double> phi, std::span<const double> n, const DopingProfile& doping,
                        const Grid& grid) {
  if (phi.size() != grid.n_nodes() || n.size() != grid.n_nodes()) throw ShapeError("poisson_residual: length mismatch");
  const double inv = 1.0 / (grid.dx() * grid.dx());
  double r = 0.0;
  for (std::size_t i = 1; i + 1 < phi.size(); ++i) {
    const double d2 = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) * inv;
    r = std::max(r, std::abs(d2 - (n[i] - doping[i])));
  }
  return r;
}

double poisson_residual(const FieldState& state, const DopingProfile& doping, const Grid& grid) {
  return poisson_residual(state.phi, state.n, doping, grid);
}

}  // namespace fqhd
