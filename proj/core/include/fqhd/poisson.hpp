#pragma once

#include <span>
#include <vector>

#include "fqhd/model.hpp"

namespace fqhd {

/// How the potential is assembled from the charge density.
enum class PotentialMethod {
  green_kernel,     ///< phi(x) = int G(x,y)(rho - D)(y) dy + phi_r x
  double_integral,  ///< phi(x) = int_0^x int_0^y (rho - D) + c x
};

/// Dirichlet Green function of d^2/dx^2 on (0,1). Non-positive and symmetric.
double green_kernel(double x, double y);

/// Potential with phi(0) = 0, phi(1) = phi_r from density samples, by composite-trapezoid quadrature.
std::vector<double> potential_from_density(std::span<const double> rho, const DopingProfile& doping, double phi_r,
                                           const Grid& grid,
                                           PotentialMethod method = PotentialMethod::double_integral);

/// phi_x at the nodes, consistent with the double-integral quadrature:
/// phi_x(x_i) = int_0^{x_i} (rho - D) + c.
std::vector<double> potential_gradient(std::span<const double> rho, const DopingProfile& doping, double phi_r,
                                       const Grid& grid);

/// Dense quadrature matrix M of the Green form: phi_i = sum_k M_ik (rho_k - D_k) + phi_r x_i.
std::vector<double> green_matrix(const Grid& grid);

/// max over interior nodes of |D2 phi - (n - D)|.
double poisson_residual(std::span<const double> phi, std::span<const double> n, const DopingProfile& doping,
                        const Grid& grid);

double poisson_residual(const FieldState& state, const DopingProfile& doping, const Grid& grid);

}  // namespace fqhd
