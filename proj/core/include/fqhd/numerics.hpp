#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fqhd {

/// Finite-difference weights for the `order`-th derivative at `x0` on arbitrary `nodes`
/// (Fornberg's recursion). Exact for polynomials of degree < nodes.size().
std::vector<double> fd_weights(double x0, std::span<const double> nodes, int order);

/// Second-order accurate derivative operator on a uniform node grid.
///
/// Interior nodes use the centered stencil; nodes too close to an endpoint use a
/// one-sided window of matching (second) order, shifted inside the domain.
class DerivativeOperator {
 public:
  DerivativeOperator(std::size_t n_cells, double dx, int order);

  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return first_.size(); }

  /// First node index of the stencil used at node `i`.
  std::size_t first(std::size_t i) const { return first_[i]; }
  std::span<const double> weights(std::size_t i) const { return weights_[i]; }

  template <class T>
  T at(std::span<const T> f, std::size_t i) const {
    const auto& w = weights_[i];
    T acc = w[0] * f[first_[i]];
    for (std::size_t k = 1; k < w.size(); ++k) acc = acc + w[k] * f[first_[i] + k];
    return acc;
  }

  std::vector<double> apply(std::span<const double> f) const;

 private:
  int order_;
  std::vector<std::size_t> first_;
  std::vector<std::vector<double>> weights_;
};

/// Composite trapezoid rule over the node samples.
double trapezoid(std::span<const double> f, double dx);

/// Running trapezoid integral: out[0] = 0, out[i] = integral from x_0 to x_i.
std::vector<double> cumulative_trapezoid(std::span<const double> f, double dx);

/// Discrete H^order norm: sqrt(sum_{m<=order} trapezoid(weight * (D^m f)^2)).
double sobolev_norm(std::span<const double> f, double dx, int order,
                    std::optional<std::span<const double>> weight = std::nullopt);

/// Maximum absolute value.
double sup_norm(std::span<const double> f);

/// Thomas algorithm for a tridiagonal system; lower[0] and upper[n-1] are ignored.
/// Throws LinearSolveFailure on a vanishing pivot.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

}  // namespace fqhd
