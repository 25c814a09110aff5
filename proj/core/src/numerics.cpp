#include "fqhd/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "fqhd/errors.hpp"

namespace fqhd {

std::vector<double> fd_weights(double x0, std::span<const double> nodes, int order) {
  const int n = static_cast<int>(nodes.size()) - 1;
  if (n < order) throw ShapeError("fd_weights: stencil too small for derivative order");
  // c[k][j]: weight of node j for the k-th derivative.
  std::vector<std::vector<double>> c(order + 1, std::vector<double>(n + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c[order];
}

DerivativeOperator::DerivativeOperator(std::size_t n_cells, double dx, int order) : order_(order) {
  if (order < 0) throw DomainError("DerivativeOperator: negative order");
  const std::size_t n_nodes = n_cells + 1;
  const std::size_t centered = order % 2 == 1 ? order + 2 : order + 1;
  const std::size_t one_sided = order + 2;
  if (order == 0) {
    first_.resize(n_nodes);
    weights_.assign(n_nodes, {1.0});
    for (std::size_t i = 0; i < n_nodes; ++i) first_[i] = i;
    return;
  }
  if (n_nodes < one_sided) throw ShapeError("DerivativeOperator: grid too coarse for derivative order");
  first_.resize(n_nodes);
  weights_.resize(n_nodes);
  const std::size_t half = centered / 2;
  std::vector<double> local;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    std::size_t lo;
    std::size_t width;
    if (i >= half && i + half < n_nodes) {
      lo = i - half;
      width = centered;
    } else {
      width = one_sided;
      lo = i < half ? 0 : n_nodes - width;
    }
    local.resize(width);
    for (std::size_t k = 0; k < width; ++k) local[k] = static_cast<double>(lo + k) - static_cast<double>(i);
    auto w = fd_weights(0.0, local, order);
    const double scale = std::pow(dx, -order);
    for (auto& v : w) v *= scale;
    first_[i] = lo;
    weights_[i] = std::move(w);
  }
}

std::vector<double> DerivativeOperator::apply(std::span<const double> f) const {
  if (f.size() != size()) throw ShapeError("DerivativeOperator: sample length mismatch");
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = at(f, i);
  return out;
}

double trapezoid(std::span<const double> f, double dx) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * dx;
}

std::vector<double> cumulative_trapezoid(std::span<const double> f, double dx) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + 0.5 * dx * (f[i - 1] + f[i]);
  return out;
}

double sobolev_norm(std::span<const double> f, double dx, int order,
                    std::optional<std::span<const double>> weight) {
  if (weight && weight->size() != f.size()) throw ShapeError("sobolev_norm: weight length mismatch");
  const std::size_t n_cells = f.size() - 1;
  double total = 0.0;
  std::vector<double> sq(f.size());
  for (int m = 0; m <= order; ++m) {
    const auto d = m == 0 ? std::vector<double>(f.begin(), f.end()) : DerivativeOperator(n_cells, dx, m).apply(f);
    for (std::size_t i = 0; i < f.size(); ++i) sq[i] = d[i] * d[i] * (weight ? (*weight)[i] : 1.0);
    total += trapezoid(sq, dx);
  }
  return std::sqrt(total);
}

double sup_norm(std::span<const double> f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n) throw ShapeError("solve_tridiagonal: size mismatch");
  std::vector<double> c(n), d(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(diag[i]));
  const double tiny = 1e-14 * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = diag[i] - (i > 0 ? lower[i] * c[i - 1] : 0.0);
    if (!(std::abs(m) > tiny)) throw LinearSolveFailure("solve_tridiagonal: singular pivot");
    c[i] = i + 1 < n ? upper[i] / m : 0.0;
    d[i] = (rhs[i] - (i > 0 ? lower[i] * d[i - 1] : 0.0)) / m;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
  return d;
}

}  // namespace fqhd
