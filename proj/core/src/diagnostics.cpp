#include "fqhd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fqhd/errors.hpp"
#include "fqhd/numerics.hpp"
#include "fqhd/poisson.hpp"

namespace fqhd {

namespace {

std::vector<double> diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("diagnostics: sample lengths differ");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

std::vector<double> squares(std::span<const double> w) {
  std::vector<double> n(w.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = w[i] * w[i];
  return n;
}

void require_grid(const TransientState& s, const Grid& g, const char* what) {
  const std::size_t n = g.n_nodes();
  if (s.w.size() != n || s.j.size() != n || s.theta.size() != n)
    throw ShapeError(std::string(what) + ": state does not match grid");
}

double l2(std::span<const double> f, double dx) {
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f[i] * f[i];
  return trapezoid(sq, dx);
}

struct Line {
  double slope, intercept, r_squared;
};

Line least_squares(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("least squares: abscissae are all equal");
  const double slope = sxy / sxx;
  double r2 = 1.0;
  if (syy > 0.0) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - (my + slope * (x[i] - mx));
      ssr += e * e;
    }
    r2 = std::clamp(1.0 - ssr / syy, 0.0, 1.0);
  }
  return {slope, my - slope * mx, r2};
}

}  // namespace

void NormSpec::validate(std::size_t n_nodes) const {
  if (order < 0 || order > 3) throw DomainError("NormSpec: order must lie in 0..3");
  if (weight) {
    if (weight->size() != n_nodes) throw ShapeError("NormSpec: weight length does not match grid");
    for (double v : *weight)
      if (!(v > 0.0)) throw DomainError("NormSpec: weight must be positive");
  }
}

double discrete_norm(std::span<const double> f, const Grid& grid, const NormSpec& spec) {
  if (f.size() != grid.n_nodes()) throw ShapeError("discrete_norm: sample length does not match grid");
  spec.validate(grid.n_nodes());
  if (spec.weight) return sobolev_norm(f, grid.dx(), spec.order, std::span<const double>(*spec.weight));
  return sobolev_norm(f, grid.dx(), spec.order);
}

PerturbationNorm perturbation_norm_parts(const TransientState& state, const TransientState& anchor, double eps,
                                         const Grid& grid) {
  require_grid(state, grid, "perturbation_norm");
  require_grid(anchor, grid, "perturbation_norm");
  if (!(eps >= 0.0)) throw DomainError("perturbation_norm: eps must be non-negative");
  const double dx = grid.dx();
  const auto dw = field_difference(state, anchor, 0);
  const auto dj = field_difference(state, anchor, 1);
  const auto dth = field_difference(state, anchor, 2);
  PerturbationNorm r;
  const double a = sobolev_norm(dw, dx, 2), b = sobolev_norm(dj, dx, 2), c = sobolev_norm(dth, dx, 2);
  r.sobolev = std::sqrt(a * a + b * b + c * c);
  if (eps > 0.0) {
    const DerivativeOperator d3(grid.n_cells(), dx, 3), d4(grid.n_cells(), dx, 4);
    auto w3 = d3.apply(dw), j3 = d3.apply(dj), w4 = d4.apply(dw);
    const double e2 = eps * eps * (l2(w3, dx) + l2(j3, dx)) + std::pow(eps, 4) * l2(w4, dx);
    r.eps_weighted = std::sqrt(e2);
  }
  return r;
}

double perturbation_norm(const TransientState& state, const TransientState& anchor, double eps, const Grid& grid) {
  return perturbation_norm_parts(state, anchor, eps, grid).total();
}

double perturbation_norm(const TransientState& state, const StationaryState& anchor, double eps, const Grid& grid) {
  return perturbation_norm(state, from_stationary(anchor), eps, grid);
}

double entropy_psi(double s) {
  if (!(s > 0.0)) throw DomainError("entropy_psi: argument must be positive");
  return s - 1.0 - std::log(s);
}

double energy_xi(const TransientState& state, const TransientState& anchor, const ScenarioParams& params,
                 double alpha) {
  const Grid& g = params.grid;
  require_grid(state, g, "energy_xi");
  require_grid(anchor, g, "energy_xi");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("energy_xi: alpha must lie in (0, 1)");
  for (std::size_t i = 0; i < state.w.size(); ++i) {
    if (!(state.w[i] > 0.0) || !(anchor.w[i] > 0.0) || !(anchor.theta[i] > 0.0))
      throw DomainError("energy_xi: inadmissible state or anchor");
  }
  const double dx = g.dx();
  const auto dw = field_difference(state, anchor, 0);
  const auto djs = field_difference(state, anchor, 1);
  const auto dths = field_difference(state, anchor, 2);
  const auto wx = DerivativeOperator(g.n_cells(), dx, 1).apply(dw);
  const auto ex = potential_gradient(squares(state.w), params.doping, params.bd.phi_r, g);
  const auto ea = potential_gradient(squares(anchor.w), params.doping, params.bd.phi_r, g);
  const double e2 = params.eps * params.eps;
  std::vector<double> f(state.w.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double w2 = state.w[i] * state.w[i];
    const double wa2 = anchor.w[i] * anchor.w[i];
    const double dj = djs[i];
    const double dth = dths[i];
    const double dphix = ex[i] - ea[i];
    // Psi(wa2 / w2) = h - log1p(h) with h = wa2 / w2 - 1, free of cancellation for small perturbations.
    const double h = -dw[i] * (state.w[i] + anchor.w[i]) / w2;
    const double psi = h - std::log1p(h);
    f[i] = dj * dj / (2.0 * w2) + anchor.theta[i] * w2 * psi + e2 * wx[i] * wx[i] +
           0.5 * dphix * dphix + 3.0 * w2 / (4.0 * anchor.theta[i]) * dth * dth -
           alpha * (state.j[i] / w2 - anchor.j[i] / wa2) * dphix;
  }
  return trapezoid(f, dx);
}

double energy_xi(const TransientState& state, const StationaryState& anchor, const ScenarioParams& params,
                 double alpha) {
  return energy_xi(state, from_stationary(anchor), params, alpha);
}

DecayFit fit_decay_rate(std::span<const double> times, std::span<const double> values,
                        std::pair<double, double> window) {
  if (times.size() != values.size()) throw ShapeError("fit_decay_rate: times and values differ in length");
  const double slack = 1e-9 * std::max(1.0, std::abs(window.second));
  std::vector<double> t, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < window.first - slack || times[i] > window.second + slack) continue;
    if (!(values[i] > 0.0)) throw DomainError("fit_decay_rate: values must be positive");
    t.push_back(times[i]);
    y.push_back(std::log(values[i]));
  }
  if (t.size() < 3) throw DomainError("fit_decay_rate: fewer than 3 points in the window");
  const auto line = least_squares(t, y);
  return {-line.slope, std::exp(line.intercept), line.r_squared, window};
}

double semiclassical_error(const StationaryState& a, const StationaryState& b, const Grid& grid) {
  const std::size_t n = grid.n_nodes();
  if (a.w.size() != n || b.w.size() != n || a.theta.size() != n || b.theta.size() != n || a.phi.size() != n ||
      b.phi.size() != n)
    throw ShapeError("semiclassical_error: states do not match grid");
  const double dx = grid.dx();
  return sobolev_norm(diff(squares(a.w), squares(b.w)), dx, 1) + std::abs(a.J - b.J) +
         sobolev_norm(diff(a.theta, b.theta), dx, 2) + sobolev_norm(diff(a.phi, b.phi), dx, 3);
}

double semiclassical_error(const TransientState& a, const TransientState& b, const Grid& grid) {
  require_grid(a, grid, "semiclassical_error");
  require_grid(b, grid, "semiclassical_error");
  if (a.phi.size() != grid.n_nodes() || b.phi.size() != grid.n_nodes())
    throw ShapeError("semiclassical_error: potential does not match grid");
  const double dx = grid.dx();
  const double dn = sobolev_norm(diff(squares(a.w), squares(b.w)), dx, 1);
  const double dj = sobolev_norm(diff(a.j, b.j), dx, 1);
  const double dth = sobolev_norm(diff(a.theta, b.theta), dx, 1);
  return std::sqrt(dn * dn + dj * dj + dth * dth) + sobolev_norm(diff(a.phi, b.phi), dx, 3);
}

double convergence_slope(const ConvergenceStudy& study) {
  const auto& e = study.eps_values;
  const auto& r = study.errors;
  if (e.size() != r.size()) throw ShapeError("convergence_slope: eps and error counts differ");
  if (e.size() < 3) throw DomainError("convergence_slope: need at least 3 eps values");
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(e[i] > 0.0)) throw DomainError("convergence_slope: eps values must be positive");
    if (i > 0 && !(e[i] < e[i - 1])) throw DomainError("convergence_slope: eps values must strictly decrease");
    if (r[i] < 0.0 || std::isnan(r[i])) throw DomainError("convergence_slope: errors must be non-negative");
  }
  if (std::any_of(r.begin(), r.end(), [](double v) { return v == 0.0; }))
    return std::numeric_limits<double>::infinity();
  std::vector<double> x(e.size()), y(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    x[i] = std::log(e[i]);
    y[i] = std::log(r[i]);
  }
  return least_squares(x, y).slope;
}

ConvergenceStudy make_convergence_study(std::vector<double> eps_values, std::vector<double> errors) {
  ConvergenceStudy s{std::move(eps_values), std::move(errors), 0.0};
  s.slope = convergence_slope(s);
  return s;
}

}  // namespace fqhd
