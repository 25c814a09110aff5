#include "fqhd/stationary.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fqhd/errors.hpp"
#include "fqhd/numerics.hpp"
#include "fqhd/poisson.hpp"

namespace fqhd {

namespace {

void require_length(std::span<const double> f, const Grid& grid, const char* what) {
  if (f.size() != grid.n_nodes()) throw ShapeError(std::string(what) + ": sample length does not match grid");
}

void require_positive(std::span<const double> f, const char* what) {
  for (double v : f)
    if (!(v > 0.0)) throw DomainError(std::string(what) + ": samples must be positive");
}

/// The integrals entering the current-voltage relation.
struct CurrentIntegrals {
  double inv_density;  // int w^-2
  double heat_work;    // int theta_x ln w^2
  double b_bar;
};

double b_bar(const ScenarioParams& p) {
  const auto& bd = p.bd;
  return bd.phi_r - bd.theta_r + bd.theta_l - bd.theta_r * std::log(bd.n_r) + bd.theta_l * std::log(bd.n_l);
}

/// theta_x * ln w^2 at the nodes (centered differences, one-sided at the ends).
std::vector<double> heat_work_density(std::span<const double> w, std::span<const double> theta, const Grid& grid) {
  const DerivativeOperator d1(grid.n_cells(), grid.dx(), 1);
  std::vector<double> f(w.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d1.at(theta, i) * std::log(w[i] * w[i]);
  return f;
}

CurrentIntegrals current_integrals(std::span<const double> w, std::span<const double> theta,
                                   const ScenarioParams& p) {
  require_length(w, p.grid, "current integrals");
  require_length(theta, p.grid, "current integrals");
  require_positive(w, "current integrals");
  std::vector<double> inv(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) inv[i] = 1.0 / (w[i] * w[i]);
  return {trapezoid(inv, p.grid.dx()), trapezoid(heat_work_density(w, theta, p.grid), p.grid.dx()), b_bar(p)};
}

double K_from(const CurrentIntegrals& c, const ScenarioParams& p) {
  const double delta_inv = 1.0 / (p.bd.n_r * p.bd.n_r) - 1.0 / (p.bd.n_l * p.bd.n_l);
  const double disc = c.inv_density * c.inv_density + 2.0 * (c.b_bar + c.heat_work) * delta_inv;
  if (disc < 0.0) throw SupersonicRegime("current-voltage relation has no real root (negative discriminant)");
  return c.inv_density + std::sqrt(disc);
}

double J_from(const CurrentIntegrals& c, const ScenarioParams& p) { return 2.0 * (c.b_bar + c.heat_work) / K_from(c, p); }

std::vector<double> clamp_all(std::span<const double> u, double lo, double hi) {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::clamp(u[i], lo, hi);
  return out;
}

std::vector<double> squares(std::span<const double> u) {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * u[i];
  return out;
}

/// phi = M (u^2 - D) + phi_r x with the Green quadrature matrix M (row-major, n x n).
std::vector<double> green_potential(std::span<const double> u, const std::vector<double>& m, const ScenarioParams& p) {
  const std::size_t n = u.size();
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = u[k] * u[k] - p.doping[k];
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += m[i * n + k] * f[k];
    phi[i] = acc + p.bd.phi_r * p.grid.x(i);
  }
  phi.front() = 0.0;
  phi.back() = p.bd.phi_r;
  return phi;
}

/// h = u * bracket; returns the bracket so the Newton Jacobian can reuse it.
std::vector<double> h_bracket(std::span<const double> u, std::span<const double> q, double J,
                              std::span<const double> phi, const ScenarioParams& p) {
  const double dx = p.grid.dx();
  const auto work = cumulative_trapezoid(heat_work_density(u, q, p.grid), dx);
  std::vector<double> inv(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) inv[i] = 1.0 / (u[i] * u[i]);
  const auto inv_int = cumulative_trapezoid(inv, dx);
  const double anchor = enthalpy_F(u[0] * u[0], J, q[0]);
  std::vector<double> br(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    br[i] = enthalpy_F(u[i] * u[i], J, q[i]) - anchor - phi[i] - work[i] + J * inv_int[i];
  return br;
}

/// Temperature problem in bordered form: T Q_int + r s = rhs, s = c . Q_int + s_boundary.
struct TemperatureSystem {
  std::vector<double> lower, diag, upper, rhs, r, c;
  double s_boundary = 0.0;
};

TemperatureSystem assemble_P2(std::span<const double> u, std::span<const double> q, const ScenarioParams& p) {
  const Grid& g = p.grid;
  const std::size_t n = g.n_nodes();
  const std::size_t m = n - 2;
  const double dx = g.dx();
  const double tl = p.theta_L;
  const auto ci = current_integrals(u, q, p);
  const double K = K_from(ci, p);
  const double J = 2.0 * (ci.b_bar + ci.heat_work) / K;
  const double bb = ci.b_bar;

  std::vector<double> lnn(n);
  for (std::size_t i = 0; i < n; ++i) lnn[i] = std::log(u[i] * u[i]);
  const DerivativeOperator d1(g.n_cells(), dx, 1);
  const auto lnn_x = d1.apply(lnn);
  const auto gsrc = rhs_g(u, J, p.eps, g);

  TemperatureSystem s;
  s.lower.resize(m);
  s.diag.resize(m);
  s.upper.resize(m);
  s.rhs.resize(m);
  s.r.resize(m);
  const double diff = (2.0 / 3.0) / (dx * dx);
  const double adv = J / (2.0 * dx);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const std::size_t k = i - 1;
    const double u2 = u[i] * u[i];
    s.lower[k] = diff + adv;
    s.upper[k] = diff - adv;
    s.diag[k] = -2.0 * diff + (2.0 / 3.0) * J * lnn_x[i] - u2;
    s.r[k] = (2.0 / 3.0) * tl * lnn_x[i] * 2.0 / K;
    s.rhs[k] = gsrc[i] + (2.0 / 3.0) * J * lnn_x[i] * tl - u2 * tl - s.r[k] * bb;
  }
  s.rhs.front() -= s.lower.front() * p.bd.theta_l;
  s.rhs.back() -= s.upper.back() * p.bd.theta_r;

  // s = int Q_x ln u^2 as a linear functional of all node values of Q.
  std::vector<double> coef(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double wt = (k == 0 || k + 1 == n) ? 0.5 * dx : dx;
    const auto w = d1.weights(k);
    for (std::size_t l = 0; l < w.size(); ++l) coef[d1.first(k) + l] += wt * lnn[k] * w[l];
  }
  s.c.assign(coef.begin() + 1, coef.end() - 1);
  s.s_boundary = coef.front() * p.bd.theta_l + coef.back() * p.bd.theta_r;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> affine(const Grid& g, double left, double right) {
  return g.sample([&](double x) { return left * (1.0 - x) + right * x; });
}

StationaryState run_fixed_point(const ScenarioParams& params, const SolverSettings& settings,
                                StationaryStats* stats) {
  settings.validate();
  const double delta = boundary_strength(params.bd, params.theta_L);
  if (delta > settings.delta_max)
    throw OutOfRegime("boundary strength " + std::to_string(delta) + " exceeds delta_max");
  const Grid& g = params.grid;
  const double dx = g.dx();

  std::vector<double> q = affine(g, params.bd.theta_l, params.bd.theta_r);
  std::vector<double> u = affine(g, params.w_l(), params.w_r());
  StationaryStats st;
  bool converged = false;
  for (int it = 1; it <= settings.fp_max_iter; ++it) {
    int newton = 0;
    u = solve_P1(q, params, settings, std::span<const double>(u), &newton);
    st.newton_iterations += newton;
    const auto Q = solve_P2(u, q, params, settings);
    std::vector<double> change(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) change[i] = Q[i] - q[i];
    st.fixed_point_change = sobolev_norm(change, dx, 1);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += settings.damping * change[i];
    st.fixed_point_iterations = it;
    if (st.fixed_point_change <= settings.fp_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw IterationLimit("temperature fixed point did not converge");
  int newton = 0;
  u = solve_P1(q, params, settings, std::span<const double>(u), &newton);
  st.newton_iterations += newton;

  StationaryState s;
  s.w = std::move(u);
  s.theta = std::move(q);
  s.J = current_J(s.w, s.theta, params);
  s.phi = potential_from_density(s.density(), params.doping, params.bd.phi_r, g, PotentialMethod::green_kernel);
  s.eps = params.eps;

  const auto report = check_admissible(s.fields());
  if (!report.admissible) throw OutOfRegime("stationary solution violates the subsonic/positivity conditions");
  const auto bounds = density_bounds(params.bd.n_l, params.theta_L, params.doping.sup_norm());
  const double slack = 1e-8;
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    if (s.w[i] < bounds.b - slack || s.w[i] > bounds.B + slack)
      throw OutOfRegime("stationary density leaves the a-priori box [b^2, B^2]");
    if (s.theta[i] < 0.5 * params.theta_L || s.theta[i] > 1.5 * params.theta_L)
      throw OutOfRegime("stationary temperature leaves [theta_L/2, 3 theta_L/2]");
  }

  const DerivativeOperator d2(g.n_cells(), dx, 2);
  st.wxx_left = d2.at<double>(s.w, 0);
  st.wxx_right = d2.at<double>(s.w, g.n_cells());
  st.residual = stationary_residual(s, params);
  if (stats) *stats = st;
  return s;
}

}  // namespace

std::vector<double> StationaryState::density() const { return squares(w); }

FieldState StationaryState::fields() const {
  return FieldState{density(), std::vector<double>(w.size(), J), theta, phi};
}

void SolverSettings::validate() const {
  if (!(newton_tol > 0.0) || !(fp_tol > 0.0)) throw DomainError("SolverSettings: tolerances must be positive");
  if (newton_max_iter < 1 || fp_max_iter < 1) throw DomainError("SolverSettings: iteration caps must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("SolverSettings: damping must lie in (0, 1]");
}

double K_functional(std::span<const double> w, std::span<const double> theta, const ScenarioParams& params) {
  return K_from(current_integrals(w, theta, params), params);
}

double current_J(std::span<const double> w, std::span<const double> theta, const ScenarioParams& params) {
  return J_from(current_integrals(w, theta, params), params);
}

double cvr_residual(double J, std::span<const double> w, std::span<const double> theta,
                    const ScenarioParams& params) {
  const auto c = current_integrals(w, theta, params);
  const auto& bd = params.bd;
  return enthalpy_F(bd.n_r, J, bd.theta_r) - enthalpy_F(bd.n_l, J, bd.theta_l) - bd.phi_r - c.heat_work +
         J * c.inv_density;
}

std::vector<double> rhs_h(std::span<const double> u, std::span<const double> q, double J,
                          std::span<const double> phi, const ScenarioParams& params) {
  require_length(u, params.grid, "rhs_h");
  require_length(q, params.grid, "rhs_h");
  require_length(phi, params.grid, "rhs_h");
  require_positive(u, "rhs_h");
  require_positive(q, "rhs_h");
  auto h = h_bracket(u, q, J, phi, params);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] *= u[i];
  return h;
}

std::vector<double> rhs_g(std::span<const double> u, double J, double eps, const Grid& grid) {
  require_length(u, grid, "rhs_g");
  require_positive(u, "rhs_g");
  if (!(eps >= 0.0)) throw DomainError("rhs_g: eps must be non-negative");
  std::vector<double> g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = -J * J / (3.0 * u[i] * u[i]);
  if (eps == 0.0 || J == 0.0) return g;
  const DerivativeOperator d1(grid.n_cells(), grid.dx(), 1), d2(grid.n_cells(), grid.dx(), 2),
      d3(grid.n_cells(), grid.dx(), 3);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ux = d1.at(u, i), uxx = d2.at(u, i), uxxx = d3.at(u, i), v = u[i];
    g[i] += eps * eps * J / 3.0 *
            (12.0 * ux * ux * ux / (v * v * v) - 14.0 * ux * uxx / (v * v) + 2.0 * uxxx / v);
  }
  return g;
}

std::vector<double> solve_P1(std::span<const double> q, const ScenarioParams& params, const SolverSettings& settings,
                             std::optional<std::span<const double>> initial_guess, int* iterations) {
  const Grid& g = params.grid;
  require_length(q, g, "solve_P1");
  require_positive(q, "solve_P1");
  const std::size_t n = g.n_nodes();
  const std::size_t m = n - 2;
  const double dx = g.dx();
  const double e2 = params.eps * params.eps;
  const double e2dx = e2 / (dx * dx);

  const auto bounds = density_bounds(params.bd.n_l, params.theta_L, params.doping.sup_norm());
  const double beta = 0.5 * bounds.b;
  const double alpha = 2.0 * bounds.B;
  const auto green = green_matrix(g);

  std::vector<double> u;
  if (initial_guess) {
    require_length(*initial_guess, g, "solve_P1 initial guess");
    u.assign(initial_guess->begin(), initial_guess->end());
  } else {
    u = affine(g, params.w_l(), params.w_r());
  }
  u.front() = params.w_l();
  u.back() = params.w_r();

  // Residual of the truncated problem; J, phi and the running integrals are all re-evaluated.
  struct Eval {
    std::vector<double> ut, bracket, residual;
    double J = 0.0, norm = 0.0;
  };
  auto evaluate = [&](const std::vector<double>& uu) {
    Eval e;
    e.ut = clamp_all(uu, beta, alpha);
    e.J = current_J(e.ut, q, params);
    const auto phi = green_potential(e.ut, green, params);
    e.bracket = h_bracket(e.ut, q, e.J, phi, params);
    e.residual.resize(m);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double d2 = e2dx * (uu[i + 1] - 2.0 * uu[i] + uu[i - 1]);
      e.residual[i - 1] = d2 - e.ut[i] * e.bracket[i];
      e.norm = std::max(e.norm, std::abs(e.residual[i - 1]));
    }
    return e;
  };

  Eval cur = evaluate(u);
  Eigen::MatrixXd jac(m, m);
  Eigen::VectorXd rhs(m);
  for (int it = 0; it <= settings.newton_max_iter; ++it) {
    if (cur.norm <= settings.newton_tol) {
      if (iterations) *iterations = it;
      for (std::size_t i = 0; i < n; ++i)
        if (u[i] <= beta || u[i] >= alpha)
          throw OutOfRegime("density truncation active at convergence; boundary data too strong");
      return u;
    }
    if (it == settings.newton_max_iter) break;
    // Local terms are linearized exactly and the potential through the Green matrix;
    // J and the running integrals are frozen at the current iterate.
    jac.setZero();
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const std::size_t r = i - 1;
      const bool free_i = u[i] > beta && u[i] < alpha;
      jac(r, r) = -2.0 * e2dx;
      if (r > 0) jac(r, r - 1) = e2dx;
      if (r + 1 < m) jac(r, r + 1) = e2dx;
      if (free_i) {
        const double v = cur.ut[i];
        jac(r, r) -= cur.bracket[i] + 2.0 * q[i] - 2.0 * cur.J * cur.J / (v * v * v * v);
      }
      for (std::size_t k = 1; k + 1 < n; ++k) {
        if (u[k] <= beta || u[k] >= alpha) continue;
        jac(r, k - 1) += cur.ut[i] * green[i * n + k] * 2.0 * cur.ut[k];
      }
      rhs(r) = -cur.residual[r];
    }
    const Eigen::VectorXd step = jac.partialPivLu().solve(rhs);
    if (!step.allFinite()) throw LinearSolveFailure("solve_P1: Newton system is singular");
    double lambda = 1.0;
    for (int ls = 0; ls < 12; ++ls) {
      std::vector<double> trial = u;
      for (std::size_t i = 1; i + 1 < n; ++i) trial[i] += lambda * step(i - 1);
      Eval next = evaluate(trial);
      if (next.norm < cur.norm || ls == 11) {
        u = std::move(trial);
        cur = std::move(next);
        break;
      }
      lambda *= 0.5;
    }
  }
  throw IterationLimit("solve_P1: Newton did not converge");
}

double p1_residual(std::span<const double> u, std::span<const double> q, const ScenarioParams& params) {
  const Grid& g = params.grid;
  require_length(u, g, "p1_residual");
  const double J = current_J(u, q, params);
  const auto phi = potential_from_density(squares(u), params.doping, params.bd.phi_r, g, PotentialMethod::green_kernel);
  const auto h = rhs_h(u, q, J, phi, params);
  const double e2dx = params.eps * params.eps / (g.dx() * g.dx());
  double r = 0.0;
  for (std::size_t i = 1; i + 1 < u.size(); ++i)
    r = std::max(r, std::abs(e2dx * (u[i + 1] - 2.0 * u[i] + u[i - 1]) - h[i]));
  return r;
}

std::vector<double> solve_P2(std::span<const double> u, std::span<const double> q, const ScenarioParams& params,
                             const SolverSettings&) {
  require_length(u, params.grid, "solve_P2");
  require_length(q, params.grid, "solve_P2");
  require_positive(u, "solve_P2");
  const auto s = assemble_P2(u, q, params);
  const auto y = solve_tridiagonal(s.lower, s.diag, s.upper, s.rhs);
  const auto z = solve_tridiagonal(s.lower, s.diag, s.upper, s.r);
  const double denom = 1.0 + dot(s.c, z);
  if (!(std::abs(denom) > 1e-12)) throw LinearSolveFailure("solve_P2: bordered system is singular");
  const double sval = (s.s_boundary + dot(s.c, y)) / denom;
  std::vector<double> Q(u.size());
  Q.front() = params.bd.theta_l;
  Q.back() = params.bd.theta_r;
  for (std::size_t k = 0; k < y.size(); ++k) Q[k + 1] = y[k] - z[k] * sval;
  return Q;
}

double p2_residual(std::span<const double> Q, std::span<const double> u, std::span<const double> q,
                   const ScenarioParams& params) {
  require_length(Q, params.grid, "p2_residual");
  const auto s = assemble_P2(u, q, params);
  const std::size_t m = s.diag.size();
  const std::span<const double> Qi(Q.data() + 1, m);
  const double sval = dot(s.c, Qi) + s.s_boundary;
  double r = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    // Boundary values were folded into rhs for the first and last rows.
    double lhs = s.diag[k] * Qi[k] + s.r[k] * sval;
    if (k > 0) lhs += s.lower[k] * Qi[k - 1];
    if (k + 1 < m) lhs += s.upper[k] * Qi[k + 1];
    r = std::max(r, std::abs(lhs - s.rhs[k]));
  }
  return r;
}

StationaryState solve_stationary(const ScenarioParams& params, const SolverSettings& settings,
                                 StationaryStats* stats) {
  if (!(params.eps > 0.0)) throw DomainError("solve_stationary: eps must be positive; use solve_stationary_limit");
  return run_fixed_point(params, settings, stats);
}

StationaryState solve_stationary_limit(const ScenarioParams& params, const SolverSettings& settings,
                                       StationaryStats* stats) {
  if (params.eps != 0.0) throw DomainError("solve_stationary_limit: eps must be 0");
  return run_fixed_point(params, settings, stats);
}

double stationary_residual(const StationaryState& state, const ScenarioParams& params) {
  const double r1 = p1_residual(state.w, state.theta, params);
  const double r2 = p2_residual(state.theta, state.w, state.theta, params);
  const double r3 = std::abs(cvr_residual(state.J, state.w, state.theta, params));
  return std::max({r1, r2, r3});
}

}  // namespace fqhd
