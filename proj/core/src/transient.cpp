#include "fqhd/transient.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dual.hpp"
#include "fqhd/errors.hpp"
#include "fqhd/numerics.hpp"
#include "fqhd/poisson.hpp"

namespace fqhd {

namespace {

using detail::Dual;
using detail::value;
// Steps are computed in extended precision and stored as double hi/lo pairs, so that small perturbations
// of an O(1) state keep their own relative precision through the high-order difference stencils.
using Real = long double;
using RVec = std::vector<Real>;

constexpr double kVacuum = 1e-8;
constexpr std::size_t kRadius = 3;  // residual row at node i touches nodes i-3 .. i+3
constexpr std::size_t kColors = 2 * kRadius + 1;

void require_state(const TransientState& s, const Grid& g, const char* what) {
  const std::size_t n = g.n_nodes();
  if (s.w.size() != n || s.j.size() != n || s.theta.size() != n)
    throw ShapeError(std::string(what) + ": state length does not match grid");
  const auto bad_lo = [n](const std::vector<double>& lo) { return !lo.empty() && lo.size() != n; };
  if (bad_lo(s.w_lo) || bad_lo(s.j_lo) || bad_lo(s.theta_lo))
    throw ShapeError(std::string(what) + ": low-order parts do not match grid");
  if (g.n_cells() < 6) throw ShapeError(std::string(what) + ": need at least 6 cells");
}

Real joined(const std::vector<double>& hi, const std::vector<double>& lo, std::size_t i) {
  return static_cast<Real>(hi[i]) + (lo.empty() ? Real(0) : static_cast<Real>(lo[i]));
}

/// Spatial part of the three equations. Unknowns (w, j, th) enter linearly where the frozen-coefficient
/// scheme keeps them new; the coefficient fields (cw, cj, cth) are the unknowns themselves for the fully
/// implicit scheme. Output: fw = j_x, fj and fth everything except the time derivative terms.
template <class T, class C>
void spatial(std::span<const T> w, std::span<const T> j, std::span<const T> th, std::span<const C> cw,
             std::span<const C> cj, std::span<const C> cth, std::span<const Real> phix, const ScenarioParams& p,
             std::span<T> fw, std::span<T> fj, std::span<T> fth) {
  const std::size_t n = w.size();
  const std::size_t last = n - 1;
  const double dx = p.grid.dx();
  const double h2 = 2.0 * dx;
  const double idx2 = 1.0 / (dx * dx);
  const double e2 = p.eps * p.eps;

  for (std::size_t i = 0; i < n; ++i)
    if (!(value(cw[i]) > 0.0) || !(value(w[i]) > 0.0)) throw Vacuum("density vanished during time stepping");

  auto d1 = [&](std::span<const T> f, std::size_t i) -> T {
    if (i == 0) return (-3.0 * f[0] + 4.0 * f[1] - f[2]) / h2;
    if (i == last) return (3.0 * f[last] - 4.0 * f[last - 1] + f[last - 2]) / h2;
    return (f[i + 1] - f[i - 1]) / h2;
  };

  std::vector<T> bohm(n, T(0.0));
  std::vector<C> v(n), disp(n, C(0.0));
  for (std::size_t k = 0; k < n; ++k) v[k] = cj[k] / (cw[k] * cw[k]);
  if (e2 > 0.0) {
    for (std::size_t k = 1; k < last; ++k) {
      bohm[k] = (w[k + 1] - 2.0 * w[k] + w[k - 1]) * idx2 / cw[k];
      disp[k] = cw[k] * cw[k] * (v[k + 1] - 2.0 * v[k] + v[k - 1]) * idx2;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const bool interior = i > 0 && i < last;
    const T jx = interior ? (j[i + 1] - j[i - 1]) / h2 : T(0.0);
    const T wx = d1(w, i);
    const T thx = d1(th, i);
    const C cw2 = cw[i] * cw[i];
    const C gap = cth[i] - cj[i] * cj[i] / (cw2 * cw2);

    T bohm_x = T(0.0);
    if (e2 > 0.0) bohm_x = d1(std::span<const T>(bohm), i);
    fj[i] = 2.0 * gap * cw[i] * wx + (2.0 * cj[i] / cw2) * jx + cw2 * thx - e2 * cw2 * bohm_x - cw2 * phix[i] +
            cj[i];

    if (!interior) {
      fw[i] = T(0.0);
      fth[i] = T(0.0);
      continue;
    }
    fw[i] = jx;
    const C vx = (v[i + 1] - v[i - 1]) / h2;
    const T thxx = (th[i + 1] - 2.0 * th[i] + th[i - 1]) * idx2;
    C disp_x = C(0.0);
    if (e2 > 0.0) {
      if (i == 1)
        disp_x = (-3.0 * disp[1] + 4.0 * disp[2] - disp[3]) / h2;
      else if (i == last - 1)
        disp_x = (3.0 * disp[i] - 4.0 * disp[i - 1] + disp[i - 2]) / h2;
      else
        disp_x = (disp[i + 1] - disp[i - 1]) / h2;
    }
    fth[i] = cj[i] * thx + (2.0 / 3.0) * cw2 * th[i] * vx - (2.0 / 3.0) * thxx - (e2 / 3.0) * disp_x -
             cj[i] * cj[i] / (3.0 * cw2) + cw2 * (th[i] - p.theta_L);
  }
}

/// phi_x from the double-integral form of the potential, in extended precision.
RVec potential_gradient_ext(std::span<const Real> U, const ScenarioParams& p) {
  const std::size_t n = U.size() / 3;
  const Real dx = p.grid.dx();
  RVec f(n), inner(n, 0), outer(n, 0);
  for (std::size_t i = 0; i < n; ++i) f[i] = U[3 * i] * U[3 * i] - p.doping[i];
  for (std::size_t i = 1; i < n; ++i) inner[i] = inner[i - 1] + 0.5L * dx * (f[i - 1] + f[i]);
  for (std::size_t i = 1; i < n; ++i) outer[i] = outer[i - 1] + 0.5L * dx * (inner[i - 1] + inner[i]);
  const Real slope = p.bd.phi_r - outer.back();
  for (std::size_t i = 0; i < n; ++i) inner[i] += slope;
  return inner;
}

struct StepContext {
  RVec w_old, j_old, th_old;
  const ScenarioParams& params;
  double dt;
  RVec phix;
};

/// Backward-Euler residual, interleaved [w_i, j_i, theta_i], for new unknowns U with coefficient fields CU.
template <class T, class C>
void step_residual(std::span<const T> U, std::span<const C> CU, const StepContext& ctx, std::span<T> out) {
  const std::size_t n = ctx.w_old.size();
  std::vector<T> w(n), j(n), th(n), fw(n), fj(n), fth(n);
  std::vector<C> cw(n), cj(n), cth(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = U[3 * i];
    j[i] = U[3 * i + 1];
    th[i] = U[3 * i + 2];
    cw[i] = CU[3 * i];
    cj[i] = CU[3 * i + 1];
    cth[i] = CU[3 * i + 2];
  }
  spatial<T, C>(w, j, th, cw, cj, cth, ctx.phix, ctx.params, fw, fj, fth);
  const auto& bd = ctx.params.bd;
  const Real wl = std::sqrt(static_cast<Real>(bd.n_l)), wr = std::sqrt(static_cast<Real>(bd.n_r));
  const double inv_dt = 1.0 / ctx.dt;
  for (std::size_t i = 0; i < n; ++i) {
    out[3 * i + 1] = (j[i] - ctx.j_old[i]) * inv_dt + fj[i];
    if (i == 0 || i + 1 == n) {
      out[3 * i] = w[i] - (i == 0 ? wl : wr);
      out[3 * i + 2] = th[i] - (i == 0 ? bd.theta_l : bd.theta_r);
    } else {
      out[3 * i] = 2.0 * cw[i] * (w[i] - ctx.w_old[i]) * inv_dt + fw[i];
      out[3 * i + 2] = cw[i] * cw[i] * (th[i] - ctx.th_old[i]) * inv_dt + fth[i];
    }
  }
}

RVec pack(const TransientState& s) {
  RVec U(3 * s.w.size());
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    U[3 * i] = joined(s.w, s.w_lo, i);
    U[3 * i + 1] = joined(s.j, s.j_lo, i);
    U[3 * i + 2] = joined(s.theta, s.theta_lo, i);
  }
  return U;
}

StepContext make_context(const TransientState& s, const ScenarioParams& p, double dt) {
  StepContext ctx{RVec(s.w.size()), RVec(s.w.size()), RVec(s.w.size()), p, dt, {}};
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    ctx.w_old[i] = joined(s.w, s.w_lo, i);
    ctx.j_old[i] = joined(s.j, s.j_lo, i);
    ctx.th_old[i] = joined(s.theta, s.theta_lo, i);
  }
  return ctx;
}

std::vector<double> rounded(std::span<const Real> U) { return std::vector<double>(U.begin(), U.end()); }

Real max_abs(std::span<const Real> v) {
  Real m = 0;
  for (Real x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Jacobian of a residual with bounded stencil radius by colored forward-mode seeding.
template <class F>
Eigen::SparseMatrix<double> colored_jacobian(std::span<const double> U, F&& residual) {
  const std::size_t m = U.size();
  const std::size_t nodes = m / 3;
  std::vector<Dual> X(m), R(m);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m * 3 * kColors);
  for (std::size_t color = 0; color < kColors; ++color) {
    for (std::size_t field = 0; field < 3; ++field) {
      for (std::size_t k = 0; k < m; ++k) X[k] = Dual(U[k], 0.0);
      for (std::size_t node = color; node < nodes; node += kColors) X[3 * node + field].d = 1.0;
      residual(std::span<const Dual>(X), std::span<Dual>(R));
      for (std::size_t r = 0; r < m; ++r) {
        if (R[r].d == 0.0) continue;
        const std::size_t i = r / 3;
        const std::size_t lo = i >= kRadius ? i - kRadius : 0;
        // Unique node of this color within the row's stencil window.
        const std::size_t node = lo + (color + kColors - lo % kColors) % kColors;
        trip.emplace_back(static_cast<int>(r), static_cast<int>(3 * node + field), R[r].d);
      }
    }
  }
  Eigen::SparseMatrix<double> J(static_cast<int>(m), static_cast<int>(m));
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

class SparseFactor {
 public:
  void factor(const Eigen::SparseMatrix<double>& J) {
    lu_.compute(J);
    if (lu_.info() != Eigen::Success) throw LinearSolveFailure("time step: Jacobian factorization failed");
  }
  /// Returns -J^{-1} r.
  RVec correction(std::span<const Real> r) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(r.size()));
    for (std::size_t k = 0; k < r.size(); ++k) b(static_cast<Eigen::Index>(k)) = -static_cast<double>(r[k]);
    const Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailure("time step: linear solve failed");
    return RVec(x.begin(), x.end());
  }

 private:
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Newton-type loop with an extended-precision residual and a double-precision Jacobian. The Jacobian
/// is refreshed whenever the residual fails to drop by a factor of four.
template <class Res, class Jac>
StepInfo solve_nonlinear(RVec& U, Res&& residual, Jac&& jacobian, const StepperConfig& cfg, const char* what) {
  RVec R(U.size());
  SparseFactor lu;
  bool have_factor = false;
  bool fresh = false;
  Real prev_res = std::numeric_limits<Real>::infinity();
  Real last_step = std::numeric_limits<Real>::infinity();
  for (int it = 0; it <= cfg.newton_max_iter; ++it) {
    residual(std::span<const Real>(U), std::span<Real>(R));
    const Real res = max_abs(R);
    if (!std::isfinite(static_cast<double>(res))) throw LinearSolveFailure(std::string(what) + ": residual is not finite");
    if (res <= cfg.newton_tol || last_step <= cfg.newton_step_tol * std::max<Real>(1, max_abs(U)))
      return {it, static_cast<double>(res)};
    if (it == cfg.newton_max_iter) break;
    if (!have_factor || (!fresh && res > 0.25L * prev_res)) {
      lu.factor(jacobian(rounded(U)));
      have_factor = true;
      fresh = true;
    } else {
      fresh = false;
    }
    const RVec delta = lu.correction(R);
    last_step = max_abs(delta);
    for (std::size_t k = 0; k < U.size(); ++k) U[k] += delta[k];
    prev_res = res;
  }
  throw IterationLimit(std::string(what) + ": Newton did not converge");
}

TransientState finish(std::span<const Real> U, const TransientState& old, const ScenarioParams& p, double dt) {
  const std::size_t n = old.w.size();
  TransientState s;
  s.t = old.t + dt;
  for (auto* v : {&s.w, &s.j, &s.theta, &s.w_lo, &s.j_lo, &s.theta_lo}) v->resize(n);
  auto split = [](Real x, double& hi, double& lo) {
    hi = static_cast<double>(x);
    lo = static_cast<double>(x - static_cast<Real>(hi));
  };
  for (std::size_t i = 0; i < n; ++i) {
    split(U[3 * i], s.w[i], s.w_lo[i]);
    split(U[3 * i + 1], s.j[i], s.j_lo[i]);
    split(U[3 * i + 2], s.theta[i], s.theta_lo[i]);
  }
  split(std::sqrt(static_cast<Real>(p.bd.n_l)), s.w.front(), s.w_lo.front());
  split(std::sqrt(static_cast<Real>(p.bd.n_r)), s.w.back(), s.w_lo.back());
  s.theta.front() = p.bd.theta_l;
  s.theta.back() = p.bd.theta_r;
  s.theta_lo.front() = s.theta_lo.back() = 0.0;
  const double wmin = *std::min_element(s.w.begin(), s.w.end());
  if (!(wmin >= kVacuum)) throw Vacuum("density fell below the vacuum guard");
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = s.theta[i] - s.j[i] * s.j[i] / std::pow(s.w[i], 4);
    if (!(gap > 0.0)) throw SupersonicRegime("time step left the subsonic regime");
  }
  s.phi = potential_from_density(s.density(), p.doping, p.bd.phi_r, p.grid);
  return s;
}

}  // namespace

std::vector<double> TransientState::density() const {
  std::vector<double> n(w.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = w[i] * w[i];
  return n;
}

FieldState TransientState::fields() const { return FieldState{density(), j, theta, phi}; }

TransientState from_stationary(const StationaryState& s) {
  TransientState t;
  t.w = s.w;
  t.j.assign(s.w.size(), s.J);
  t.theta = s.theta;
  t.phi = s.phi;
  return t;
}

TransientState make_state(double t, std::vector<double> w, std::vector<double> j, std::vector<double> theta,
                          const ScenarioParams& params) {
  TransientState s;
  s.t = t;
  s.w = std::move(w);
  s.j = std::move(j);
  s.theta = std::move(theta);
  require_state(s, params.grid, "make_state");
  s.phi = potential_from_density(s.density(), params.doping, params.bd.phi_r, params.grid);
  return s;
}

void StepperConfig::validate() const {
  if (!(dt > 0.0)) throw DomainError("StepperConfig: dt must be positive");
  if (!(t_end >= 0.0)) throw DomainError("StepperConfig: t_end must be non-negative");
  if (snapshot_stride < 1) throw DomainError("StepperConfig: snapshot_stride must be >= 1");
  if (!(newton_tol > 0.0) || !(newton_step_tol > 0.0) || newton_max_iter < 1) throw DomainError("StepperConfig: invalid Newton settings");
  if (picard_sweeps < 1 || !(picard_tol > 0.0)) throw DomainError("StepperConfig: invalid Picard settings");
}

double StepperConfig::default_dt(const Grid& grid, double eps) {
  const double dx = grid.dx();
  return std::min(0.25 * dx, 0.5 * dx * dx / std::max(eps, dx));
}

bool CompatibilityReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CompatibilityCheck& c) { return c.passed; });
}

const CompatibilityCheck& CompatibilityReport::at(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw DomainError("CompatibilityReport: no check named " + name);
}

CompatibilityReport check_compatibility(const TransientState& s, const ScenarioParams& p,
                                        std::optional<double> derivative_tol) {
  const Grid& g = p.grid;
  require_state(s, g, "check_compatibility");
  const std::size_t last = g.n_cells();
  const DerivativeOperator d1(g.n_cells(), g.dx(), 1), d2(g.n_cells(), g.dx(), 2);
  CompatibilityReport r;
  const double dtol = derivative_tol.value_or(50.0 * g.dx() * g.dx());
  auto add = [&](std::string name, double mag, double tol) {
    r.checks.push_back({std::move(name), mag <= tol, mag});
  };
  add("density_left", std::abs(s.w.front() * s.w.front() - p.bd.n_l), 1e-10);
  add("density_right", std::abs(s.w.back() * s.w.back() - p.bd.n_r), 1e-10);
  add("temperature_left", std::abs(s.theta.front() - p.bd.theta_l), 1e-10);
  add("temperature_right", std::abs(s.theta.back() - p.bd.theta_r), 1e-10);
  add("current_slope_left", std::abs(d1.at<double>(s.j, 0)), dtol);
  add("current_slope_right", std::abs(d1.at<double>(s.j, last)), dtol);
  if (p.eps > 0.0) {
    add("bohm_left", std::abs(d2.at<double>(s.w, 0)), dtol);
    add("bohm_right", std::abs(d2.at<double>(s.w, last)), dtol);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    const double gap = s.w[i] > 0.0 ? s.theta[i] - s.j[i] * s.j[i] / std::pow(s.w[i], 4)
                                    : -std::numeric_limits<double>::infinity();
    worst = std::min({worst, s.w[i], s.theta[i], gap});
  }
  r.checks.push_back({"admissible", worst > 0.0, worst});
  return r;
}

std::array<std::vector<double>, 3> fqhd_residual(const TransientState& s, const TimeDerivatives& d,
                                                 const ScenarioParams& p) {
  require_state(s, p.grid, "fqhd_residual");
  const std::size_t n = s.w.size();
  if (d.w_t.size() != n || d.j_t.size() != n || d.theta_t.size() != n)
    throw ShapeError("fqhd_residual: time derivative length does not match grid");
  const RVec U = pack(s);
  const RVec phix = potential_gradient_ext(U, p);
  RVec w(n), j(n), th(n), fw(n), fj(n), fth(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = U[3 * i];
    j[i] = U[3 * i + 1];
    th[i] = U[3 * i + 2];
  }
  const std::span<const Real> cw(w), cj(j), cth(th);
  spatial<Real, Real>(cw, cj, cth, cw, cj, cth, phix, p, fw, fj, fth);
  std::array<std::vector<double>, 3> r{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                                       std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    r[1][i] = static_cast<double>(d.j_t[i] + fj[i]);
    if (i == 0 || i + 1 == n) continue;
    r[0][i] = static_cast<double>(2.0L * w[i] * d.w_t[i] + fw[i]);
    r[2][i] = static_cast<double>(w[i] * w[i] * d.theta_t[i] + fth[i]);
  }
  return r;
}

TransientState step_implicit(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                             StepInfo* info) {
  cfg.validate();
  require_state(state, params.grid, "step_implicit");
  StepContext ctx = make_context(state, params, cfg.dt);
  RVec U = pack(state);
  // The potential is lagged one iterate: it is refreshed from U before every residual evaluation.
  auto residual = [&](std::span<const Real> X, std::span<Real> out) {
    ctx.phix = potential_gradient_ext(X, params);
    step_residual<Real, Real>(X, X, ctx, out);
  };
  auto jacobian = [&](const std::vector<double>& X) {
    return colored_jacobian(X, [&](std::span<const Dual> D, std::span<Dual> out) {
      step_residual<Dual, Dual>(D, D, ctx, out);
    });
  };
  const StepInfo si = solve_nonlinear(U, residual, jacobian, cfg, "step_implicit");
  if (info) *info = si;
  return finish(U, state, params, cfg.dt);
}

TransientState step_picard(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                           StepInfo* info) {
  cfg.validate();
  require_state(state, params.grid, "step_picard");
  StepContext ctx = make_context(state, params, cfg.dt);
  RVec Uk = pack(state);
  Real change = 0;
  int sweep = 0;
  while (sweep < cfg.picard_sweeps) {
    ++sweep;
    ctx.phix = potential_gradient_ext(Uk, params);
    const RVec frozen = Uk;
    const std::vector<double> frozen_d = rounded(frozen);
    // The frozen system is linear in the new unknowns; the loop only refines the double-precision solve.
    auto residual = [&](std::span<const Real> X, std::span<Real> out) {
      step_residual<Real, Real>(X, std::span<const Real>(frozen), ctx, out);
    };
    auto jacobian = [&](const std::vector<double>& X) {
      return colored_jacobian(X, [&](std::span<const Dual> D, std::span<Dual> out) {
        step_residual<Dual, double>(D, std::span<const double>(frozen_d), ctx, out);
      });
    };
    solve_nonlinear(Uk, residual, jacobian, cfg, "step_picard");
    change = 0;
    for (std::size_t k = 0; k < Uk.size(); ++k) change = std::max(change, std::abs(Uk[k] - frozen[k]));
    if (change <= cfg.picard_tol) break;
  }
  if (info) *info = {sweep, static_cast<double>(change)};
  return finish(Uk, state, params, cfg.dt);
}

TransientState step(const TransientState& state, const ScenarioParams& params, const StepperConfig& cfg,
                    StepInfo* info) {
  return cfg.scheme == TimeScheme::implicit_newton ? step_implicit(state, params, cfg, info)
                                                   : step_picard(state, params, cfg, info);
}

Trajectory run_transient(const TransientState& initial, const ScenarioParams& params, const StepperConfig& cfg,
                         const StepObserver& observer) {
  cfg.validate();
  const auto report = check_compatibility(initial, params);
  if (!report.all_passed()) {
    std::string failed;
    for (const auto& c : report.checks)
      if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
    throw DomainError("run_transient: initial data incompatible with boundary data (" + failed + ")");
  }
  Trajectory traj;
  TransientState cur = initial;
  if (cur.phi.size() != cur.w.size())
    cur.phi = potential_from_density(cur.density(), params.doping, params.bd.phi_r, params.grid);
  traj.snapshots.push_back(cur);
  if (observer) observer(0, cur);
  const double t0 = cur.t;
  const auto n_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  StepperConfig local = cfg;
  try {
    for (long k = 1; k <= n_steps; ++k) {
      const double target = std::min(t0 + static_cast<double>(k) * cfg.dt, t0 + cfg.t_end);
      local.dt = target - cur.t;
      cur = step(cur, params, local);
      cur.t = target;
      traj.steps = static_cast<int>(k);
      if (observer) observer(static_cast<int>(k), cur);
      if (k % cfg.snapshot_stride == 0) traj.snapshots.push_back(cur);
    }
    traj.completed = true;
  } catch (const Error& e) {
    traj.failure = e.what();
  }
  return traj;
}

TransientState compatible_perturbation(const TransientState& base, const ScenarioParams& params, double amplitude) {
  const Grid& g = params.grid;
  require_state(base, g, "compatible_perturbation");
  const std::size_t last = g.n_cells();
  const DerivativeOperator d2(g.n_cells(), g.dx(), 2);
  std::vector<double> w = base.w;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += amplitude * 64.0 * std::pow(g.x(i) * (1.0 - g.x(i)), 3);
  const auto p1 = g.sample([](double x) { return x * (1.0 - x) * (1.0 - x); });
  const auto p2 = g.sample([](double x) { return x * x * (1.0 - x); });
  // [a b; c d] [c1; c2] = -[D2 w (0); D2 w (1)]
  const double a = d2.at<double>(p1, 0), b = d2.at<double>(p2, 0);
  const double c = d2.at<double>(p1, last), d = d2.at<double>(p2, last);
  const double r0 = -d2.at<double>(w, 0), r1 = -d2.at<double>(w, last);
  const double det = a * d - b * c;
  const double c1 = (r0 * d - b * r1) / det, c2 = (a * r1 - c * r0) / det;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += c1 * p1[i] + c2 * p2[i];
  TransientState s = make_state(base.t, std::move(w), base.j, base.theta, params);
  s.j_lo = base.j_lo;
  s.theta_lo = base.theta_lo;
  return s;
}

std::vector<double> field_difference(const TransientState& a, const TransientState& b, int field) {
  auto pick = [field](const TransientState& s) -> std::pair<const std::vector<double>*, const std::vector<double>*> {
    if (field == 0) return {&s.w, &s.w_lo};
    if (field == 1) return {&s.j, &s.j_lo};
    if (field == 2) return {&s.theta, &s.theta_lo};
    throw DomainError("field_difference: field must be 0, 1 or 2");
  };
  const auto [ah, al] = pick(a);
  const auto [bh, bl] = pick(b);
  if (ah->size() != bh->size()) throw ShapeError("field_difference: states differ in length");
  std::vector<double> d(ah->size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Real x = joined(*ah, *al, i) - joined(*bh, *bl, i);
    d[i] = static_cast<double>(x);
  }
  return d;
}

TransientState equilibrate(const TransientState& guess, const ScenarioParams& params, double tol, int max_steps) {
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.newton_max_iter = 60;
  TransientState cur = guess;
  if (cur.phi.size() != cur.w.size())
    cur.phi = potential_from_density(cur.density(), params.doping, params.bd.phi_r, params.grid);
  for (int k = 0; k < max_steps; ++k) {
    TransientState next;
    try {
      next = step_implicit(cur, params, cfg);
    } catch (const IterationLimit&) {
      cfg.dt *= 0.25;
      continue;
    }
    double change = 0.0;
    for (int f = 0; f < 3; ++f) change = std::max(change, sup_norm(field_difference(next, cur, f)));
    next.t = guess.t;
    cur = std::move(next);
    if (change <= tol) return cur;
    cfg.dt = std::min(cfg.dt * 2.0, 1e8);
  }
  throw IterationLimit("equilibrate: steady state not reached");
}

}  // namespace fqhd
