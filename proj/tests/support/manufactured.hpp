#pragma once

// Manufactured family for the evolution equations in square-root variables, evaluated at a fixed time:
//   w = 1 + a t sin(pi x)
//   j = j0 + b t cos(pi x)
//   theta = 1 + c t sin(pi x) + 0.02 x
//   D = 1 - 0.3 x (1-x)
// All even derivatives of sin(pi x) vanish at the contacts, so the family satisfies the Bohm condition that the
// discrete operator builds in; cos(pi x) gives j_x = 0 there.

#include <cmath>
#include <numbers>

#include "fqhd/model.hpp"
#include "fqhd/transient.hpp"
#include "oracles.hpp"

namespace oracle {

struct Manufactured {
  double a = 0.05, b = 0.08, c = 0.05, j0 = 0.1, t = 0.5, eps = 0.3, phi_r = 0.01, theta_L = 1.0;

  Poly doping_poly() const { return Poly{{1.0}} - 0.3 * bump(1); }

  fqhd::ScenarioParams params(std::size_t n_cells) const {
    fqhd::Grid g(n_cells);
    const auto dp = doping_poly();
    auto d = fqhd::DopingProfile(g.sample([&](double x) { return dp(x); }));
    fqhd::BoundaryData bd{w(0.0) * w(0.0), w(1.0) * w(1.0), theta(0.0), theta(1.0), phi_r};
    return fqhd::ScenarioParams(g, d, bd, eps, theta_L);
  }

  double w(double x) const { return 1.0 + a * t * std::sin(std::numbers::pi * x); }
  double j(double x) const { return j0 + b * t * std::cos(std::numbers::pi * x); }
  double theta(double x) const { return 1.0 + c * t * std::sin(std::numbers::pi * x) + 0.02 * x; }

  fqhd::TransientState state(const fqhd::ScenarioParams& p) const {
    return fqhd::make_state(t, p.grid.sample([&](double x) { return w(x); }),
                            p.grid.sample([&](double x) { return j(x); }),
                            p.grid.sample([&](double x) { return theta(x); }), p);
  }

  fqhd::TimeDerivatives derivatives(const fqhd::Grid& g) const {
    return {g.sample([&](double x) { return a * std::sin(std::numbers::pi * x); }),
            g.sample([&](double x) { return b * std::cos(std::numbers::pi * x); }),
            g.sample([&](double x) { return c * std::sin(std::numbers::pi * x); })};
  }

  /// Exact residuals of the three equations at x for the time derivatives above.
  std::array<double, 3> exact(double x) const {
    constexpr double pi = std::numbers::pi;
    const double s = std::sin(pi * x), co = std::cos(pi * x);
    const double at = a * t, bt = b * t, ct = c * t;
    const double p2 = pi * pi, p3 = p2 * pi, p4 = p2 * p2;
    const Jet W = Jet::from_derivatives({1.0 + at * s, at * pi * co, -at * p2 * s, -at * p3 * co, at * p4 * s});
    const Jet Wxx = Jet::from_derivatives({-at * p2 * s, -at * p3 * co, at * p4 * s, at * p4 * pi * co, -at * p4 * p2 * s});
    const Jet Jj = Jet::from_derivatives({j0 + bt * co, -bt * pi * s, -bt * p2 * co, bt * p3 * s, bt * p4 * co});
    const Jet V = Jj / (W * W);
    const Jet B = Wxx / W;

    const double w = W.a[0], wx = W.derivative(1);
    const double jv = Jj.a[0], jx = Jj.derivative(1);
    const double th = theta(x), thx = ct * pi * co + 0.02, thxx = -ct * p2 * s;
    const double vx = V.derivative(1), vxx = V.derivative(2), vxxx = V.derivative(3);
    const double disp_x = 2.0 * w * wx * vxx + w * w * vxxx;

    // phi_x = int_0^x (w^2 - D) + c0 with w^2 = 1 + 2 at sin + at^2 sin^2, all integrals in closed form.
    const Poly Dint = doping_poly().integral();
    auto S1 = [&](double y) {
      return y + 2.0 * at * (1.0 - std::cos(pi * y)) / pi + at * at * (0.5 * y - std::sin(2.0 * pi * y) / (4.0 * pi)) -
             Dint(y);
    };
    const double S1_total = 0.5 + 2.0 * at / pi + at * at * 0.25 - Dint.integral()(1.0);
    const double phix = S1(x) + phi_r - S1_total;

    const double wt = a * s, jt = b * co, tht = c * s;
    const double e2 = eps * eps, w2 = w * w;
    const double r0 = 2.0 * w * wt + jx;
    const double r1 = jt + 2.0 * (th - jv * jv / (w2 * w2)) * w * wx + 2.0 * jv * jx / w2 + w2 * thx -
                      e2 * w2 * B.derivative(1) - w2 * phix + jv;
    const double r2 = w2 * tht + jv * thx + (2.0 / 3.0) * w2 * th * vx - (2.0 / 3.0) * thxx - (e2 / 3.0) * disp_x -
                      jv * jv / (3.0 * w2) + w2 * (th - theta_L);
    return {r0, r1, r2};
  }

  /// Max over nodes of |discrete - exact|; Dirichlet rows of the first and third equations are skipped.
  double discrepancy(std::size_t n_cells) const {
    const auto p = params(n_cells);
    const auto r = fqhd::fqhd_residual(state(p), derivatives(p.grid), p);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.grid.n_nodes(); ++i) {
      const auto e = exact(p.grid.x(i));
      const bool interior = i > 0 && i < p.grid.n_cells();
      worst = std::max(worst, std::abs(r[1][i] - e[1]));
      if (interior) worst = std::max({worst, std::abs(r[0][i] - e[0]), std::abs(r[2][i] - e[2])});
    }
    return worst;
  }
};

}  // namespace oracle
