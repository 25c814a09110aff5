#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fqhd/errors.hpp"
#include "fqhd/model.hpp"

using namespace fqhd;
using doctest::Approx;

TEST_CASE("grid nodes span the unit interval") {
  for (std::size_t n : {1u, 7u, 200u}) {
    Grid g(n);
    CHECK(g.n_nodes() == n + 1);
    CHECK(g.x(0) == 0.0);
    CHECK(g.x(n) == 1.0);
    CHECK(std::abs(g.dx() * static_cast<double>(n) - 1.0) < 1e-15);
    for (std::size_t i = 1; i <= n; ++i) CHECK(g.x(i) > g.x(i - 1));
  }
  CHECK_THROWS_AS(Grid(0), DomainError);
}

TEST_CASE("doping profiles") {
  Grid g(100);
  auto flat = DopingProfile::flat(g, 2.0);
  CHECK(flat.sup_norm() == 2.0);
  auto npn = DopingProfile::npn(g, 0.2, 1.0, 0.05);
  double lo = 1e9, hi = 0.0;
  for (double d : npn.samples()) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(lo > 0.0);
  CHECK(npn.sup_norm() == hi);
  CHECK(npn[50] == Approx(1.0 - 0.8 * (2.0 / (1.0 + std::exp(-5.0)) - 1.0)).epsilon(1e-12));
  CHECK(npn[25] == Approx(0.6).epsilon(1e-2));
  CHECK(npn[0] == Approx(1.0).epsilon(1e-2));
  CHECK_THROWS_AS(DopingProfile::npn(g, 1.2, 1.0, 0.05), DomainError);
  CHECK_THROWS_AS(DopingProfile::npn(g, 0.5, 1.0, 0.3), DomainError);
  CHECK_THROWS_AS(DopingProfile(std::vector<double>{1.0, 0.0, 1.0}), DomainError);
}

TEST_CASE("boundary strength examples") {
  CHECK(boundary_strength({1, 1, 1, 1, 0}, 1.0) == 0.0);
  CHECK(boundary_strength({1.1, 1.0, 1.05, 0.95, 0.2}, 1.0) == Approx(0.4).epsilon(1e-14));
  CHECK(boundary_strength({1, 1, 1, 1, -0.3}, 1.0) == Approx(0.3).epsilon(1e-14));
}

TEST_CASE("boundary strength is symmetric under swapping the contacts when phi_r = 0") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int k = 0; k < 50; ++k) {
    BoundaryData a{u(rng), u(rng), u(rng), u(rng), 0.0};
    BoundaryData b{a.n_r, a.n_l, a.theta_r, a.theta_l, 0.0};
    const double tl = u(rng);
    CHECK(boundary_strength(a, tl) == Approx(boundary_strength(b, tl)).epsilon(1e-14));
  }
}

TEST_CASE("sound gap") {
  CHECK(sound_gap(1, 0, 1) == 1.0);
  CHECK(sound_gap(1, 1, 1) == 0.0);
  CHECK(sound_gap(4, 2, 1) == Approx(0.75));
  CHECK_THROWS_AS(sound_gap(0, 1, 1), DomainError);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double n = u(rng), j = u(rng), th = u(rng), c = u(rng);
    CHECK(sound_gap(c * n, c * j, th) == Approx(sound_gap(n, j, th)).epsilon(1e-12));
  }
}

TEST_CASE("admissibility report") {
  FieldState s{std::vector<double>(5, 1.0), std::vector<double>(5, 0.0), std::vector<double>(5, 1.0),
               std::vector<double>(5, 0.0)};
  auto r = check_admissible(s);
  CHECK(r.admissible);
  CHECK(r.min_density == 1.0);
  CHECK(r.min_temperature == 1.0);
  CHECK(r.min_sound_gap == 1.0);

  s.j.assign(5, 2.0);
  r = check_admissible(s);
  CHECK_FALSE(r.admissible);
  CHECK(r.min_sound_gap == Approx(-3.0));

  s.j.assign(5, 0.0);
  s.n[2] = 0.0;
  CHECK_FALSE(check_admissible(s).admissible);
}

TEST_CASE("raising the temperature never breaks admissibility") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.2, 2.0), bump(0.0, 0.5);
  for (int k = 0; k < 100; ++k) {
    FieldState s{{}, {}, {}, std::vector<double>(6, 0.0)};
    for (int i = 0; i < 6; ++i) {
      s.n.push_back(u(rng));
      s.j.push_back(0.5 * u(rng));
      s.theta.push_back(u(rng));
    }
    const bool before = check_admissible(s).admissible;
    for (double& t : s.theta) t += bump(rng);
    if (before) CHECK(check_admissible(s).admissible);
  }
}

TEST_CASE("density bounds") {
  auto b = density_bounds(1, 1, 0);
  CHECK(b.B == Approx(1.5));
  CHECK(b.b == Approx(0.5 * std::exp(-2.25)).epsilon(1e-12));
  b = density_bounds(1, 1, 1);
  CHECK(b.B == Approx(11.08358).epsilon(1e-6));
  const double expo = b.B * b.B + 2.0;
  CHECK(expo == Approx(124.846).epsilon(1e-5));
  CHECK(b.b == Approx(0.5 * std::exp(-expo)).epsilon(1e-12));
  b = density_bounds(4, 2, 0);
  CHECK(b.B == Approx(3.0));
  CHECK(b.b == Approx(0.011109).epsilon(1e-4));
  CHECK_THROWS_AS(density_bounds(0, 1, 1), DomainError);
  CHECK_THROWS_AS(density_bounds(1, -1, 1), DomainError);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int k = 0; k < 100; ++k) {
    const auto r = density_bounds(u(rng), u(rng), u(rng));
    CHECK(r.b < r.B);
  }
}

TEST_CASE("enthalpy primitive") {
  CHECK(enthalpy_F(1, 0, 1) == 1.0);
  CHECK(enthalpy_F(4, 2, 1) == Approx(2.511294).epsilon(1e-6));
  CHECK(enthalpy_F(1, 1, 0) == 0.5);
  CHECK_THROWS_AS(enthalpy_F(0, 1, 1), DomainError);
}

TEST_CASE("scenario validation") {
  Grid g(10);
  auto d = DopingProfile::flat(g, 1.0);
  CHECK_THROWS_AS(ScenarioParams(g, d, BoundaryData{}, -0.1, 1.0), DomainError);
  CHECK_THROWS_AS(ScenarioParams(g, d, BoundaryData{}, 0.1, 0.0), DomainError);
  CHECK_THROWS_AS(ScenarioParams(g, d, BoundaryData{0.0, 1, 1, 1, 0}, 0.1, 1.0), DomainError);
  CHECK_THROWS_AS(ScenarioParams(Grid(11), d, BoundaryData{}, 0.1, 1.0), ShapeError);
  ScenarioParams p(g, d, BoundaryData{4.0, 9.0, 1, 1, 0}, 0.1, 1.0);
  CHECK(p.w_l() == 2.0);
  CHECK(p.w_r() == 3.0);
  CHECK(p.with_eps(0.0).eps == 0.0);
}
