#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fqhd/errors.hpp"
#include "fqhd/numerics.hpp"
#include "fqhd/poisson.hpp"
#include "oracles.hpp"

using namespace fqhd;
using doctest::Approx;

TEST_CASE("Green kernel values") {
  CHECK(green_kernel(0.25, 0.75) == Approx(-0.0625));
  CHECK(green_kernel(0.5, 0.5) == Approx(-0.25));
  for (double y : {0.0, 0.3, 1.0}) {
    CHECK(green_kernel(0.0, y) == 0.0);
    CHECK(green_kernel(1.0, y) == 0.0);
  }
  CHECK_THROWS_AS(green_kernel(-0.1, 0.5), DomainError);
  CHECK_THROWS_AS(green_kernel(0.5, 1.1), DomainError);
}

TEST_CASE("Green kernel is symmetric and non-positive") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng), y = u(rng);
    CHECK(green_kernel(x, y) == green_kernel(y, x));
    CHECK(green_kernel(x, y) <= 0.0);
  }
}

TEST_CASE("potential of a neutral density is linear") {
  Grid g(50);
  auto d = DopingProfile::npn(g, 0.5, 1.0, 0.05);
  const std::vector<double> rho(d.samples().begin(), d.samples().end());
  for (auto m : {PotentialMethod::double_integral, PotentialMethod::green_kernel}) {
    const auto phi = potential_from_density(rho, d, 1.0, g, m);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(phi[i] == Approx(g.x(i)).epsilon(1e-13));
  }
}

TEST_CASE("unit excess charge gives the quadratic potential") {
  Grid g(200);
  auto d = DopingProfile::flat(g, 1.0);
  const std::vector<double> rho(g.n_nodes(), 2.0);
  // Closed form x^2/2 - x/2; the kernel integral int G(1/2, y) dy = -1/8.
  const double kernel_integral = oracle::simpson([](double y) { return green_kernel(0.5, y); }, 0.0, 1.0, 2000);
  CHECK(kernel_integral == Approx(-0.125).epsilon(1e-10));
  for (auto m : {PotentialMethod::double_integral, PotentialMethod::green_kernel}) {
    const auto phi = potential_from_density(rho, d, 0.0, g, m);
    CHECK(phi[100] == Approx(-0.125).epsilon(1e-10));
    CHECK(phi.front() == 0.0);
    CHECK(phi.back() == 0.0);
  }
}

TEST_CASE("boundary values are exact for both methods") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Grid g(64);
  auto d = DopingProfile::npn(g, 0.6, 1.0, 0.05);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> rho(g.n_nodes());
    for (double& r : rho) r = u(rng);
    const double phi_r = u(rng) - 0.5;
    for (auto m : {PotentialMethod::double_integral, PotentialMethod::green_kernel}) {
      const auto phi = potential_from_density(rho, d, phi_r, g, m);
      CHECK(phi.front() == 0.0);
      CHECK(phi.back() == phi_r);
    }
  }
}

TEST_CASE("Poisson residual") {
  Grid g(100);
  auto d = DopingProfile::flat(g, 1.0);
  const std::vector<double> n(g.n_nodes(), 2.0);
  const auto phi = g.sample([](double x) { return 0.5 * x * x - 0.5 * x; });
  CHECK(poisson_residual(phi, n, d, g) <= 1e-10);
  const std::vector<double> zero(g.n_nodes(), 0.0), neutral(g.n_nodes(), 1.0);
  CHECK(poisson_residual(zero, neutral, d, g) == 0.0);
  CHECK_THROWS_AS(potential_from_density(std::vector<double>(5, 1.0), d, 0.0, g), ShapeError);
}

TEST_CASE("double-integral potential is second order and matches the Green form") {
  std::vector<double> res;
  for (std::size_t n_cells : {100u, 200u, 400u}) {
    Grid g(n_cells);
    auto d = DopingProfile::npn(g, 0.6, 1.0, 0.05);
    const auto n = g.sample([](double x) { return 1.0 + 0.3 * std::sin(3.0 * x) + 0.2 * x * x; });
    const auto a = potential_from_density(n, d, 0.01, g, PotentialMethod::double_integral);
    const auto b = potential_from_density(n, d, 0.01, g, PotentialMethod::green_kernel);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(diff <= 5.0 * g.dx() * g.dx());
    res.push_back(poisson_residual(a, n, d, g));
  }
  CHECK(res[0] / res[1] == Approx(4.0).epsilon(0.1));
  CHECK(res[1] / res[2] == Approx(4.0).epsilon(0.1));
}

TEST_CASE("potential gradient integrates to the potential") {
  Grid g(400);
  auto d = DopingProfile::npn(g, 0.6, 1.0, 0.05);
  const auto n = g.sample([](double x) { return 1.0 + 0.2 * std::cos(2.0 * x); });
  const auto phi = potential_from_density(n, d, 0.05, g);
  const auto phix = potential_gradient(n, d, 0.05, g);
  const auto rebuilt = cumulative_trapezoid(phix, g.dx());
  for (std::size_t i = 0; i < phi.size(); ++i) CHECK(rebuilt[i] == Approx(phi[i]).epsilon(1e-10));
}
