#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blowuplab/constants.hpp"
#include "blowuplab/radial.hpp"

#include <cmath>

using namespace blowup;

namespace {
const RadialPotential kOne = [](double) { return 1.0; };
}

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(validate(RadialProblem{5, 0.0, kOne, 1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(RadialProblem{6, 1.0, kOne, 1.0}), std::domain_error);  // eps >= 4/(n-2)
  CHECK_THROWS_AS(validate(RadialProblem{5, 1e-2, [](double r) { return 0.5 - r; }, 1.0}), std::domain_error);
  CHECK_NOTHROW(validate(RadialProblem{5, 1e-2, kOne, 1.0}));
}

TEST_CASE("linear shots scale linearly in u0") {
  const RadialProblem prob{5, 1e-2, kOne, 1.0};
  ShotOptions lin;
  lin.linear = true;
  const auto a = shoot(prob, 1.0, lin);
  const auto b = shoot(prob, 2.0, lin);
  CHECK_FALSE(a.crossed);
  CHECK(b.terminal_value == doctest::Approx(2.0 * a.terminal_value).epsilon(1e-9));
  // the regular solution of u'' + 4/r u' = u increases
  CHECK(a.terminal_value > 1.0);
}

TEST_CASE("small u0 stays positive, large u0 crosses zero") {
  const RadialProblem prob{5, 1e-2, kOne, 1.0};
  CHECK_FALSE(shoot(prob, 1e-3).crossed);
  CHECK(shoot(prob, 1e-3).terminal_value > 0.0);
  const auto big = shoot(prob, 1e5);
  CHECK(big.crossed);
  CHECK(big.r_cross < 1.0);
  ShotOptions through;
  through.stop_at_zero = false;
  CHECK(shoot(prob, 1e5, through).r.back() == 1.0);
}

TEST_CASE("series start is insensitive to the start radius") {
  const RadialProblem prob{5, 1e-2, kOne, 1.0};
  ShotOptions a, b;
  a.r0 = 1e-6;
  b.r0 = 1e-5;
  a.stop_at_zero = b.stop_at_zero = false;
  const double u0 = 100.0;
  CHECK(std::abs(shoot(prob, u0, a).terminal_value - shoot(prob, u0, b).terminal_value) <= 1e-8 * u0);
}

TEST_CASE("ground states satisfy their contracts") {
  for (auto [n, eps] : {std::pair{5, 1e-2}, std::pair{4, 3e-3}}) {
    const auto sol = solve_ground_state(RadialProblem{n, eps, kOne, 1.0});
    INFO("n=" << n << " eps=" << eps);
    CHECK(sol.boundary_residual <= 1e-9 * sol.u0);
    CHECK(sol.resolution_change <= 1e-6);
    CHECK(sol.lambda_extracted == doctest::Approx(std::pow(sol.u0 / c0(n), 2.0 / (n - 2))).epsilon(1e-15));
    for (std::size_t k = 1; k < sol.u.size(); ++k) {
      CHECK(sol.u[k] < sol.u[k - 1]);
      if (sol.grid[k] < 1.0) CHECK(sol.u[k] > 0.0);
    }
    CHECK(sol.grid.front() == 0.0);
    CHECK(sol.grid.back() == 1.0);
  }
}

TEST_CASE("scaling V by 4 doubles lambda approximately") {
  const double eps = 1e-4;
  const auto a = solve_ground_state(RadialProblem{5, eps, kOne, 1.0});
  const auto b = solve_ground_state(RadialProblem{5, eps, [](double) { return 4.0; }, 1.0});
  CHECK(b.lambda_extracted / a.lambda_extracted == doctest::Approx(2.0).epsilon(0.15));
  // rho is V-normalized: nearly unchanged
  CHECK(rho_of(5, eps, b.lambda_extracted, 4.0) == doctest::Approx(rho_of(5, eps, a.lambda_extracted, 1.0)).epsilon(0.15));
}

TEST_CASE("rate experiment table") {
  const std::vector<double> eps = {1e-2, 1e-3, 1e-4};
  const auto fit = rate_experiment(5, kOne, eps);
  CHECK(fit.solved == 3);
  CHECK(fit.lambda_monotone);
  CHECK(std::isnan(fit.rows[0].slope_running));
  CHECK(fit.rows[2].slope_running == doctest::Approx(fit.slope));
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(0.1));
  for (const auto& r : fit.rows) CHECK(r.rho > 0.0);
  CHECK_THROWS(rate_experiment(5, kOne, {1e-3, 1e-2}));
  CHECK(ls_slope({0, 1, 2}, {1, 3, 5}) == doctest::Approx(2.0));
}

TEST_CASE("radial projection contracts") {
  for (int n : {4, 5, 6}) {
    for (double lambda : {1e2, 1e3}) {
      const auto p = project_bubble_radial(n, lambda, kOne);
      INFO("n=" << n << " lambda=" << lambda);
      CHECK(p.residual <= 1e-8);
      CHECK(p.ordering_ok);
      CHECK(p.min_value >= 0.0);
      CHECK(p.max_excess <= 0.0);
      CHECK(p.pi_delta.back() == 0.0);
      CHECK(p.energy < p.s_n);
    }
  }
  const auto p = project_bubble_radial(5, 1e3, kOne);
  CHECK(p.energy_rel_error <= 0.03);
  // energy deficit shrinks as lambda grows
  CHECK(project_bubble_radial(5, 1e2, kOne).energy_rel_error > p.energy_rel_error);
  CHECK_THROWS_AS(project_bubble_radial(5, 5.0, kOne), std::domain_error);
  ProjectionOptions tight;
  tight.max_intervals = 4000;
  CHECK_THROWS_AS(project_bubble_radial(5, 1e3, kOne, tight), AccuracyError);
}
