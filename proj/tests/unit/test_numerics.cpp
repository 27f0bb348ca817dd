#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blowuplab/numerics.hpp"

#include <cmath>
#include <numbers>

using namespace blowup;
using std::numbers::pi;

TEST_CASE("gamma and beta match factorial identities") {
  CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
  CHECK(gamma_fn(0.5) == doctest::Approx(std::sqrt(pi)).epsilon(1e-14));
  // B(2,3) = 1!2!/4! = 1/12
  CHECK(beta_fn(2.0, 3.0) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  // B(a, b) = B(b, a); large arguments go through lgamma
  CHECK(beta_fn(40.5, 3.25) == doctest::Approx(beta_fn(3.25, 40.5)).epsilon(1e-13));
  CHECK(beta_fn(200.0, 200.0) > 0.0);
}

TEST_CASE("sphere measure") {
  CHECK(sphere_measure(2) == doctest::Approx(2 * pi).epsilon(1e-15));
  CHECK(sphere_measure(3) == doctest::Approx(4 * pi).epsilon(1e-15));
  CHECK(sphere_measure(4) == doctest::Approx(2 * pi * pi).epsilon(1e-15));
  CHECK(sphere_measure(6) == doctest::Approx(pi * pi * pi).epsilon(1e-15));
}

TEST_CASE("adaptive quadrature on finite and infinite ranges") {
  auto r = integrate_interval([](double x) { return std::sin(x); }, 0.0, pi);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(r.abs_error_estimate < 1e-11);

  r = integrate_halfline([](double x) { return std::exp(-x); });
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-13));
  r = integrate_halfline([](double x) { return 1.0 / (1.0 + x * x); });
  CHECK(r.value == doctest::Approx(pi / 2).epsilon(1e-13));

  // int_{R^3} exp(-|x|^2) = pi^{3/2}
  CHECK(radial_integral(3, [](double s) { return std::exp(-s * s); }) ==
        doctest::Approx(std::pow(pi, 1.5)).epsilon(1e-12));
}

TEST_CASE("quadrature budget exhaustion carries the best estimate") {
  try {
    integrate_interval([](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); }, 0.0, 1.0, 1e-14, 3);
    FAIL("expected AccuracyError");
  } catch (const AccuracyError& e) {
    CHECK(std::isfinite(e.best_estimate()));
    CHECK(e.error_estimate() > 1e-14);
  }
}

TEST_CASE("newton solves a smooth system and reports singular Jacobians") {
  const VectorFn f = [](const Vec& x) {
    Vec r(2);
    r << x[0] * x[0] - 2.0, x[1] - x[0];
    return r;
  };
  Vec x0(2);
  x0 << 1.0, 0.0;
  auto rep = newton_solve(f, {}, x0);
  CHECK(rep.converged);
  CHECK(rep.solution[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rep.solution[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  // Residual depends on x0 + x1 only: rank one.
  const VectorFn g = [](const Vec& x) {
    Vec r(2);
    r << x[0] + x[1] - 1.0, 2.0 * (x[0] + x[1] - 1.0);
    return r;
  };
  Vec z = Vec::Zero(2);
  rep = newton_solve(g, {}, z);
  CHECK_FALSE(rep.converged);
  CHECK(rep.diagnostic.find("singular Jacobian") != std::string::npos);

  NewtonOptions opts;
  opts.allow_rank_deficient = true;
  rep = newton_solve(g, {}, z, opts);
  CHECK(rep.converged);
  // Minimum-norm step from the origin lands on (1/2, 1/2).
  CHECK(rep.solution[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(rep.solution[1] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("newton reports divergence instead of looping") {
  const VectorFn f = [](const Vec& x) { return Vec::Constant(1, std::exp(x[0]) + 1.0); };
  NewtonOptions opts;
  opts.divergence_bound = 50.0;
  const auto rep = newton_solve(f, {}, Vec::Zero(1), opts);
  CHECK_FALSE(rep.converged);
  CHECK_FALSE(rep.diagnostic.empty());
}

TEST_CASE("dormand-prince integrates linear systems to tolerance") {
  const OdeRhs decay = [](double, const Vec& y) { return Vec(-y); };
  auto traj = ode_integrate(decay, Vec::Ones(1), 0.0, 1.0, 1e-12);
  CHECK(traj.back().r == 1.0);
  CHECK(traj.back().y[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));

  const OdeRhs osc = [](double, const Vec& y) {
    Vec d(2);
    d << y[1], -y[0];
    return d;
  };
  Vec y0(2);
  y0 << 1.0, 0.0;
  traj = ode_integrate(osc, y0, 0.0, 2 * pi, 1e-12);
  CHECK(traj.back().y[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(traj.back().y[1]) < 1e-9);

  OdeOptions opts;
  opts.rtol = opts.atol = 1e-10;
  opts.stop = [](double, const Vec& y) { return y[0] <= 0.0; };
  traj = ode_integrate(osc, y0, 0.0, 10.0, opts);
  CHECK(traj.back().y[0] <= 0.0);
  CHECK(traj.back().r < pi);
}

TEST_CASE("step-size underflow names the failing abscissa") {
  // y' = y^2, y(0) = 1 blows up at r = 1.
  const OdeRhs blow = [](double, const Vec& y) { return Vec(y.array().square()); };
  try {
    ode_integrate(blow, Vec::Ones(1), 0.0, 2.0, 1e-10);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.where() == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("finite differences and relative errors") {
  const auto f = [](const Vec& x) { return x[0] * x[0] * x[1] + std::sin(x[1]); };
  Vec x(2);
  x << 0.7, -0.4;
  const Vec g = fd_gradient(f, x);
  CHECK(g[0] == doctest::Approx(2 * 0.7 * -0.4).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(0.49 + std::cos(-0.4)).epsilon(1e-8));

  Mat a(2, 2);
  a << 1, 2, 3, 4;
  const Mat j = fd_jacobian([&](const Vec& v) { return Vec(a * v); }, x, 1e-4);
  CHECK((j - a).norm() < 1e-10);

  CHECK(rel_error(1.0, 1.0 + 1e-9) == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK(rel_error(0.0, 1e-20, 1e-10) == doctest::Approx(1e-10));
  CHECK(default_fd_step(Vec::Constant(3, 100.0)) == doctest::Approx(1e-4));
}
