#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blowuplab/bubbles.hpp"
#include "blowuplab/constants.hpp"

#include <cmath>
#include <random>

using namespace blowup;

namespace {

Vec random_vec(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = u(rng);
  return v;
}

/// Fourth-order central difference in a scalar variable.
template <class F>
double d5(F f, double t, double h) {
  return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("bubble peak and profile") {
  for (int n : {4, 5, 6, 8}) {
    const Bubble b{Vec::Zero(n), 7.0};
    CHECK(bubble_eval(n, b, Vec::Zero(n)) == doctest::Approx(c0(n) * std::pow(7.0, (n - 2) / 2.0)).epsilon(1e-14));
    Vec x = Vec::Zero(n);
    x[0] = 1.0 / 7.0;
    CHECK(bubble_eval(n, b, x) ==
          doctest::Approx(c0(n) * std::pow(7.0, (n - 2) / 2.0) * std::pow(2.0, -(n - 2) / 2.0)).epsilon(1e-14));
  }
}

TEST_CASE("family validation") {
  const int n = 4;
  CHECK_THROWS_AS(BubbleFamily(n, {}), std::invalid_argument);
  CHECK_THROWS(BubbleFamily(n, {{Vec::Zero(n), -1.0}}));
  CHECK_THROWS(BubbleFamily(n, {{Vec::Zero(3), 1.0}}));
  CHECK_THROWS(BubbleFamily(n, {{Vec::Zero(n), 1.0}, {Vec::Zero(n), 2.0}}));
  const BubbleFamily fam(n, {{Vec::Zero(n), 1.0}, {Vec::Ones(n), 2.0}});
  CHECK(fam.size() == 2);
  CHECK(fam.dim() == n);
}

TEST_CASE("interaction coefficient symmetry and closed form") {
  const int n = 6;
  Vec a = Vec::Zero(n), b = Vec::Zero(n);
  b[2] = 0.5;
  const Bubble bi{a, 3.0}, bj{b, 5.0};
  const double expected = std::pow(3.0 / 5.0 + 5.0 / 3.0 + 15.0 * 0.25, -2.0);
  CHECK(eps_interaction(n, bi, bj) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(eps_interaction(n, bj, bi) == doctest::Approx(expected).epsilon(1e-15));
  // equal rates at zero distance: (2)^{(2-n)/2}
  CHECK(eps_interaction(n, Bubble{a, 2.0}, Bubble{a, 2.0}) == doctest::Approx(std::pow(2.0, -2.0)));
}

TEST_CASE("derivative formulas match finite differences over random configurations") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> loglam(std::log(0.3), std::log(8.0));
  for (int n : {4, 5, 6, 8}) {
    double worst = 0.0;
    for (int s = 0; s < 120; ++s) {
      const Bubble bi{random_vec(rng, n, 1.0), std::exp(loglam(rng))};
      const Bubble bj{random_vec(rng, n, 1.0), std::exp(loglam(rng))};
      const Vec x = random_vec(rng, n, 1.5);

      // d eps / d a_i, component by component
      Vec fd(n);
      for (int c = 0; c < n; ++c) {
        fd[c] = d5(
            [&](double t) {
              Vec a = bi.a;
              a[c] = t;
              return eps_interaction(n, Bubble{a, bi.lambda}, bj);
            },
            bi.a[c], 1e-4);
      }
      worst = std::max(worst, rel_error(deps_da(n, bi, bj), fd));

      // lambda d/dlambda = d/d(ln lambda)
      const double t0 = std::log(bi.lambda);
      const double fd_l = d5([&](double t) { return eps_interaction(n, Bubble{bi.a, std::exp(t)}, bj); }, t0, 1e-4);
      worst = std::max(worst, rel_error(lambda_deps_dlambda(n, bi, bj), fd_l, 1e-10));

      const double fd_b = d5([&](double t) { return bubble_eval(n, Bubble{bi.a, std::exp(t)}, x); }, t0, 1e-4);
      worst = std::max(worst, rel_error(bubble_dlambda(n, bi, x), fd_b, 1e-10));
    }
    INFO("n = " << n);
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("two-sided interaction bound and derivative sign structure") {
  // lambda d eps/d lambda is negative for the larger-rate bubble when centers coincide.
  const int n = 5;
  const Bubble small{Vec::Zero(n), 2.0}, large{Vec::Zero(n), 20.0};
  CHECK(lambda_deps_dlambda(n, large, small) < 0.0);
  CHECK(lambda_deps_dlambda(n, small, large) > 0.0);
}

TEST_CASE("barycenter identity for well-separated equal-rate pairs") {
  for (int n : {4, 5, 6}) {
    const double lambda = 1e3;
    Vec a1 = Vec::Zero(n), a2 = Vec::Zero(n);
    a2[1] = 1.0;  // lambda^2 d^2 = 1e6
    const BubbleFamily fam(n, {{a1, lambda}, {a2, lambda}});
    const Vec alphas = Vec::Ones(2);
    const auto id = barycenter_identity(fam, alphas, Vec::Zero(n));
    INFO("n = " << n);
    CHECK(std::abs(id.lhs / id.rhs - 1.0) <= 1e-5);
    std::mt19937_64 rng(n);
    for (int s = 0; s < 10; ++s) {
      const auto moved = barycenter_identity(fam, alphas, random_vec(rng, n, 5.0));
      CHECK(rel_error(moved.lhs, id.lhs) <= 1e-12);
    }
  }
  CHECK_THROWS(barycenter_identity(BubbleFamily(4, {{Vec::Zero(4), 1.0}}), Vec::Ones(2), Vec::Zero(4)));
}
