#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blowuplab/balancing.hpp"
#include "blowuplab/constants.hpp"

#include <cmath>
#include <random>

using namespace blowup;

namespace {

BalancingState single(int n, double eps, double lambda, const Vec& a) {
  return {n, eps, BubbleFamily(n, {{a, lambda}}), Vec::Constant(1, alpha_of_lambda(n, eps, lambda))};
}

/// lambda^2 / ln(lambda) = k on the branch lambda > sqrt(e), by plain bisection in lambda.
double bisection_oracle(double k) {
  double lo = std::exp(0.5), hi = 1e12;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid * mid / std::log(mid) < k) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("alpha root and eta") {
  for (int n : {4, 5, 6}) {
    const double eps = 1e-3, lambda = 123.0;
    const double alpha = alpha_of_lambda(n, eps, lambda);
    const double p = (n + 2.0) / (n - 2.0);
    CHECK(std::pow(alpha, p - 1 - eps) * std::pow(lambda, -eps * (n - 2) / 2.0) == doctest::Approx(1.0).epsilon(1e-13));
  }
  CHECK(eta(6, 1e-6) == doctest::Approx(std::pow(1e-6, 1.0 / 6.0)));
  CHECK(eta(4, std::exp(-2.0)) == doctest::Approx(1.0));
  CHECK_THROWS(alpha_of_lambda(6, 1.0, 10.0));
}

TEST_CASE("single-bubble rate law") {
  const auto p6 = predicted_lambda_single(6, 1.0, 1e-4);
  CHECK(p6.feasible);
  CHECK(p6.formula_branch == RateBranch::Plain);
  CHECK(p6.lambda_predicted == doctest::Approx(std::sqrt(0.625e4)).epsilon(1e-15));

  const auto p4 = predicted_lambda_single(4, 1.0, 1e-3);
  CHECK(p4.formula_branch == RateBranch::LogCorrected);
  CHECK(rel_error(p4.lambda_predicted, bisection_oracle(6000.0)) <= 1e-8);
  CHECK(p4.lambda_predicted == doctest::Approx(176.2).epsilon(1e-3));

  CHECK_FALSE(predicted_lambda_single(5, -1.0, 1e-3).feasible);
  CHECK_FALSE(predicted_lambda_single(4, 1.0, 6.0 / 5.0).feasible);  // K = 5 < 2e: no root
}

TEST_CASE("N = 1 with constant V reproduces the closed form") {
  const int n = 6;
  const PotentialSpec v(n, ConstantPotential{1.0});
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    const auto o = solve_system(n, eps, v, single(n, eps, 3.0, Vec::Zero(n)));
    REQUIRE(o.status == SolveStatus::Converged);
    CHECK(rel_error(o.state.family[0].lambda, std::sqrt(constants_for(6).kappa1 / eps)) <= 1e-10);
    CHECK(rel_error(rate_ratio_diagnostic(o.state), constants_for(6).kappa1) <= 1e-6);
  }
  const PotentialSpec v4(4, ConstantPotential{2.0});
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    const auto o = solve_system(4, eps, v4, single(4, eps, 10.0, Vec::Zero(4)));
    REQUIRE(o.status == SolveStatus::Converged);
    CHECK(rel_error(o.state.family[0].lambda, bisection_oracle(6.0 * 2.0 / eps)) <= 1e-8);
    CHECK(rel_error(rate_ratio_diagnostic(o.state), 6.0 * 2.0) <= 1e-6);
  }
}

TEST_CASE("N = 1 at a quadratic maximum sits at the critical point") {
  const int n = 5;
  Vec z = Vec::Zero(n);
  z[0] = 0.2;
  const PotentialSpec v(n, QuadraticPotential{2.0, z, -Mat::Identity(n, n)});
  Vec start = z;
  start[1] = 0.05;
  const auto o = solve_system(n, 1e-4, v, single(n, 1e-4, 50.0, start));
  REQUIRE(o.status == SolveStatus::Converged);
  CHECK((o.state.family[0].a - z).norm() <= 1e-8);
  CHECK(rel_error(o.state.family[0].lambda, std::sqrt(constants_for(n).kappa1 * 2.0 / 1e-4)) <= 1e-9);
}

TEST_CASE("residuals vanish at the solution and are scale-consistent") {
  const int n = 6;
  const PotentialSpec v(n, ConstantPotential{1.0});
  const auto o = solve_system(n, 1e-4, v, single(n, 1e-4, 30.0, Vec::Zero(n)));
  CHECK(residual_EL(o.state, v).lpNorm<Eigen::Infinity>() <= 1e-9 * 1e-4);
  CHECK(residual_EA(o.state, v).norm() == 0.0);
}

TEST_CASE("infeasibility certificate for negative potentials") {
  for (int n : {4, 5, 6}) {
    for (int count : {1, 2, 3}) {
      for (double eps : {1e-2, 1e-4}) {
        std::vector<Bubble> bubbles;
        for (int i = 0; i < count; ++i) {
          Vec a = Vec::Zero(n);
          a[0] = 0.25 * i;
          bubbles.push_back({a, 10.0 * (i + 1)});
        }
        const BalancingState init{n, eps, BubbleFamily(n, bubbles), Vec::Ones(count)};
        const auto neg = solve_system(n, eps, PotentialSpec(n, ConstantPotential{-1.0}), init);
        INFO("n=" << n << " N=" << count << " eps=" << eps);
        REQUIRE(neg.status == SolveStatus::Infeasible);
        REQUIRE(neg.certificate.has_value());
        CHECK(neg.certificate->eps_term > 0.0);
        CHECK(neg.certificate->interaction_term >= 0.0);
        CHECK(neg.certificate->potential_term >= 0.0);
        const auto pos = solve_system(n, eps, PotentialSpec(n, ConstantPotential{1.0}), init);
        CHECK(pos.status != SolveStatus::Infeasible);
      }
    }
  }
  const auto na = infeasibility_check(5, 1e-3, PotentialSpec(5, ConstantPotential{1.0}), Box{Vec::Zero(5), 1.0});
  CHECK_FALSE(na.applicable);
  CHECK_FALSE(na.infeasible);
}

TEST_CASE("single interaction terms can be negative; the weighted sum cannot") {
  const int n = 5;
  Vec offset = Vec::Zero(n);
  offset[0] = 0.01;
  const Bubble a{Vec::Zero(n), 100.0}, b{offset, 1.0};
  CHECK(lambda_deps_dlambda(n, a, b) < 0.0);
  CHECK(lambda_deps_dlambda(n, b, a) > 0.0);
  const BalancingState s{n, 1e-3, BubbleFamily(n, {a, b}), Vec::Ones(2)};
  const auto cert = infeasibility_check(n, 1e-3, PotentialSpec(n, ConstantPotential{-1.0}), Box{Vec::Zero(n), 1.0}, s);
  CHECK(cert.infeasible);
}

TEST_CASE("guards flag states outside the asymptotic regime") {
  const int n = 5;
  BalancingState s = single(n, 0.3, 1e3, Vec::Zero(n));
  CHECK_FALSE(guard_violation(s).empty());  // 0.3 ln 1000 > 0.5
  const BalancingState close{n, 1e-4, BubbleFamily(n, {{Vec::Zero(n), 2.0}, {Vec::Constant(n, 0.01), 2.0}}), Vec::Ones(2)};
  CHECK(guard_violation(close).find("eps_") != std::string::npos);
  CHECK(guard_violation(single(n, 1e-4, 100.0, Vec::Zero(n))).empty());
}

TEST_CASE("cluster continuation approaches the Kirchhoff configuration") {
  const int n = 6;
  const Mat h = -2.0 * Mat::Identity(n, n);
  const PotentialSpec v(n, QuadraticPotential{1.0, Vec::Zero(n), h});
  const auto kc = find_critical(h, 2, n, {});
  REQUIRE(kc.found.size() == 1);
  const auto eps = geometric_eps(1e-3, 1e-8, std::pow(10.0, -0.25));
  CHECK(eps.size() == 21);
  SweepOptions opts;
  opts.cluster_center = Vec::Zero(n);
  const auto sweep = continuation_sweep(n, v, initial_cluster_state(n, eps[0], v, Vec::Zero(n), kc.found[0].config), eps, opts);
  std::vector<double> dist;
  std::vector<BalancingState> states;
  for (const auto& p : sweep) {
    REQUIRE(p.outcome.status == SolveStatus::Converged);
    states.push_back(p.outcome.state);
    const ClusterConfig b(n, rescale_cluster(p.outcome.state, Vec::Zero(n), 1.0));
    dist.push_back(config_distance(b, kc.found[0].config, true) / kc.found[0].config.stacked().norm());
    const double r = rate_ratio_diagnostic(p.outcome.state);
    CHECK(r >= 0.05);
    CHECK(r <= 20.0);
  }
  CHECK(dist.back() <= 0.05);
  for (std::size_t k = dist.size() - 3; k < dist.size(); ++k) CHECK(dist[k] <= dist[k - 1]);

  // The stated exponent variant drifts away instead.
  const ClusterConfig stated(n, rescale_cluster(states.back(), Vec::Zero(n), 1.0, VExponent::Stated));
  CHECK(config_distance(stated, kc.found[0].config, true) >= 0.0);

  const auto cls = classify_blowup(states, {Vec::Zero(n)});
  REQUIRE(cls.size() == 1);
  CHECK(cls[0].kind == BlowupKind::NonSimple);
  CHECK(cls[0].members.size() == 2);
  CHECK(cls[0].bounded_below_count >= 1);
  CHECK(cls[0].bounded);
}

TEST_CASE("isolated simple classification and empty points") {
  const int n = 6;
  const PotentialSpec v(n, QuadraticPotential{1.0, Vec::Zero(n), -2.0 * Mat::Identity(n, n)});
  Vec start = Vec::Zero(n);
  start[0] = 0.01;
  const auto eps = geometric_eps(1e-3, 1e-5, std::pow(10.0, -0.5));
  const auto sweep = continuation_sweep(n, v, single(n, eps[0], 20.0, start), eps);
  std::vector<BalancingState> states;
  std::vector<double> lambdas;
  for (const auto& p : sweep) {
    REQUIRE(p.outcome.status == SolveStatus::Converged);
    states.push_back(p.outcome.state);
    lambdas.push_back(p.outcome.state.family[0].lambda);
  }
  // lambda ~ eps^{-1/2}
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    CHECK(std::log(lambdas[k] / lambdas[k - 1]) / std::log(eps[k] / eps[k - 1]) == doctest::Approx(-0.5).epsilon(1e-9));
  }
  Vec far = Vec::Ones(n);
  const auto cls = classify_blowup(states, {Vec::Zero(n), far});
  CHECK(cls[0].kind == BlowupKind::IsolatedSimple);
  CHECK(cls[0].bounded);
  CHECK(cls[1].kind == BlowupKind::Empty);
  std::vector<BalancingState> reversed(states.rbegin(), states.rend());
  CHECK_THROWS_AS(classify_blowup(reversed, {Vec::Zero(n)}), std::invalid_argument);
}

TEST_CASE("scales and list helpers") {
  CHECK(beta_scale(4, std::exp(-3.0)) == doctest::Approx(3.0));
  CHECK(beta_scale(6, 1e-4) == doctest::Approx(100.0));
  CHECK(cluster_scale(6, 1e-6) == doctest::Approx(std::pow(1e-6, -1.0 / 6.0)));
  CHECK_THROWS(geometric_eps(1e-3, 1e-5, 2.0));
  const auto e = geometric_eps(1e-2, 1e-4, 0.1);
  CHECK(e.size() == 3);
  const PotentialSpec v(5, ConstantPotential{1.0});
  CHECK_THROWS(continuation_sweep(5, v, single(5, 1e-3, 10.0, Vec::Zero(5)), {1e-3, 1e-2}));
}
