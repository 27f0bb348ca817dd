#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blowuplab/potentials.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

using namespace blowup;

namespace {

Mat sample_hessian(int n) {
  Mat h = -2.0 * Mat::Identity(n, n);
  h(0, 1) = h(1, 0) = 0.25;
  return h;
}

}  // namespace

TEST_CASE("construction validates shapes and symmetry") {
  CHECK_THROWS(PotentialSpec(3, QuadraticPotential{1.0, Vec::Zero(2), Mat::Identity(3, 3)}));
  Mat asym = Mat::Identity(3, 3);
  asym(0, 1) = 1.0;
  CHECK_THROWS(PotentialSpec(3, QuadraticPotential{1.0, Vec::Zero(3), asym}));
  CHECK_THROWS(PotentialSpec(3, BumpSumPotential{1.0, {{Vec::Zero(3), 1.0, 0.0}}}));
  CHECK_NOTHROW(PotentialSpec(3, ConstantPotential{2.0}));
}

TEST_CASE("values, gradients and Hessians of each family") {
  const int n = 4;
  const Mat h = sample_hessian(n);
  Vec z = Vec::Zero(n);
  z[2] = 0.1;
  const PotentialSpec q(n, QuadraticPotential{1.5, z, h});
  Vec x = Vec::Constant(n, 0.2);
  const Vec d = x - z;
  CHECK(q.value(x) == doctest::Approx(1.5 + 0.5 * d.dot(h * d)));
  CHECK((q.gradient(x) - h * d).norm() < 1e-15);
  CHECK((q.hessian(x) - h).norm() == 0.0);

  const PotentialSpec c(n, ConstantPotential{3.0});
  CHECK(c.value(x) == 3.0);
  CHECK(c.gradient(x).norm() == 0.0);
  CHECK(q.type_name() == "quadratic");
}

TEST_CASE("finite-difference consistency over 100 samples per dimension") {
  for (int n : {4, 5, 6, 8}) {
    Vec c1 = Vec::Zero(n), c2 = Vec::Zero(n);
    c1[0] = 0.5;
    c2[n - 1] = -0.4;
    const PotentialSpec bumps(n, BumpSumPotential{1.0, {{c1, 0.8, 0.6}, {c2, -0.3, 0.9}}});
    const PotentialSpec quad(n, QuadraticPotential{1.0, Vec::Zero(n), sample_hessian(n)});
    const Box box{Vec::Zero(n), 1.0};
    for (const auto* spec : {&bumps, &quad}) {
      const auto rep = fd_consistency(*spec, box, 100);
      INFO("n = " << n << " type " << spec->type_name());
      CHECK(rep.samples == 100);
      CHECK(rep.max_grad_rel_error <= 1e-6);
      CHECK(rep.max_hess_rel_error <= 1e-6);
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("positivity and sign sampling") {
  const int n = 4;
  const Box box{Vec::Zero(n), 1.0};
  CHECK(sampled_sign(PotentialSpec(n, ConstantPotential{1.0}), box) == 1);
  CHECK(sampled_sign(PotentialSpec(n, ConstantPotential{-1.0}), box) == -1);
  const PotentialSpec mixed(n, QuadraticPotential{0.5, Vec::Zero(n), -2.0 * Mat::Identity(n, n)});
  CHECK(sampled_sign(mixed, box) == 0);
  CHECK_FALSE(check_positivity(mixed, box).positive);
  CHECK_THROWS_AS(require_positive(mixed, box), std::domain_error);
  CHECK_NOTHROW(require_positive(PotentialSpec(n, ConstantPotential{1.0}), box));
  CHECK(sample_grid(box, 1000).size() <= 1000);
}

TEST_CASE("critical points of each family") {
  const int n = 4;
  const Box box{Vec::Zero(n), 2.0};
  const auto constant = critical_points(PotentialSpec(n, ConstantPotential{1.0}), box);
  CHECK(constant.degenerate_everywhere);
  CHECK(constant.points.empty());

  Vec z = Vec::Constant(n, 0.3);
  const auto quad = critical_points(PotentialSpec(n, QuadraticPotential{1.0, z, sample_hessian(n)}), box);
  REQUIRE(quad.points.size() == 1);
  CHECK((quad.points[0].location - z).norm() < 1e-12);
  CHECK(quad.points[0].morse_index == n);
  CHECK(quad.points[0].nondegenerate);

  // One bump: its center is the only critical point, a maximum for positive amplitude.
  Vec c = Vec::Zero(n);
  c[1] = 0.5;
  const auto one = critical_points(PotentialSpec(n, BumpSumPotential{1.0, {{c, 1.0, 0.5}}}), Box{Vec::Zero(n), 1.0});
  REQUIRE(one.points.size() == 1);
  CHECK((one.points[0].location - c).norm() < 1e-8);
  CHECK(one.points[0].morse_index == n);

  // Two well-separated bumps: two maxima and, at the midpoint, a saddle that is
  // a minimum along the axis and a maximum across it.
  Vec c1 = Vec::Zero(n), c2 = Vec::Zero(n);
  c1[0] = -0.6;
  c2[0] = 0.6;
  const auto two =
      critical_points(PotentialSpec(n, BumpSumPotential{1.0, {{c1, 1.0, 0.4}, {c2, 1.0, 0.4}}}), Box{Vec::Zero(n), 1.0});
  int maxima = 0, saddles = 0;
  for (const auto& p : two.points) {
    if (p.morse_index == n) ++maxima;
    if (p.morse_index == n - 1 && std::abs(p.location[0]) < 1e-8) ++saddles;
  }
  CHECK(maxima == 2);
  CHECK(saddles == 1);
}

TEST_CASE("JSON round trip") {
  const int n = 4;
  const nlohmann::json j = {{"type", "quadratic"}, {"v0", 2.0}, {"z", {0, 0, 0, 0.5}},
                            {"H", {-1, 0, 0, 0, 0, -1, 0, 0, 0, 0, -1, 0, 0, 0, 0, -1}}};
  const auto spec = potential_from_json(j, n);
  Vec x = Vec::Zero(n);
  x[3] = 0.5;
  CHECK(spec.value(x) == 2.0);
  const auto back = potential_from_json(potential_to_json(spec), n);
  CHECK(back.value(Vec::Ones(n)) == spec.value(Vec::Ones(n)));
  CHECK_THROWS(potential_from_json({{"type", "mystery"}}, n));
  const auto bumps = potential_from_json(
      {{"type", "bumps"}, {"baseline", 1.0}, {"bumps", {{{"center", {0, 0, 0, 0}}, {"amplitude", 1.0}, {"width", 1.0}}}}}, n);
  CHECK(bumps.value(Vec::Zero(n)) == doctest::Approx(2.0));
}
