#include "blowuplab/bubbles.hpp"

#include "blowuplab/constants.hpp"

#include <cmath>
#include <stdexcept>

namespace blowup {

void validate_bubble(int n, const Bubble& b) {
  if (!(b.lambda > 0.0)) throw std::domain_error("bubble rate must be positive");
  if (b.a.size() != n) throw std::invalid_argument("bubble center has wrong dimension");
}

BubbleFamily::BubbleFamily(int n, std::vector<Bubble> bubbles)
    : n_(n), bubbles_(std::move(bubbles)) {
  if (bubbles_.empty()) throw std::invalid_argument("bubble family needs at least one bubble");
  for (const auto& b : bubbles_) validate_bubble(n_, b);
  for (std::size_t i = 0; i < bubbles_.size(); ++i) {
    for (std::size_t j = i + 1; j < bubbles_.size(); ++j) {
      if ((bubbles_[i].a - bubbles_[j].a).squaredNorm() == 0.0) {
        throw std::invalid_argument("bubble centers must be pairwise distinct");
      }
    }
  }
}

double bubble_eval(int n, const Bubble& b, const Vec& x) {
  const double s2 = b.lambda * b.lambda * (x - b.a).squaredNorm();
  return c0(n) * std::pow(b.lambda, 0.5 * (n - 2)) * std::pow(1.0 + s2, -0.5 * (n - 2));
}

double bubble_dlambda(int n, const Bubble& b, const Vec& x) {
  const double s2 = b.lambda * b.lambda * (x - b.a).squaredNorm();
  return 0.5 * (n - 2) * bubble_eval(n, b, x) * (1.0 - s2) / (1.0 + s2);
}

namespace {

double interaction_base(const Bubble& bi, const Bubble& bj) {
  return bi.lambda / bj.lambda + bj.lambda / bi.lambda +
         bi.lambda * bj.lambda * (bi.a - bj.a).squaredNorm();
}

}  // namespace

double eps_interaction(int n, const Bubble& bi, const Bubble& bj) {
  return std::pow(interaction_base(bi, bj), 0.5 * (2 - n));
}

Vec deps_da(int n, const Bubble& bi, const Bubble& bj) {
  // eps^{n/(n-2)} = base^{-n/2}
  const double eps_pow = std::pow(interaction_base(bi, bj), -0.5 * n);
  return (n - 2) * eps_pow * bi.lambda * bj.lambda * (bj.a - bi.a);
}

double lambda_deps_dlambda(int n, const Bubble& bi, const Bubble& bj) {
  const double eps_pow = std::pow(interaction_base(bi, bj), -0.5 * n);
  const double d2 = (bi.a - bj.a).squaredNorm();
  return 0.5 * (2 - n) * eps_pow *
         (bi.lambda / bj.lambda - bj.lambda / bi.lambda + bi.lambda * bj.lambda * d2);
}

BarycenterIdentity barycenter_identity(const BubbleFamily& family, const Vec& alphas,
                                       const Vec& base) {
  const int n = family.dim();
  const auto count = family.size();
  if (static_cast<std::size_t>(alphas.size()) != count) {
    throw std::invalid_argument("barycenter_identity: one weight per bubble required");
  }
  BarycenterIdentity out;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      if (i == j) continue;
      const double w = alphas[i] * alphas[j];
      out.lhs -= w * deps_da(n, family[i], family[j]).dot(family[i].a - base);
      if (i < j) out.rhs += (n - 2) * w * eps_interaction(n, family[i], family[j]);
    }
  }
  return out;
}

}  // namespace blowup
