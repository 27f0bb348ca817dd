#pragma once

#include "blowuplab/numerics.hpp"

#include <vector>

namespace blowup {

/// Center a and concentration rate lambda of the profile
/// c0 lambda^{(n-2)/2} (1 + lambda^2 |x - a|^2)^{-(n-2)/2}.
struct Bubble {
  Vec a;
  double lambda = 1.0;
};

/// N >= 1 bubbles in R^n with pairwise distinct centers.
class BubbleFamily {
 public:
  /// Empty placeholder; only meaningful after assignment.
  BubbleFamily() = default;
  BubbleFamily(int n, std::vector<Bubble> bubbles);

  int dim() const { return n_; }
  std::size_t size() const { return bubbles_.size(); }
  const Bubble& operator[](std::size_t i) const { return bubbles_[i]; }
  const std::vector<Bubble>& bubbles() const { return bubbles_; }

 private:
  int n_ = 0;
  std::vector<Bubble> bubbles_;
};

void validate_bubble(int n, const Bubble& b);

double bubble_eval(int n, const Bubble& b, const Vec& x);

/// lambda * d(delta)/d(lambda).
double bubble_dlambda(int n, const Bubble& b, const Vec& x);

/// Interaction coefficient
/// (li/lj + lj/li + li lj |ai - aj|^2)^{(2-n)/2}.
double eps_interaction(int n, const Bubble& bi, const Bubble& bj);

/// d eps_ij / d a_i = (n-2) eps_ij^{n/(n-2)} li lj (aj - ai).
Vec deps_da(int n, const Bubble& bi, const Bubble& bj);

/// lambda_i d eps_ij / d lambda_i.
double lambda_deps_dlambda(int n, const Bubble& bi, const Bubble& bj);

struct BarycenterIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = -sum_{i != j} alpha_i alpha_j deps_da(i, j) . (a_i - base),
/// rhs = (n-2) sum_{i < j} alpha_i alpha_j eps_ij.
BarycenterIdentity barycenter_identity(const BubbleFamily& family, const Vec& alphas,
                                       const Vec& base);

}  // namespace blowup
