#pragma once

#include "blowuplab/numerics.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <variant>
#include <vector>

namespace blowup {

struct ConstantPotential {
  double v0 = 1.0;
};

/// v0 + (x - z)^T H (x - z) / 2.
struct QuadraticPotential {
  double v0 = 1.0;
  Vec z;
  Mat H;
};

struct Bump {
  Vec center;
  double amplitude = 0.0;
  double width = 1.0;
};

/// baseline + sum amplitude * exp(-|x - center|^2 / width^2).
struct BumpSumPotential {
  double baseline = 1.0;
  std::vector<Bump> bumps;
};

/// Axis-aligned cube center +- half_width.
struct Box {
  Vec center;
  double half_width = 1.0;
};

class PotentialSpec {
 public:
  using Variant = std::variant<ConstantPotential, QuadraticPotential, BumpSumPotential>;

  /// Validates shapes and symmetry; positivity is checked separately.
  PotentialSpec(int n, Variant v);

  int dim() const { return n_; }
  const Variant& variant() const { return v_; }
  std::string type_name() const;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;

 private:
  int n_;
  Variant v_;
};

inline double v_eval(const PotentialSpec& spec, const Vec& x) { return spec.value(x); }
inline Vec v_grad(const PotentialSpec& spec, const Vec& x) { return spec.gradient(x); }
inline Mat v_hess(const PotentialSpec& spec, const Vec& x) { return spec.hessian(x); }

/// Sample grid of the box with at most `max_points` nodes, at most 17 per axis.
std::vector<Vec> sample_grid(const Box& box, long max_points = 100000);

struct PositivityReport {
  bool positive = true;
  double min_value = 0.0;
  Vec argmin;
};

PositivityReport check_positivity(const PotentialSpec& spec, const Box& box);

/// Throws std::domain_error naming the violating sample unless V > 0 on the grid.
void require_positive(const PotentialSpec& spec, const Box& box);

/// Sign of V over the sampled box: +1 all positive, -1 all negative, 0 mixed.
int sampled_sign(const PotentialSpec& spec, const Box& box);

struct CriticalPoint {
  Vec location;
  Mat hessian;
  int morse_index = 0;  // number of negative Hessian eigenvalues
  bool nondegenerate = false;
};

struct CriticalPointSearch {
  std::vector<CriticalPoint> points;
  /// True for a constant potential: every point is critical.
  bool degenerate_everywhere = false;
};

CriticalPoint classify_point(const PotentialSpec& spec, const Vec& x, double tol = 1e-8);

CriticalPointSearch critical_points(const PotentialSpec& spec, const Box& search_box);

struct FdConsistencyReport {
  double max_grad_rel_error = 0.0;
  double max_hess_rel_error = 0.0;
  int samples = 0;
  bool pass = false;
};

FdConsistencyReport fd_consistency(const PotentialSpec& spec, const Box& box, int samples = 100,
                                   unsigned seed = 7, double tol = 1e-6);

PotentialSpec potential_from_json(const nlohmann::json& j, int n);
nlohmann::json potential_to_json(const PotentialSpec& spec);

}  // namespace blowup
