#pragma once

#include "blowuplab/numerics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blowup {

/// m pairwise-distinct points xi_1..xi_m in R^n.
class ClusterConfig {
 public:
  ClusterConfig(int n, std::vector<Vec> points);
  /// Unpacks a stacked vector of length m * n.
  static ClusterConfig from_stacked(int n, const Vec& stacked);

  int dim() const { return n_; }
  int size() const { return static_cast<int>(points_.size()); }
  const Vec& operator[](int i) const { return points_[static_cast<std::size_t>(i)]; }
  const std::vector<Vec>& points() const { return points_; }
  Vec stacked() const;
  double min_pair_distance() const;

 private:
  int n_;
  std::vector<Vec> points_;
};

struct HessianSignature {
  int positives = 0;
  int negatives = 0;
  int near_zeros = 0;
};

struct CriticalConfig {
  ClusterConfig config;
  double f_value = 0.0;
  double grad_norm = 0.0;
  HessianSignature signature;
  double min_pair_distance = 0.0;
};

/// sum_i xi_i^T H xi_i - sum_{i != j} |xi_i - xi_j|^{2-n} (ordered pairs).
double f_eval(const Mat& hessV, const ClusterConfig& config);

/// Block i: 2 H xi_i + 2 (n-2) sum_{j != i} (xi_i - xi_j) / |xi_i - xi_j|^n.
Vec f_grad(const Mat& hessV, const ClusterConfig& config);

/// Analytic Hessian of f_eval in the stacked variables.
Mat f_hessian(const Mat& hessV, const ClusterConfig& config);

/// Central differences of f_grad with step h; eigenvalues within `cutoff` count as zero.
HessianSignature hessian_signature(const Mat& hessV, const ClusterConfig& config, double h = 1e-5,
                                   double cutoff = 1e-7);

/// True when hessV is a multiple of the identity.
bool is_isotropic(const Mat& hessV);

/// Rotation/reflection that maps xi_1 - xi_2 onto the positive first axis;
/// identity for m = 1.
ClusterConfig normalize_orientation(const ClusterConfig& config);

/// Minimum over greedy permutation matching of the stacked distance. When
/// `isotropic`, both configurations are orientation-normalized first.
double config_distance(const ClusterConfig& a, const ClusterConfig& b, bool isotropic);

struct SeedDiagnostic {
  int seed_index = 0;
  bool converged = false;
  double residual = 0.0;
  std::string message;
};

struct KirchhoffSearch {
  std::vector<CriticalConfig> found;  // sorted by f_value, then lexicographically
  std::vector<SeedDiagnostic> diagnostics;
};

/// The automatic multistart seeds: regular simplex/circle configurations of
/// radius (n-2)^{1/n} scaled by {0.5, 1, 2}, then `random_count` uniform
/// configurations in [-3, 3]^n.
std::vector<ClusterConfig> auto_seeds(int m, int n, std::uint64_t rng_seed, int random_count = 20);

/// Multistart damped Newton on f_grad. Empty `seeds` selects auto_seeds.
KirchhoffSearch find_critical(const Mat& hessV, int m, int n,
                              const std::vector<ClusterConfig>& seeds, double tol = 1e-10,
                              std::uint64_t rng_seed = 1);

}  // namespace blowup
