#pragma once

#include "blowuplab/bubbles.hpp"
#include "blowuplab/kirchhoff.hpp"
#include "blowuplab/potentials.hpp"

#include <optional>
#include <string>
#include <vector>

namespace blowup {

/// Unknowns of the leading-order reduced system for N bubbles.
struct BalancingState {
  int n = 0;
  double eps = 0.0;
  BubbleFamily family;
  Vec alphas;
};

/// Validity guards of the asymptotic regime: eps ln(lambda_i) <= 0.5 and
/// eps_ij <= 0.1. Returns an empty string when the state is inside.
std::string guard_violation(const BalancingState& state);

/// Root of alpha^{p-1-eps} lambda^{-eps(n-2)/2} = 1,
/// alpha = lambda^{eps (n-2)^2 / (2 (4 - eps (n-2)))}.
double alpha_of_lambda(int n, double eps, double lambda);

/// ln^{sigma_n}(lambda) / lambda^2.
double rate_term(int n, double lambda);

/// eta(eps) = eps^{(n-4)/(2n)} for n >= 5, (2 / |ln eps|)^{1/4} for n = 4.
double eta(int n, double eps);

/// Component i: c2 eps - cbar2 sum_{j!=i} lambda_i d eps_ij/d lambda_i
///              - c(n) ln^{sigma}(lambda_i)/lambda_i^2 V(a_i).
Vec residual_EL(const BalancingState& state, const PotentialSpec& potential);

/// Block i: c2(n) alpha_i ln^{sigma}(lambda_i)/lambda_i^3 grad V(a_i)
///          - cbar2 sum_{j!=i} alpha_j (1/lambda_i) d eps_ij/d a_i.
Vec residual_EA(const BalancingState& state, const PotentialSpec& potential);

enum class RateBranch { LogCorrected, Plain };

struct RatePrediction {
  bool feasible = true;
  double lambda_predicted = 0.0;
  RateBranch formula_branch = RateBranch::Plain;
  double kappa1_used = 0.0;
  double v_at_point = 0.0;
};

/// Single-bubble rate: lambda = sqrt(kappa1 V / eps) for n >= 5; for n = 4 the
/// larger root of lambda^2 / ln(lambda) = kappa1 V / eps.
RatePrediction predicted_lambda_single(int n, double v_at_z, double eps);

/// Term signs of the weighted (EL) combination sum_i 2^{k(i)} EL_i, where k
/// ranks bubbles by increasing lambda. With V < 0 every term is >= 0 and the
/// eps term is > 0, so the equations cannot all vanish.
struct InfeasibilityCertificate {
  bool applicable = false;
  bool infeasible = false;
  double eps_term = 0.0;          // minimum over checked states, > 0
  double interaction_term = 0.0;  // minimum over checked states, >= 0
  double potential_term = 0.0;    // minimum over checked states, >= 0
  int states_checked = 0;
  std::string note;
};

InfeasibilityCertificate infeasibility_check(int n, double eps, const PotentialSpec& potential,
                                             const Box& box,
                                             const std::optional<BalancingState>& state = {},
                                             int random_states = 200, unsigned seed = 11);

struct SolveOptions {
  double tol = 1e-9;
  int max_iter = 100;
  /// Region for the sign test of V; defaults to a box around the initial centers.
  std::optional<Box> domain;
};

enum class SolveStatus { Converged, NotConverged, Infeasible, GuardViolated };

std::string to_string(SolveStatus status);

struct SolveOutcome {
  SolveStatus status = SolveStatus::NotConverged;
  BalancingState state;
  double el_norm = 0.0;  // ||residual_EL||_inf
  double ea_norm = 0.0;  // ||residual_EA||_inf
  int iterations = 0;
  std::string diagnostic;
  std::optional<InfeasibilityCertificate> certificate;
};

/// Newton on the stacked (EL, EA) residuals in the unknowns (ln lambda_i, a_i),
/// alphas slaved to alpha_of_lambda. Converged states satisfy
/// ||EL||_inf <= tol eps and ||EA||_inf <= tol max_i ln^{sigma}(lambda_i)/lambda_i^3.
SolveOutcome solve_system(int n, double eps, const PotentialSpec& potential,
                          const BalancingState& init, const SolveOptions& options = {});

/// Analytic starting state: lambda_i from the single-bubble law at V(z) and
/// a_i = z + sigma eta(eps) xi_i with sigma = 1 / (kappa2 V(z)^{(n-4)/(2n)}).
BalancingState initial_cluster_state(int n, double eps, const PotentialSpec& potential, const Vec& z,
                                     const ClusterConfig& seed);

enum class VExponent { Derived, Stated };

/// b_i = kappa2 V(z)^e eta(eps)^{-1} (a_i - z), e = (n-4)/(2n) (Derived) or
/// (n-4)/(n-2) (Stated, compatibility).
std::vector<Vec> rescale_cluster(const BalancingState& state, const Vec& z, double v_at_z,
                                 VExponent exponent = VExponent::Derived);

/// (eps + sum_{k != j} eps_kj) / sum_i ln^{sigma}(lambda_i)/lambda_i^2.
double rate_ratio_diagnostic(const BalancingState& state);

struct SweepPoint {
  double eps = 0.0;
  SolveOutcome outcome;
};

struct SweepOptions {
  SolveOptions solve;
  /// When set, warm starts rescale centers about this point by eta ratios.
  std::optional<Vec> cluster_center;
};

/// Continuation over a strictly decreasing eps list, warm-starting each solve
/// from the previous converged state.
std::vector<SweepPoint> continuation_sweep(int n, const PotentialSpec& potential,
                                           const BalancingState& init,
                                           const std::vector<double>& eps_list,
                                           const SweepOptions& options = {});

/// start, start * factor, ... while >= stop (with relative slack).
std::vector<double> geometric_eps(double start, double stop, double factor);

enum class BlowupKind { Empty, IsolatedSimple, NonSimple };
std::string to_string(BlowupKind kind);

/// beta(eps) of the isolated-simple scaling.
double beta_scale(int n, double eps);
/// |ln eps|^{sigma/4} eps^{-(n-4)/(2n)}.
double cluster_scale(int n, double eps);

struct PointClassification {
  Vec z;
  BlowupKind kind = BlowupKind::Empty;
  std::vector<int> members;
  /// Isolated: sup of beta(eps)|a - z|. Cluster: sup over members of cluster_scale|a_i - z|.
  double measured_sup = 0.0;
  /// Cluster only: per-member infimum of cluster_scale |a_i - z| over the sweep.
  std::vector<double> member_inf;
  int bounded_below_count = 0;
  /// Heuristic: the scaled distance does not grow along the sweep tail.
  bool bounded = true;
};

/// `sweep` must hold solved states with strictly decreasing eps.
std::vector<PointClassification> classify_blowup(const std::vector<BalancingState>& sweep,
                                                 const std::vector<Vec>& critical_points,
                                                 double assign_radius = 0.25);

}  // namespace blowup
