#pragma once

// Radial ground states of -u'' - (n-1)/r u' + V(r) u = |u|^{p-1-eps} u on the
// unit ball, u(1) = 0, and the radial projection of a centered bubble.

#include "blowuplab/numerics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace blowup {

using RadialPotential = std::function<double(double)>;

struct RadialProblem {
  int n = 5;
  double eps = 1e-2;
  RadialPotential v_radial = [](double) { return 1.0; };
  double radius = 1.0;
};

/// Throws std::domain_error when V is not positive on sampled radii, eps is
/// outside (0, 4/(n-2)) or n is unsupported.
void validate(const RadialProblem& problem);

struct ShotOptions {
  double r0 = 1e-6;  // divided by max(1, lambda estimate) before use
  double rtol = 1e-10;
  bool stop_at_zero = true;
  /// Drops the nonlinearity (linear sanity mode).
  bool linear = false;
};

struct ShotResult {
  double u0 = 0.0;
  double r_start = 0.0;
  /// u at r = 1, or at the stopping radius when `crossed` and stop_at_zero.
  double terminal_value = 0.0;
  bool crossed = false;
  double r_cross = 0.0;  // linearly interpolated first zero
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
};

ShotResult shoot(const RadialProblem& problem, double u0, const ShotOptions& options = {});

struct RadialSolution {
  std::vector<double> grid;
  std::vector<double> u;
  double u0 = 0.0;
  double lambda_extracted = 0.0;
  double boundary_residual = 0.0;  // |u(1)|
  double lambda_fine = 0.0;        // repeat at rtol / 32
  double resolution_change = 0.0;  // relative change of lambda between passes
  int shots = 0;
};

struct GroundStateOptions {
  /// Shooting tolerance; 0 selects 1e-12 for n = 4 (tail u0 / lambda^2 is
  /// sensitive to core error) and 1e-10 otherwise.
  double rtol = 0.0;
  /// Geometric bracket scan starts here (1 when not set).
  double u0_start = 1.0;
  int scan_budget = 80;
  int max_bisections = 200;
  double residual_tol = 1e-9;   // |u(1)| <= residual_tol * u0
  double bracket_rtol = 1e-13;  // bisection stops at this relative bracket width
  double stability_tol = 1e-6;  // relative change of lambda between passes
};

/// No bracket within the scan budget.
class NoBlowupSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a contract (positivity, monotonicity, residual, resolution
/// stability) fails after the solve.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RadialSolution solve_ground_state(const RadialProblem& problem, const GroundStateOptions& options = {});

/// lambda = (u0 / c0)^{2/(n-2)}.
double lambda_from_peak(int n, double u0);

struct RateRow {
  double eps = 0.0;
  bool ok = false;
  double u0 = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
  double slope_running = 0.0;  // NaN until two points are available
  std::string failure;
};

struct RateFit {
  std::vector<RateRow> rows;
  int solved = 0;
  double slope = 0.0;
  double slope_target = -0.5;
  double rho_last = 0.0;
  /// |rho - 1| strictly decreasing over the last three solved points.
  bool rho_monotone = false;
  /// lambda strictly increasing as eps decreases over solved rows.
  bool lambda_monotone = false;
};

/// rho(eps) = lambda^2 eps / (kappa1 V(0) (|ln eps|/2)^{sigma}).
double rho_of(int n, double eps, double lambda, double v0);

RateFit rate_experiment(int n, const RadialPotential& v_radial, const std::vector<double>& eps_list,
                        const GroundStateOptions& options = {});

/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RadialProjection {
  int n = 0;
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> pi_delta;
  std::vector<double> delta;
  /// max |(-Delta_h + V) pi_delta - delta^p| / max delta^p over interior nodes.
  double residual = 0.0;
  bool ordering_ok = false;
  double min_value = 0.0;   // min pi_delta
  double max_excess = 0.0;  // max (pi_delta - delta)
  double energy = 0.0;      // |S| int delta^p pi_delta r^{n-1} dr
  double s_n = 0.0;
  double energy_rel_error = 0.0;
  int mesh_intervals = 0;
};

struct ProjectionOptions {
  int initial_intervals = 2000;
  int max_intervals = 1 << 22;
  double residual_tol = 1e-8;
};

/// Finite-volume solve of (-Delta + V) pi_delta = delta^p, pi_delta(1) = 0,
/// on r = sinh(k t) / sinh(k), k = asinh(lambda). The defect w = delta - pi_delta
/// solves an M-matrix system with nonnegative data. The mesh is doubled until
/// the residual meets `residual_tol`.
RadialProjection project_bubble_radial(int n, double lambda, const RadialPotential& v_radial,
                                       const ProjectionOptions& options = {});

}  // namespace blowup
