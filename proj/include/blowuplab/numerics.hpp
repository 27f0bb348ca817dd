#pragma once

// Numerical kernel: special functions, half-line quadrature, damped Newton,
// adaptive Runge-Kutta integration and finite-difference checks.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when an adaptive scheme exhausts its budget. Carries the best
/// estimate obtained so far.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double best_estimate, double error_estimate)
      : std::runtime_error(what), best_estimate_(best_estimate), error_estimate_(error_estimate) {}
  double best_estimate() const { return best_estimate_; }
  double error_estimate() const { return error_estimate_; }

 private:
  double best_estimate_;
  double error_estimate_;
};

/// Step-size underflow in ode_integrate; `where()` is the abscissa that failed.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double where)
      : std::runtime_error(what), where_(where) {}
  double where() const { return where_; }

 private:
  double where_;
};

double gamma_fn(double x);
double beta_fn(double a, double b);

/// meas(S^{n-1}) = 2 pi^{n/2} / Gamma(n/2).
double sphere_measure(int n);

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  int evaluations = 0;
};

using ScalarFn = std::function<double(double)>;

constexpr double kDefaultQuadTol = 1e-12;

/// Globally adaptive 7/15-point Gauss-Kronrod on [a, b].
QuadratureResult integrate_interval(const ScalarFn& f, double a, double b,
                                    double tol = kDefaultQuadTol, int max_panels = 4000);

/// Integral over (0, inf) through r = t / (1 - t), t in (0, 1).
QuadratureResult integrate_halfline(const ScalarFn& f, double tol = kDefaultQuadTol,
                                    int max_panels = 4000);

/// Integral of g(|x|) over R^n.
double radial_integral(int n, const ScalarFn& g, double tol = kDefaultQuadTol);

// ---------------------------------------------------------------------------
// Newton

using VectorFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
  int max_halvings = 30;
  /// Minimum-norm steps through rank-deficient Jacobians instead of giving up.
  bool allow_rank_deficient = false;
  /// Relative step of the central-difference Jacobian.
  double fd_step = 1e-7;
  /// Iteration aborts when a component leaves this magnitude.
  double divergence_bound = 1e12;
};

struct NewtonReport {
  Vec solution;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

/// Damped Newton: backtracking halves the step until the residual 2-norm drops.
/// Converged iff ||F(x)||_inf <= tol. An empty `jacobian` selects central
/// finite differences.
NewtonReport newton_solve(const VectorFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const NewtonOptions& options = {});

// ---------------------------------------------------------------------------
// ODE

struct OdePoint {
  double r;
  Vec y;
};

using OdeRhs = std::function<Vec(double, const Vec&)>;
/// Returning true after an accepted step ends the integration there.
using OdeStop = std::function<bool(double, const Vec&)>;

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 picks one from the span
  long max_steps = 2000000;
  OdeStop stop;
};

/// Dormand-Prince 5(4) with per-step error control
/// |err_i| <= atol + rtol * max(|y_i|, |y_new_i|).
std::vector<OdePoint> ode_integrate(const OdeRhs& rhs, const Vec& y0, double r0, double r1,
                                    const OdeOptions& options);

inline std::vector<OdePoint> ode_integrate(const OdeRhs& rhs, const Vec& y0, double r0, double r1,
                                           double tol) {
  OdeOptions options;
  options.rtol = tol;
  options.atol = tol;
  return ode_integrate(rhs, y0, r0, r1, options);
}

// ---------------------------------------------------------------------------
// Finite differences

/// h = 1e-6 * max(1, ||x||_inf).
double default_fd_step(const Vec& x);

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h);
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
  return fd_gradient(f, x, default_fd_step(x));
}

/// Central-difference Jacobian, column k = (F(x + h e_k) - F(x - h e_k)) / 2h.
Mat fd_jacobian(const VectorFn& f, const Vec& x, double h);

/// Relative deviation |a - b| / max(|a|, |b|, floor).
double rel_error(double a, double b, double floor = 1e-300);
double rel_error(const Vec& a, const Vec& b, double floor = 1e-300);

}  // namespace blowup
