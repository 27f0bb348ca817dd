#include "blowuplab/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace blowup {

double gamma_fn(double x) {
  if (!(x > 0.0)) throw std::domain_error("gamma_fn: argument must be positive");
  return std::tgamma(x);
}

double beta_fn(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta_fn: arguments must be positive");
  if (a + b < 150.0) return std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b);
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double sphere_measure(int n) {
  if (n < 1) throw std::domain_error("sphere_measure: dimension must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gauss_kronrod(const ScalarFn& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate_interval(const ScalarFn& f, double a, double b, double tol,
                                    int max_panels) {
  if (!(tol > 0.0)) throw std::domain_error("integrate_interval: tol must be positive");
  std::priority_queue<Panel> panels;
  panels.push(gauss_kronrod(f, a, b));
  int evaluations = 15;
  double value = panels.top().value;
  double error = panels.top().error;
  // Roundoff floor: demanding more than a few ulps of the running value stalls.
  const auto target = [&] { return std::max(tol, 50.0 * std::numeric_limits<double>::epsilon() * std::abs(value)); };
  while (error > target()) {
    if (static_cast<int>(panels.size()) >= max_panels) {
      throw AccuracyError("quadrature budget exhausted", value, error);
    }
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw AccuracyError("quadrature panel width underflow", value, error);
    }
    const Panel left = gauss_kronrod(f, worst.a, mid);
    const Panel right = gauss_kronrod(f, mid, worst.b);
    evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum from scratch: the running updates accumulate cancellation error.
  double sum = 0.0, err = 0.0;
  std::vector<Panel> all;
  all.reserve(panels.size());
  while (!panels.empty()) {
    all.push_back(panels.top());
    panels.pop();
  }
  std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  for (const auto& p : all) {
    sum += p.value;
    err += p.error;
  }
  if (!std::isfinite(sum)) throw AccuracyError("quadrature produced a non-finite value", sum, err);
  return {sum, err, evaluations};
}

QuadratureResult integrate_halfline(const ScalarFn& f, double tol, int max_panels) {
  const ScalarFn mapped = [&f](double t) {
    const double s = 1.0 - t;
    const double r = t / s;
    const double v = f(r) / (s * s);
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate_interval(mapped, 0.0, 1.0, tol, max_panels);
}

double radial_integral(int n, const ScalarFn& g, double tol) {
  if (n < 2) throw std::domain_error("radial_integral: dimension must be >= 2");
  const double measure = sphere_measure(n);
  const ScalarFn integrand = [&g, n](double r) { return g(r) * std::pow(r, n - 1); };
  return measure * integrate_halfline(integrand, tol / measure).value;
}

// ---------------------------------------------------------------------------

NewtonReport newton_solve(const VectorFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const NewtonOptions& options) {
  NewtonReport report;
  report.solution = x0;
  const auto safe_eval = [&](const Vec& x, Vec& out) {
    try {
      out = residual(x);
    } catch (const std::exception&) {
      return false;
    }
    return out.allFinite();
  };

  Vec x = x0;
  Vec fx;
  if (!safe_eval(x, fx)) {
    report.residual_norm = std::numeric_limits<double>::infinity();
    report.diagnostic = "residual not finite at the initial point";
    return report;
  }

  for (int iter = 0;; ++iter) {
    report.solution = x;
    report.residual_norm = fx.lpNorm<Eigen::Infinity>();
    report.iterations = iter;
    if (report.residual_norm <= options.tol) {
      report.converged = true;
      return report;
    }
    if (iter >= options.max_iter) {
      report.diagnostic = "maximum iterations reached";
      return report;
    }

    Mat jac;
    if (jacobian) {
      jac = jacobian(x);
    } else {
      const double h = options.fd_step * std::max(1.0, x.lpNorm<Eigen::Infinity>());
      jac = fd_jacobian(residual, x, h);
    }
    if (!jac.allFinite()) {
      report.diagnostic = "Jacobian not finite";
      return report;
    }

    Vec step;
    Eigen::FullPivLU<Mat> lu(jac);
    lu.setThreshold(1e-13);
    if (lu.isInvertible()) {
      step = lu.solve(-fx);
    } else if (options.allow_rank_deficient) {
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(jac);
      cod.setThreshold(1e-10);
      step = cod.solve(-fx);
    } else {
      std::ostringstream msg;
      msg << "singular Jacobian (rank " << lu.rank() << " of " << jac.cols() << ") at iteration "
          << iter;
      report.diagnostic = msg.str();
      return report;
    }

    const double norm0 = fx.norm();
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      Vec trial = x + t * step;
      Vec ft;
      if (safe_eval(trial, ft) && ft.norm() < norm0) {
        x = std::move(trial);
        fx = std::move(ft);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      report.diagnostic = "line search failed to reduce the residual";
      return report;
    }
    if (x.lpNorm<Eigen::Infinity>() > options.divergence_bound) {
      report.solution = x;
      report.residual_norm = fx.lpNorm<Eigen::Infinity>();
      report.iterations = iter + 1;
      report.diagnostic = "iterate diverged";
      return report;
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<OdePoint> ode_integrate(const OdeRhs& rhs, const Vec& y0, double r0, double r1,
                                    const OdeOptions& options) {
  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (!(options.rtol > 0.0) && !(options.atol > 0.0)) {
    throw std::domain_error("ode_integrate: tolerance must be positive");
  }
  std::vector<OdePoint> out;
  out.push_back({r0, y0});
  if (r1 == r0) return out;
  const double dir = r1 > r0 ? 1.0 : -1.0;
  const double span = std::abs(r1 - r0);

  double r = r0;
  Vec y = y0;
  Vec k1 = rhs(r, y);
  double h = options.initial_step > 0.0 ? options.initial_step : 1e-3 * span;
  h = std::min(h, span);

  for (long steps = 0; steps < options.max_steps; ++steps) {
    const double remaining = std::abs(r1 - r);
    if (remaining <= 0.0) return out;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const double hs = dir * h;
    const Vec k2 = rhs(r + c2 * hs, y + hs * (a21 * k1));
    const Vec k3 = rhs(r + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vec k4 = rhs(r + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = rhs(r + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 =
        rhs(r + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = rhs(last ? r1 : r + hs, y_new);
    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale =
          options.atol + options.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err_norm = std::max(err_norm, std::abs(err[i]) / scale);
    }
    if (!std::isfinite(err_norm)) err_norm = 1e10;

    if (err_norm <= 1.0) {
      r = last ? r1 : r + hs;
      y = std::move(y_new);
      k1 = k7;
      out.push_back({r, y});
      if (last) return out;
      if (options.stop && options.stop(r, y)) return out;
      const double factor = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -0.2);
      h *= std::clamp(factor, 0.2, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9);
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r))) {
      std::ostringstream msg;
      msg << "ode_integrate: step size underflow at r = " << r;
      throw IntegrationError(msg.str(), r);
    }
  }
  throw IntegrationError("ode_integrate: step budget exhausted", r);
}

// ---------------------------------------------------------------------------

double default_fd_step(const Vec& x) {
  return 1e-6 * std::max(1.0, x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0);
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double fp = f(probe);
    probe[k] = x[k] - h;
    const double fm = f(probe);
    probe[k] = x[k];
    grad[k] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Mat fd_jacobian(const VectorFn& f, const Vec& x, double h) {
  Vec probe = x;
  Mat jac;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const Vec fp = f(probe);
    probe[k] = x[k] - h;
    const Vec fm = f(probe);
    probe[k] = x[k];
    if (k == 0) jac.resize(fp.size(), x.size());
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double rel_error(const Vec& a, const Vec& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

}  // namespace blowup
