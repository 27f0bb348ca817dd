#include "blowuplab/radial.hpp"

#include "blowuplab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace blowup {

void validate(const RadialProblem& problem) {
  check_dimension(problem.n);
  if (problem.radius != 1.0) throw std::domain_error("radial problems live on the unit ball");
  const double eps_max = 4.0 / (problem.n - 2);
  if (!(problem.eps > 0.0 && problem.eps < eps_max)) {
    std::ostringstream msg;
    msg << "eps = " << problem.eps << " outside (0, " << eps_max << ")";
    throw std::domain_error(msg.str());
  }
  if (!problem.v_radial) throw std::invalid_argument("v_radial is empty");
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const double v = problem.v_radial(r);
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "V(r) must be positive on [0,1]; V(" << r << ") = " << v;
      throw std::domain_error(msg.str());
    }
  }
}

double lambda_from_peak(int n, double u0) { return std::pow(u0 / c0(n), 2.0 / (n - 2)); }

ShotResult shoot(const RadialProblem& problem, double u0, const ShotOptions& options) {
  if (!(u0 > 0.0)) throw std::domain_error("shoot: u0 must be positive");
  const int n = problem.n;
  const double q = (n + 2.0) / (n - 2.0) - 1.0 - problem.eps;  // |u|^q u
  const auto& V = problem.v_radial;
  const bool linear = options.linear;

  const double lambda_est = lambda_from_peak(n, u0);
  const double r0 = options.r0 / std::max(1.0, lambda_est);
  const double curvature = (V(0.0) * u0 - (linear ? 0.0 : std::pow(u0, q + 1.0))) / (2.0 * n);
  Vec y0(2);
  y0 << u0 + curvature * r0 * r0, 2.0 * curvature * r0;

  const OdeRhs rhs = [&](double r, const Vec& y) {
    Vec d(2);
    const double u = y[0];
    const double nonlin = linear ? 0.0 : std::pow(std::abs(u), q) * u;
    d << y[1], V(r) * u - nonlin - (n - 1) / r * y[1];
    return d;
  };

  OdeOptions ode;
  ode.rtol = options.rtol;
  // The tail near r = 1 is of size u0 lambda^{2-n}; the absolute floor sits well below it.
  ode.atol = 1e-3 * options.rtol * u0 * std::min(1.0, std::pow(lambda_est, 2.0 - n));
  ode.initial_step = r0;
  if (options.stop_at_zero) ode.stop = [](double, const Vec& y) { return y[0] <= 0.0; };

  const auto traj = ode_integrate(rhs, y0, r0, 1.0, ode);

  ShotResult out;
  out.u0 = u0;
  out.r_start = r0;
  out.r.reserve(traj.size() + 1);
  out.r.push_back(0.0);
  out.u.push_back(u0);
  out.du.push_back(0.0);
  for (const auto& p : traj) {
    out.r.push_back(p.r);
    out.u.push_back(p.y[0]);
    out.du.push_back(p.y[1]);
  }
  for (std::size_t k = 1; k < out.u.size(); ++k) {
    if (out.u[k] <= 0.0) {
      out.crossed = out.u[k] < 0.0 || out.r[k] < 1.0;
      const double t = out.u[k - 1] / (out.u[k - 1] - out.u[k]);
      out.r_cross = out.r[k - 1] + t * (out.r[k] - out.r[k - 1]);
      break;
    }
  }
  out.terminal_value = out.u.back();
  return out;
}

namespace {

struct Bisection {
  double low = 0.0;   // positive up to r = 1
  double high = 0.0;  // crosses before r = 1
  ShotResult best;
  int shots = 0;
};

Bisection bisect_ground_state(const RadialProblem& problem, const GroundStateOptions& options, double rtol) {
  ShotOptions so;
  so.rtol = rtol;
  Bisection b;
  double u0 = options.u0_start;
  ShotResult shot = shoot(problem, u0, so);
  ++b.shots;
  // Geometric scan: walk down until positive, then up until crossing.
  int budget = options.scan_budget;
  while (shot.crossed && budget-- > 0) {
    u0 *= 0.5;
    shot = shoot(problem, u0, so);
    ++b.shots;
  }
  if (shot.crossed) throw NoBlowupSolution("no blow-up solution in range: every scanned u0 crosses zero");
  b.low = u0;
  b.best = shot;
  while (budget-- > 0) {
    u0 *= 2.0;
    shot = shoot(problem, u0, so);
    ++b.shots;
    if (shot.crossed) break;
    b.low = u0;
    b.best = shot;
  }
  if (!shot.crossed) throw NoBlowupSolution("no blow-up solution in range: no crossing within the scan budget");
  b.high = u0;

  // The boundary residual alone is a weak stopping test once u0 lambda^{2-n}
  // drops below it, so the bracket is always closed to near machine width.
  for (int it = 0; it < options.max_bisections; ++it) {
    if (b.high - b.low <= options.bracket_rtol * b.low) break;
    const double mid = std::sqrt(b.low * b.high);
    if (!(mid > b.low && mid < b.high)) break;
    shot = shoot(problem, mid, so);
    ++b.shots;
    if (shot.crossed) {
      b.high = mid;
    } else {
      b.low = mid;
      b.best = std::move(shot);
    }
  }
  return b;
}

}  // namespace

RadialSolution solve_ground_state(const RadialProblem& problem, const GroundStateOptions& options) {
  validate(problem);
  const int n = problem.n;
  const double rtol = options.rtol > 0.0 ? options.rtol : (n == 4 ? 1e-12 : 1e-10);
  Bisection coarse = bisect_ground_state(problem, options, rtol);

  RadialSolution sol;
  sol.u0 = coarse.low;
  sol.grid = coarse.best.r;
  sol.u = coarse.best.u;
  sol.boundary_residual = std::abs(coarse.best.terminal_value);
  sol.lambda_extracted = lambda_from_peak(n, sol.u0);
  sol.shots = coarse.shots;

  std::ostringstream msg;
  if (sol.boundary_residual > options.residual_tol * sol.u0) {
    msg << "boundary residual " << sol.boundary_residual << " exceeds " << options.residual_tol << " * u0";
    throw ContractViolation(msg.str());
  }
  for (std::size_t k = 1; k < sol.u.size(); ++k) {
    if (sol.grid[k] < 1.0 && !(sol.u[k] > 0.0)) {
      msg << "ground state not positive at r = " << sol.grid[k];
      throw ContractViolation(msg.str());
    }
    if (!(sol.u[k] < sol.u[k - 1])) {
      msg << "ground state not decreasing at r = " << sol.grid[k];
      throw ContractViolation(msg.str());
    }
  }

  GroundStateOptions fine_opts = options;
  fine_opts.u0_start = coarse.low;
  Bisection fine = bisect_ground_state(problem, fine_opts, rtol / 32.0);
  sol.shots += fine.shots;
  sol.lambda_fine = lambda_from_peak(n, fine.low);
  sol.resolution_change = rel_error(sol.lambda_extracted, sol.lambda_fine);
  if (sol.resolution_change > options.stability_tol) {
    msg << "lambda changes by " << sol.resolution_change << " under refinement";
    throw ContractViolation(msg.str());
  }
  sol.u.back() = 0.0;
  return sol;
}

double rho_of(int n, double eps, double lambda, double v0) {
  const auto& t = constants_for(n);
  const double log_factor = t.sigma == 1 ? std::abs(std::log(eps)) / 2.0 : 1.0;
  return lambda * lambda * eps / (t.kappa1 * v0 * log_factor);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

RateFit rate_experiment(int n, const RadialPotential& v_radial, const std::vector<double>& eps_list,
                        const GroundStateOptions& options) {
  check_dimension(n);
  for (std::size_t k = 1; k < eps_list.size(); ++k) {
    if (!(eps_list[k] < eps_list[k - 1])) throw std::invalid_argument("eps list must be strictly decreasing");
  }
  RateFit fit;
  fit.slope_target = n >= 5 ? -0.5 : std::numeric_limits<double>::quiet_NaN();
  const double v0 = v_radial(0.0);
  GroundStateOptions opts = options;
  std::vector<double> log_eps, log_lambda;
  for (const double eps : eps_list) {
    RateRow row;
    row.eps = eps;
    try {
      const auto sol = solve_ground_state(RadialProblem{n, eps, v_radial, 1.0}, opts);
      row.ok = true;
      row.u0 = sol.u0;
      row.lambda = sol.lambda_extracted;
      row.rho = rho_of(n, eps, row.lambda, v0);
      opts.u0_start = sol.u0;  // warm start: smaller eps concentrates more
      log_eps.push_back(std::log(eps));
      log_lambda.push_back(std::log(row.lambda));
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
    row.slope_running = ls_slope(log_eps, log_lambda);
    fit.rows.push_back(row);
  }

  std::vector<const RateRow*> solved;
  for (const auto& row : fit.rows) {
    if (row.ok) solved.push_back(&row);
  }
  fit.solved = static_cast<int>(solved.size());
  fit.slope = ls_slope(log_eps, log_lambda);
  if (!solved.empty()) fit.rho_last = solved.back()->rho;
  fit.lambda_monotone = !solved.empty();
  for (std::size_t k = 1; k < solved.size(); ++k) {
    if (!(solved[k]->lambda > solved[k - 1]->lambda)) fit.lambda_monotone = false;
  }
  if (solved.size() >= 3) {
    const std::size_t s = solved.size();
    const double d0 = std::abs(solved[s - 3]->rho - 1.0);
    const double d1 = std::abs(solved[s - 2]->rho - 1.0);
    const double d2 = std::abs(solved[s - 1]->rho - 1.0);
    fit.rho_monotone = d1 < d0 && d2 < d1;
  }
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

struct FvSystem {
  std::vector<double> r, vol, flux;  // flux[k] couples nodes k and k+1
};

FvSystem build_mesh(int n, double lambda, int intervals) {
  FvSystem s;
  const int m = intervals;
  const double kappa = std::asinh(lambda);
  s.r.resize(static_cast<std::size_t>(m) + 1);
  for (int k = 0; k <= m; ++k) s.r[static_cast<std::size_t>(k)] = std::sinh(kappa * k / m) / std::sinh(kappa);
  s.r.back() = 1.0;
  s.vol.assign(s.r.size(), 0.0);
  s.flux.assign(s.r.size() - 1, 0.0);
  for (std::size_t k = 0; k + 1 < s.r.size(); ++k) {
    const double mid = 0.5 * (s.r[k] + s.r[k + 1]);
    s.flux[k] = std::pow(mid, n - 1) / (s.r[k + 1] - s.r[k]);
  }
  for (std::size_t k = 0; k + 1 < s.r.size(); ++k) {
    const double lo = k == 0 ? 0.0 : 0.5 * (s.r[k - 1] + s.r[k]);
    const double hi = 0.5 * (s.r[k] + s.r[k + 1]);
    s.vol[k] = (std::pow(hi, n) - std::pow(lo, n)) / n;
  }
  return s;
}

/// Thomas algorithm; sub[k] couples row k to k-1, sup[k] to k+1.
std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                                      std::vector<double> rhs) {
  const std::size_t m = diag.size();
  for (std::size_t k = 1; k < m; ++k) {
    const double w = sub[k] / diag[k - 1];
    diag[k] -= w * sup[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) x[k] = (rhs[k] - sup[k] * x[k + 1]) / diag[k];
  return x;
}

}  // namespace

RadialProjection project_bubble_radial(int n, double lambda, const RadialPotential& v_radial,
                                       const ProjectionOptions& options) {
  check_dimension(n);
  if (!(lambda >= 10.0)) throw std::domain_error("project_bubble_radial: lambda must be >= 10");
  const double cz = c0(n);
  const double p = (n + 2.0) / (n - 2.0);
  const auto delta_at = [&](double r) {
    return cz * std::pow(lambda, (n - 2) / 2.0) * std::pow(1.0 + lambda * lambda * r * r, -(n - 2) / 2.0);
  };

  RadialProjection out;
  out.n = n;
  out.lambda = lambda;
  out.s_n = constants_for(n).S_n;
  for (int m = options.initial_intervals; m <= options.max_intervals; m *= 2) {
    const FvSystem s = build_mesh(n, lambda, m);
    const std::size_t nodes = s.r.size();
    std::vector<double> delta(nodes), vr(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      delta[k] = delta_at(s.r[k]);
      vr[k] = v_radial(s.r[k]);
      if (!(vr[k] > 0.0)) throw std::domain_error("project_bubble_radial: V must be positive on [0,1]");
    }
    // Unknowns w_0..w_{m-1}; w_m = delta(1) is Dirichlet data.
    const std::size_t unknowns = nodes - 1;
    std::vector<double> sub(unknowns, 0.0), diag(unknowns), sup(unknowns, 0.0), rhs(unknowns);
    for (std::size_t k = 0; k < unknowns; ++k) {
      const double left = k == 0 ? 0.0 : s.flux[k - 1];
      const double right = s.flux[k];
      diag[k] = left + right + vr[k] * s.vol[k];
      if (k > 0) sub[k] = -left;
      sup[k] = -right;
      rhs[k] = vr[k] * delta[k] * s.vol[k];
    }
    rhs[unknowns - 1] += s.flux[unknowns - 1] * delta.back();
    sup[unknowns - 1] = 0.0;
    std::vector<double> w = solve_tridiagonal(sub, diag, sup, rhs);
    w.push_back(delta.back());

    std::vector<double> pi(nodes);
    for (std::size_t k = 0; k < nodes; ++k) pi[k] = delta[k] - w[k];
    pi.back() = 0.0;

    // The residual is split by linearity into the consistency error of the
    // discrete Laplacian on delta and the residual of the defect solve. Node
    // differences of delta use log1p/expm1 to avoid cancellation.
    const double beta = (n - 2) / 2.0;
    const auto delta_diff = [&](std::size_t a, std::size_t b) {
      const double ra = s.r[a], rb = s.r[b];
      const double base = 1.0 + lambda * lambda * ra * ra;
      const double step = std::log1p(lambda * lambda * (rb - ra) * (rb + ra) / base);
      return delta[a] * std::expm1(-beta * step);
    };
    double residual = 0.0;
    const double scale = std::pow(delta[0], p);
    for (std::size_t k = 0; k < unknowns; ++k) {
      const double right_d = s.flux[k] * delta_diff(k, k + 1);
      const double left_d = k == 0 ? 0.0 : s.flux[k - 1] * delta_diff(k - 1, k);
      const double consistency = (left_d - right_d) / s.vol[k] - std::pow(delta[k], p);
      const double left_w = k == 0 ? 0.0 : s.flux[k - 1] * (w[k] - w[k - 1]);
      const double right_w = s.flux[k] * (w[k + 1] - w[k]);
      const double solve = vr[k] * delta[k] - ((left_w - right_w) / s.vol[k] + vr[k] * w[k]);
      residual = std::max(residual, std::abs(consistency + solve) / scale);
    }

    double energy = 0.0;
    for (std::size_t k = 0; k < unknowns; ++k) energy += std::pow(delta[k], p) * pi[k] * s.vol[k];
    energy *= sphere_measure(n);

    out.grid = s.r;
    out.delta = std::move(delta);
    out.pi_delta = std::move(pi);
    out.residual = residual;
    out.mesh_intervals = m;
    out.energy = energy;
    if (residual <= options.residual_tol) break;
  }
  out.min_value = *std::min_element(out.pi_delta.begin(), out.pi_delta.end());
  out.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    out.max_excess = std::max(out.max_excess, out.pi_delta[k] - out.delta[k]);
  }
  out.ordering_ok = out.min_value >= 0.0 && out.max_excess <= 0.0;
  out.energy_rel_error = rel_error(out.energy, out.s_n);
  if (out.residual > options.residual_tol) {
    std::ostringstream msg;
    msg << "project_bubble_radial: residual " << out.residual << " above " << options.residual_tol
        << " at the mesh budget (" << out.mesh_intervals << " intervals)";
    throw AccuracyError(msg.str(), out.energy, out.residual);
  }
  return out;
}

}  // namespace blowup
