#include "blowuplab/balancing.hpp"

#include "blowuplab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace blowup {

std::string guard_violation(const BalancingState& state) {
  const auto& fam = state.family;
  std::ostringstream msg;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const double v = state.eps * std::log(fam[i].lambda);
    if (v > 0.5) {
      msg << "eps*ln(lambda_" << i << ") = " << v << " > 0.5";
      return msg.str();
    }
    for (std::size_t j = i + 1; j < fam.size(); ++j) {
      const double e = eps_interaction(state.n, fam[i], fam[j]);
      if (e > 0.1) {
        msg << "eps_" << i << j << " = " << e << " > 0.1";
        return msg.str();
      }
    }
  }
  return {};
}

double alpha_of_lambda(int n, double eps, double lambda) {
  const double denom = 4.0 - eps * (n - 2);
  if (!(denom > 0.0)) throw std::domain_error("alpha_of_lambda: eps outside the subcritical range");
  return std::pow(lambda, eps * (n - 2) * (n - 2) / (2.0 * denom));
}

double rate_term(int n, double lambda) {
  const double base = 1.0 / (lambda * lambda);
  return n == 4 ? std::log(lambda) * base : base;
}

double eta(int n, double eps) {
  if (n == 4) return std::pow(2.0 / std::abs(std::log(eps)), 0.25);
  return std::pow(eps, (n - 4.0) / (2.0 * n));
}

namespace {

double log_pow_sigma(int n, double lambda) { return n == 4 ? std::log(lambda) : 1.0; }

}  // namespace

Vec residual_EL(const BalancingState& state, const PotentialSpec& potential) {
  const int n = state.n;
  const auto& t = constants_for(n);
  const auto& fam = state.family;
  Vec r(static_cast<Eigen::Index>(fam.size()));
  for (std::size_t i = 0; i < fam.size(); ++i) {
    double interaction = 0.0;
    for (std::size_t j = 0; j < fam.size(); ++j) {
      if (j != i) interaction += lambda_deps_dlambda(n, fam[i], fam[j]);
    }
    r[static_cast<Eigen::Index>(i)] = t.c2 * state.eps - t.cbar2 * interaction -
                                      t.c_n * rate_term(n, fam[i].lambda) * potential.value(fam[i].a);
  }
  return r;
}

Vec residual_EA(const BalancingState& state, const PotentialSpec& potential) {
  const int n = state.n;
  const auto& t = constants_for(n);
  const auto& fam = state.family;
  Vec r(static_cast<Eigen::Index>(fam.size()) * n);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const double li = fam[i].lambda;
    Vec block = t.c2_n * state.alphas[static_cast<Eigen::Index>(i)] * log_pow_sigma(n, li) /
                (li * li * li) * potential.gradient(fam[i].a);
    for (std::size_t j = 0; j < fam.size(); ++j) {
      if (j == i) continue;
      block -= t.cbar2 * state.alphas[static_cast<Eigen::Index>(j)] / li * deps_da(n, fam[i], fam[j]);
    }
    r.segment(static_cast<Eigen::Index>(i) * n, n) = block;
  }
  return r;
}

RatePrediction predicted_lambda_single(int n, double v_at_z, double eps) {
  check_dimension(n);
  RatePrediction out;
  out.kappa1_used = constants_for(n).kappa1;
  out.v_at_point = v_at_z;
  out.formula_branch = n == 4 ? RateBranch::LogCorrected : RateBranch::Plain;
  if (!(v_at_z > 0.0) || !(eps > 0.0)) {
    out.feasible = false;
    return out;
  }
  const double target = out.kappa1_used * v_at_z / eps;
  if (n >= 5) {
    out.lambda_predicted = std::sqrt(target);
    return out;
  }
  // lambda^2 / ln(lambda) = target; in s = ln(lambda): 2s - ln s = ln(target),
  // increasing for s > 1/2 where the larger root lives.
  const double log_target = std::log(target);
  if (!(target > 2.0 * std::exp(1.0))) {
    out.feasible = false;
    return out;
  }
  double lo = 0.5, hi = std::max(1.0, log_target);
  double s = std::max(1.0, 0.5 * log_target);
  for (int it = 0; it < 200; ++it) {
    const double f = 2.0 * s - std::log(s) - log_target;
    if (f > 0.0) hi = s; else lo = s;
    double next = s - f / (2.0 - 1.0 / s);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15 * s) {
      s = next;
      break;
    }
    s = next;
  }
  out.lambda_predicted = std::exp(s);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct WeightedTerms {
  double eps_term = 0.0;
  double interaction_term = 0.0;
  double potential_term = 0.0;
};

WeightedTerms weighted_el_terms(const BalancingState& state, const PotentialSpec& potential) {
  const int n = state.n;
  const auto& t = constants_for(n);
  const auto& fam = state.family;
  const std::size_t count = fam.size();
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return fam[x].lambda < fam[y].lambda; });
  std::vector<double> weight(count);
  for (std::size_t k = 0; k < count; ++k) weight[order[k]] = std::ldexp(1.0, static_cast<int>(k));

  WeightedTerms w;
  for (std::size_t i = 0; i < count; ++i) {
    w.eps_term += weight[i] * t.c2 * state.eps;
    double interaction = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      if (j != i) interaction += lambda_deps_dlambda(n, fam[i], fam[j]);
    }
    w.interaction_term -= weight[i] * t.cbar2 * interaction;
    w.potential_term -= weight[i] * t.c_n * rate_term(n, fam[i].lambda) * potential.value(fam[i].a);
  }
  return w;
}

}  // namespace

InfeasibilityCertificate infeasibility_check(int n, double eps, const PotentialSpec& potential,
                                             const Box& box, const std::optional<BalancingState>& state,
                                             int random_states, unsigned seed) {
  InfeasibilityCertificate cert;
  if (sampled_sign(potential, box) != -1) {
    cert.note = "not applicable: V is not negative on the sampled box";
    return cert;
  }
  cert.applicable = true;
  cert.eps_term = cert.interaction_term = cert.potential_term = std::numeric_limits<double>::infinity();

  const auto absorb = [&](const BalancingState& s) {
    const auto w = weighted_el_terms(s, potential);
    cert.eps_term = std::min(cert.eps_term, w.eps_term);
    cert.interaction_term = std::min(cert.interaction_term, w.interaction_term);
    cert.potential_term = std::min(cert.potential_term, w.potential_term);
    ++cert.states_checked;
  };

  const std::size_t count = state ? state->family.size() : 2;
  if (state) absorb(*state);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_lambda(std::log(10.0), std::log(1e4));
  for (int s = 0; s < random_states; ++s) {
    std::vector<Bubble> bubbles;
    for (std::size_t i = 0; i < count; ++i) {
      Vec a(n);
      for (int c = 0; c < n; ++c) a[c] = box.center[c] + box.half_width * unit(rng);
      bubbles.push_back({a, std::exp(log_lambda(rng))});
    }
    Vec alphas(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) alphas[static_cast<Eigen::Index>(i)] = alpha_of_lambda(n, eps, bubbles[i].lambda);
    absorb(BalancingState{n, eps, BubbleFamily(n, std::move(bubbles)), alphas});
  }

  cert.infeasible = cert.eps_term > 0.0 && cert.interaction_term >= 0.0 && cert.potential_term >= 0.0;
  std::ostringstream note;
  note << "weighted EL sum: eps term " << (cert.eps_term > 0.0 ? "> 0" : "<= 0") << ", interaction term "
       << (cert.interaction_term >= 0.0 ? ">= 0" : "< 0") << ", potential term "
       << (cert.potential_term >= 0.0 ? ">= 0" : "< 0") << " over " << cert.states_checked << " states";
  cert.note = note.str();
  return cert;
}

// ---------------------------------------------------------------------------

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::NotConverged: return "not-converged";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::GuardViolated: return "guard-violated";
  }
  return "unknown";
}

namespace {

BalancingState unpack(int n, double eps, std::size_t count, const Vec& x) {
  std::vector<Bubble> bubbles;
  Vec alphas(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double lambda = std::exp(x[k]);
    bubbles.push_back({x.segment(static_cast<Eigen::Index>(count) + k * n, n), lambda});
    alphas[k] = alpha_of_lambda(n, eps, lambda);
  }
  return {n, eps, BubbleFamily(n, std::move(bubbles)), alphas};
}

Vec pack(const BalancingState& s) {
  const auto count = static_cast<Eigen::Index>(s.family.size());
  Vec x(count * (1 + s.n));
  for (Eigen::Index k = 0; k < count; ++k) {
    x[k] = std::log(s.family[static_cast<std::size_t>(k)].lambda);
    x.segment(count + k * s.n, s.n) = s.family[static_cast<std::size_t>(k)].a;
  }
  return x;
}

double ea_scale(const BalancingState& s) {
  double scale = 0.0;
  for (const auto& b : s.family.bubbles()) {
    scale = std::max(scale, log_pow_sigma(s.n, b.lambda) / (b.lambda * b.lambda * b.lambda));
  }
  return scale;
}

Box default_domain(const BalancingState& s) {
  Vec center = Vec::Zero(s.n);
  for (const auto& b : s.family.bubbles()) center += b.a;
  center /= static_cast<double>(s.family.size());
  double spread = 0.0;
  for (const auto& b : s.family.bubbles()) spread = std::max(spread, (b.a - center).lpNorm<Eigen::Infinity>());
  return {center, std::max(0.5, 2.0 * spread)};
}

}  // namespace

SolveOutcome solve_system(int n, double eps, const PotentialSpec& potential, const BalancingState& init,
                          const SolveOptions& options) {
  check_dimension(n);
  if (init.n != n || init.family.dim() != n) throw std::invalid_argument("solve_system: dimension mismatch");
  if (!(eps > 0.0)) throw std::domain_error("solve_system: eps must be positive");
  SolveOutcome out;
  out.state = init;
  out.state.eps = eps;

  const Box domain = options.domain ? *options.domain : default_domain(init);
  if (sampled_sign(potential, domain) == -1) {
    BalancingState probe = init;
    probe.eps = eps;
    out.certificate = infeasibility_check(n, eps, potential, domain, probe);
    if (out.certificate->infeasible) {
      out.status = SolveStatus::Infeasible;
      out.diagnostic = "V < 0 on the domain: " + out.certificate->note;
      return out;
    }
  }

  const std::size_t count = init.family.size();
  const VectorFn scaled = [&](const Vec& x) {
    const BalancingState s = unpack(n, eps, count, x);
    Vec f(x.size());
    const auto c = static_cast<Eigen::Index>(count);
    f.head(c) = residual_EL(s, potential) / eps;
    f.tail(c * n) = residual_EA(s, potential) / ea_scale(s);
    return f;
  };
  NewtonOptions opts;
  opts.tol = options.tol;
  opts.max_iter = options.max_iter;
  opts.allow_rank_deficient = true;  // constant V leaves a single center undetermined
  opts.fd_step = 1e-7;
  const auto report = newton_solve(scaled, JacobianFn{}, pack(init), opts);
  out.iterations = report.iterations;

  try {
    out.state = unpack(n, eps, count, report.solution);
  } catch (const std::exception& e) {
    out.status = SolveStatus::NotConverged;
    out.diagnostic = e.what();
    return out;
  }
  out.el_norm = residual_EL(out.state, potential).lpNorm<Eigen::Infinity>();
  out.ea_norm = residual_EA(out.state, potential).lpNorm<Eigen::Infinity>();
  if (!report.converged) {
    out.status = SolveStatus::NotConverged;
    out.diagnostic = report.diagnostic;
    return out;
  }
  const std::string violation = guard_violation(out.state);
  if (!violation.empty()) {
    out.status = SolveStatus::GuardViolated;
    out.diagnostic = violation;
    return out;
  }
  out.status = SolveStatus::Converged;
  return out;
}

BalancingState initial_cluster_state(int n, double eps, const PotentialSpec& potential, const Vec& z,
                                     const ClusterConfig& seed) {
  const double vz = potential.value(z);
  const auto pred = predicted_lambda_single(n, vz, eps);
  if (!pred.feasible) throw std::domain_error("initial_cluster_state: V(z) must be positive");
  const double sigma = 1.0 / (constants_for(n).kappa2 * std::pow(vz, (n - 4.0) / (2.0 * n)));
  const double scale = sigma * eta(n, eps);
  std::vector<Bubble> bubbles;
  Vec alphas(seed.size());
  for (int i = 0; i < seed.size(); ++i) {
    bubbles.push_back({z + scale * seed[i], pred.lambda_predicted});
    alphas[i] = alpha_of_lambda(n, eps, pred.lambda_predicted);
  }
  return {n, eps, BubbleFamily(n, std::move(bubbles)), alphas};
}

std::vector<Vec> rescale_cluster(const BalancingState& state, const Vec& z, double v_at_z, VExponent exponent) {
  const int n = state.n;
  const double e = exponent == VExponent::Derived ? (n - 4.0) / (2.0 * n) : (n - 4.0) / (n - 2.0);
  const double factor = constants_for(n).kappa2 * std::pow(v_at_z, e) / eta(n, state.eps);
  std::vector<Vec> out;
  for (const auto& b : state.family.bubbles()) out.push_back(factor * (b.a - z));
  return out;
}

double rate_ratio_diagnostic(const BalancingState& state) {
  const auto& fam = state.family;
  double numer = state.eps, denom = 0.0;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    denom += rate_term(state.n, fam[i].lambda);
    for (std::size_t j = 0; j < fam.size(); ++j) {
      if (j != i) numer += eps_interaction(state.n, fam[i], fam[j]);
    }
  }
  return numer / denom;
}

// ---------------------------------------------------------------------------

std::vector<SweepPoint> continuation_sweep(int n, const PotentialSpec& potential, const BalancingState& init,
                                           const std::vector<double>& eps_list, const SweepOptions& options) {
  for (std::size_t k = 1; k < eps_list.size(); ++k) {
    if (!(eps_list[k] < eps_list[k - 1])) throw std::invalid_argument("eps list must be strictly decreasing");
  }
  std::vector<SweepPoint> out;
  BalancingState warm = init;
  bool have_solution = false;
  for (const double eps : eps_list) {
    BalancingState start = warm;
    if (have_solution) {
      std::vector<Bubble> bubbles;
      for (const auto& b : warm.family.bubbles()) {
        const double v = potential.value(options.cluster_center ? *options.cluster_center : b.a);
        const auto before = predicted_lambda_single(n, v, warm.eps);
        const auto after = predicted_lambda_single(n, v, eps);
        const double lambda =
            before.feasible && after.feasible ? b.lambda * after.lambda_predicted / before.lambda_predicted : b.lambda;
        Vec a = b.a;
        if (options.cluster_center) {
          const Vec& z = *options.cluster_center;
          a = z + (b.a - z) * (eta(n, eps) / eta(n, warm.eps));
        }
        bubbles.push_back({a, lambda});
      }
      start.family = BubbleFamily(n, std::move(bubbles));
    }
    start.eps = eps;
    for (std::size_t i = 0; i < start.family.size(); ++i) {
      start.alphas[static_cast<Eigen::Index>(i)] = alpha_of_lambda(n, eps, start.family[i].lambda);
    }
    SweepPoint point{eps, solve_system(n, eps, potential, start, options.solve)};
    if (point.outcome.status == SolveStatus::Converged) {
      warm = point.outcome.state;
      have_solution = true;
    }
    out.push_back(std::move(point));
  }
  return out;
}

std::vector<double> geometric_eps(double start, double stop, double factor) {
  if (!(start > 0.0) || !(stop > 0.0) || !(factor > 0.0 && factor < 1.0)) {
    throw std::invalid_argument("geometric_eps: need start, stop > 0 and factor in (0, 1)");
  }
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double e = start * std::pow(factor, k);
    if (e < stop * (1.0 - 1e-9)) break;
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(BlowupKind kind) {
  switch (kind) {
    case BlowupKind::Empty: return "empty";
    case BlowupKind::IsolatedSimple: return "isolated-simple";
    case BlowupKind::NonSimple: return "non-simple";
  }
  return "unknown";
}

double beta_scale(int n, double eps) {
  const double l = std::abs(std::log(eps));
  if (n == 4) return l;
  if (n == 5) return 1.0 / (std::sqrt(eps) * l);
  return 1.0 / std::sqrt(eps);
}

double cluster_scale(int n, double eps) {
  const double l = std::abs(std::log(eps));
  return std::pow(l, (n == 4 ? 1.0 : 0.0) / 4.0) * std::pow(eps, -(n - 4.0) / (2.0 * n));
}

namespace {

bool tail_not_growing(const std::vector<double>& series) {
  if (series.size() < 4) return true;
  const std::size_t half = series.size() / 2;
  const double head = *std::max_element(series.begin(), series.begin() + static_cast<long>(half));
  const double tail = *std::max_element(series.begin() + static_cast<long>(half), series.end());
  return tail <= 2.0 * head + 1e-12;
}

}  // namespace

std::vector<PointClassification> classify_blowup(const std::vector<BalancingState>& sweep,
                                                 const std::vector<Vec>& critical_points, double assign_radius) {
  if (sweep.empty()) throw std::invalid_argument("classify_blowup: empty sweep");
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    if (!(sweep[k].eps < sweep[k - 1].eps)) throw std::invalid_argument("classify_blowup: eps must strictly decrease");
  }
  const BalancingState& last = sweep.back();
  const int n = last.n;
  std::vector<PointClassification> out;
  for (const auto& z : critical_points) out.push_back({z, BlowupKind::Empty, {}, 0.0, {}, 0, true});

  for (std::size_t i = 0; i < last.family.size(); ++i) {
    int best = -1;
    double best_d = assign_radius;
    for (std::size_t c = 0; c < critical_points.size(); ++c) {
      const double d = (last.family[i].a - critical_points[c]).norm();
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best >= 0) out[static_cast<std::size_t>(best)].members.push_back(static_cast<int>(i));
  }

  for (auto& pc : out) {
    if (pc.members.empty()) continue;
    if (pc.members.size() == 1) {
      pc.kind = BlowupKind::IsolatedSimple;
      std::vector<double> series;
      for (const auto& s : sweep) {
        series.push_back(beta_scale(n, s.eps) * (s.family[static_cast<std::size_t>(pc.members[0])].a - pc.z).norm());
      }
      pc.measured_sup = *std::max_element(series.begin(), series.end());
      pc.bounded = tail_not_growing(series);
      continue;
    }
    pc.kind = BlowupKind::NonSimple;
    std::vector<double> sup_series;
    for (const int member : pc.members) {
      double inf = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sweep.size(); ++k) {
        const auto& s = sweep[k];
        const double q = cluster_scale(n, s.eps) * (s.family[static_cast<std::size_t>(member)].a - pc.z).norm();
        inf = std::min(inf, q);
        pc.measured_sup = std::max(pc.measured_sup, q);
        if (sup_series.size() <= k) sup_series.push_back(q);
        else sup_series[k] = std::max(sup_series[k], q);
      }
      pc.member_inf.push_back(inf);
    }
    for (const double inf : pc.member_inf) {
      if (inf > 1e-3 * pc.measured_sup) ++pc.bounded_below_count;
    }
    pc.bounded = tail_not_growing(sup_series);
  }
  return out;
}

}  // namespace blowup
