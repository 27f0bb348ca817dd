#include "blowuplab/constants.hpp"

#include "blowuplab/numerics.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace blowup {

void check_dimension(int n) {
  if (n < kMinDim || n > kMaxDim) {
    throw std::domain_error("dimension " + std::to_string(n) + " outside supported range [" +
                            std::to_string(kMinDim) + ", " + std::to_string(kMaxDim) + "]");
  }
}

double c0(int n) {
  if (n < 3) throw std::domain_error("c0: dimension must be >= 3");
  return std::pow(static_cast<double>(n * (n - 2)), (n - 2) / 4.0);
}

const std::vector<std::string>& ConstantsTable::field_names() {
  static const std::vector<std::string> names = {
      "n",  "sigma", "c0",    "sphere_measure", "S_n",   "c_n",
      "c2_n", "c2",  "cbar2", "cbar1",          "kappa1", "kappa2"};
  return names;
}

std::map<std::string, double> ConstantsTable::as_map() const {
  return {{"n", static_cast<double>(n)},
          {"sigma", static_cast<double>(sigma)},
          {"c0", c0},
          {"sphere_measure", sphere_measure},
          {"S_n", S_n},
          {"c_n", c_n},
          {"c2_n", c2_n},
          {"c2", c2},
          {"cbar2", cbar2},
          {"cbar1", cbar1},
          {"kappa1", kappa1},
          {"kappa2", kappa2}};
}

namespace {

double radial(int n, const ScalarFn& g, const char* name) {
  try {
    return radial_integral(n, g, kDefaultQuadTol);
  } catch (const AccuracyError& e) {
    throw AccuracyError(std::string("constant ") + name + ": " + e.what(), e.best_estimate(),
                        e.error_estimate());
  }
}

}  // namespace

ConstantsTable compute_table(int n) {
  check_dimension(n);
  ConstantsTable t;
  t.n = n;
  t.sigma = n == 4 ? 1 : 0;
  t.c0 = blowup::c0(n);
  t.sphere_measure = blowup::sphere_measure(n);

  const double c0_sq = t.c0 * t.c0;
  const double c0_crit = std::pow(t.c0, 2.0 * n / (n - 2));  // c0^{2n/(n-2)}
  const double c0_p = std::pow(t.c0, (n + 2.0) / (n - 2));   // c0^{(n+2)/(n-2)}

  const double shared = radial(
      n, [n](double r) { return std::pow(1.0 + r * r, -(n + 2) / 2.0); }, "cbar2");
  t.cbar2 = c0_crit * shared;
  t.cbar1 = c0_p * shared;
  t.S_n = c0_crit * radial(n, [n](double r) { return std::pow(1.0 + r * r, -n); }, "S_n");

  if (n == 4) {
    t.c2_n = 0.5 * c0_sq * t.sphere_measure;
    t.c_n = c0_sq * t.sphere_measure;
  } else {
    t.c2_n = (n - 2.0) / n * c0_sq *
             radial(n, [n](double r) { return r * r * std::pow(1.0 + r * r, 1 - n); }, "c2_n");
    t.c_n = 0.5 * (n - 2.0) * c0_sq *
            radial(n, [n](double r) { return (r * r - 1.0) * std::pow(1.0 + r * r, 1 - n); },
                   "c_n");
  }

  const double half = 0.5 * (n - 2.0);
  t.c2 = half * half * c0_crit *
         radial(
             n,
             [n](double r) {
               const double q = 1.0 + r * r;
               return (r * r - 1.0) * std::pow(q, -(n + 1)) * std::log1p(r * r);
             },
             "c2");

  t.kappa1 = t.c_n / t.c2;
  t.kappa2 = std::pow(t.c2_n / t.cbar2, 1.0 / n) * std::pow(t.c_n / t.c2, (n - 4.0) / (2.0 * n));
  return t;
}

const ConstantsTable& constants_for(int n) {
  check_dimension(n);
  static std::array<std::once_flag, kMaxDim + 1> flags;
  static std::array<ConstantsTable, kMaxDim + 1> tables;
  std::call_once(flags[n], [n] { tables[n] = compute_table(n); });
  return tables[n];
}

// ---------------------------------------------------------------------------

namespace closed_form {

double power_integral(double alpha, double beta) {
  const double a = 0.5 * (alpha + 1.0);
  return 0.5 * beta_fn(a, beta - a);
}

double S_n(int n) {
  return std::pow(c0(n), 2.0 * n / (n - 2)) * sphere_measure(n) * power_integral(n - 1, n);
}

double cbar2(int n) {
  return std::pow(c0(n), 2.0 * n / (n - 2)) * sphere_measure(n) *
         power_integral(n - 1, 0.5 * (n + 2));
}

double cbar1(int n) {
  return std::pow(c0(n), (n + 2.0) / (n - 2)) * sphere_measure(n) *
         power_integral(n - 1, 0.5 * (n + 2));
}

double c2_n(int n) {
  const double c0_sq = c0(n) * c0(n);
  if (n == 4) return 0.5 * c0_sq * sphere_measure(4);
  return (n - 2.0) / n * c0_sq * sphere_measure(n) * power_integral(n + 1, n - 1);
}

double c_n(int n) {
  const double c0_sq = c0(n) * c0(n);
  if (n == 4) return c0_sq * sphere_measure(4);
  return 0.5 * (n - 2.0) * c0_sq * sphere_measure(n) *
         (power_integral(n + 1, n - 1) - power_integral(n - 1, n - 1));
}

double c2(int n) {
  // With w = r^2 the log integral splits into two pieces of the form
  // int w^{a-1} (1+w)^{-s} ln(1+w) dw = B(a, s-a) (psi(s) - psi(s-a)); the
  // digamma terms collapse to psi(n/2+1) - psi(n/2) = 2/n, leaving B(n/2+1, n/2)/n.
  const double log_integral = beta_fn(0.5 * n + 1.0, 0.5 * n) / n;
  const double half = 0.5 * (n - 2.0);
  return half * half * std::pow(c0(n), 2.0 * n / (n - 2)) * sphere_measure(n) * log_integral;
}

}  // namespace closed_form

bool ClosedFormReport::all_pass() const {
  for (const auto& e : entries) {
    if (!(e.rel_error <= tolerance)) return false;
  }
  return true;
}

ClosedFormReport closed_form_check(int n, double tolerance) {
  const ConstantsTable& t = constants_for(n);
  ClosedFormReport report;
  report.n = n;
  report.tolerance = tolerance;
  const auto add = [&](const std::string& name, double quad, double exact) {
    report.entries.push_back({name, quad, exact, rel_error(quad, exact)});
  };
  add("cbar2", t.cbar2, closed_form::cbar2(n));
  add("cbar1", t.cbar1, closed_form::cbar1(n));
  add("S_n", t.S_n, closed_form::S_n(n));
  if (n >= 5) {
    add("c2_n", t.c2_n, closed_form::c2_n(n));
    add("c_n", t.c_n, closed_form::c_n(n));
  }
  add("c2", t.c2, closed_form::c2(n));
  add("kappa1", t.kappa1, closed_form::c_n(n) / closed_form::c2(n));
  return report;
}

}  // namespace blowup
