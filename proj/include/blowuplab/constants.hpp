#pragma once

#include <map>
#include <string>
#include <vector>

namespace blowup {

constexpr int kMinDim = 4;
constexpr int kMaxDim = 10;

/// Dimensional constants of the reduced blow-up system for one dimension n.
///
/// c2_n and c_n are the coefficients of the potential terms (gradient and
/// value); c2 multiplies eps in the rate equation; cbar2 multiplies the bubble
/// interaction terms. kappa1 = c_n / c2 and
/// kappa2 = (c2_n / cbar2)^{1/n} (c_n / c2)^{(n-4)/(2n)}.
struct ConstantsTable {
  int n = 0;
  int sigma = 0;  // 1 for n = 4, else 0
  double c0 = 0.0;
  double sphere_measure = 0.0;
  double S_n = 0.0;
  double c_n = 0.0;
  double c2_n = 0.0;
  double c2 = 0.0;
  double cbar2 = 0.0;
  double cbar1 = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;

  /// Field names in declaration order, matching the JSON/CSV keys.
  static const std::vector<std::string>& field_names();
  /// Every real-valued field by name (n and sigma included as reals).
  std::map<std::string, double> as_map() const;
};

/// Bubble amplitude (n(n-2))^{(n-2)/4}; requires n >= 3.
double c0(int n);

/// Evaluates every constant by quadrature. Not cached.
ConstantsTable compute_table(int n);

/// Cached compute_table; thread-safe, each n is computed once.
const ConstantsTable& constants_for(int n);

struct ClosedFormEntry {
  std::string name;
  double quadrature = 0.0;
  double closed_form = 0.0;
  double rel_error = 0.0;
};

struct ClosedFormReport {
  int n = 0;
  double tolerance = 1e-10;
  std::vector<ClosedFormEntry> entries;
  bool all_pass() const;
};

/// Compares the quadrature table against Beta/Gamma closed forms.
ClosedFormReport closed_form_check(int n, double tolerance = 1e-10);

/// Closed-form values, independent of the quadrature path.
namespace closed_form {
/// int_0^inf r^alpha (1 + r^2)^{-beta} dr = B((alpha+1)/2, beta - (alpha+1)/2) / 2.
double power_integral(double alpha, double beta);
double S_n(int n);
double cbar2(int n);
double cbar1(int n);
double c2_n(int n);
double c_n(int n);
double c2(int n);
}  // namespace closed_form

void check_dimension(int n);

}  // namespace blowup
