#include "blowuplab/balancing.hpp"
#include "blowuplab/constants.hpp"
#include "blowuplab/kirchhoff.hpp"
#include "blowuplab/potentials.hpp"
#include "blowuplab/radial.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace blowup;

namespace {

py::dict constants_dict(int n) {
  py::dict d;
  for (const auto& [name, value] : constants_for(n).as_map()) d[py::str(name)] = value;
  d["n"] = n;
  d["sigma"] = constants_for(n).sigma;
  return d;
}

py::list closed_form_list(int n, double tol) {
  py::list out;
  for (const auto& e : closed_form_check(n, tol).entries) {
    py::dict d;
    d["name"] = e.name;
    d["quadrature"] = e.quadrature;
    d["closed_form"] = e.closed_form;
    d["rel_error"] = e.rel_error;
    out.append(d);
  }
  return out;
}

py::list kirchhoff(const Mat& hess, int m, double tol, std::uint64_t seed) {
  const int n = static_cast<int>(hess.rows());
  py::list out;
  for (const auto& c : find_critical(hess, m, n, {}, tol, seed).found) {
    py::dict d;
    d["f_value"] = c.f_value;
    d["grad_norm"] = c.grad_norm;
    d["min_pair_distance"] = c.min_pair_distance;
    d["signature"] = py::make_tuple(c.signature.positives, c.signature.negatives, c.signature.near_zeros);
    d["points"] = c.config.points();
    out.append(d);
  }
  return out;
}

py::dict solve(int n, double eps, const std::string& potential_json, const std::vector<Vec>& centers,
               const std::vector<double>& lambdas, double tol) {
  if (centers.size() != lambdas.size()) throw std::invalid_argument("centers and lambdas differ in length");
  const PotentialSpec v = potential_from_json(nlohmann::json::parse(potential_json), n);
  std::vector<Bubble> bubbles;
  Vec alphas(static_cast<Eigen::Index>(centers.size()));
  for (std::size_t i = 0; i < centers.size(); ++i) {
    bubbles.push_back({centers[i], lambdas[i]});
    alphas[static_cast<Eigen::Index>(i)] = alpha_of_lambda(n, eps, lambdas[i]);
  }
  SolveOptions opts;
  opts.tol = tol;
  const auto o = solve_system(n, eps, v, {n, eps, BubbleFamily(n, bubbles), alphas}, opts);
  py::dict d;
  d["status"] = to_string(o.status);
  d["diagnostic"] = o.diagnostic;
  d["el_norm"] = o.el_norm;
  d["ea_norm"] = o.ea_norm;
  std::vector<double> lam;
  std::vector<Vec> a;
  for (const auto& b : o.state.family.bubbles()) {
    lam.push_back(b.lambda);
    a.push_back(b.a);
  }
  d["lambdas"] = lam;
  d["centers"] = a;
  d["alphas"] = Vec(o.state.alphas);
  if (o.status == SolveStatus::Converged) d["ratio"] = rate_ratio_diagnostic(o.state);
  return d;
}

RadialPotential or_one(const std::optional<RadialPotential>& v) {
  if (v) return *v;
  return [](double) { return 1.0; };
}

py::dict ground_state(int n, double eps, const std::optional<RadialPotential>& v) {
  const auto s = solve_ground_state(RadialProblem{n, eps, or_one(v), 1.0});
  py::dict d;
  d["u0"] = s.u0;
  d["lambda"] = s.lambda_extracted;
  d["boundary_residual"] = s.boundary_residual;
  d["resolution_change"] = s.resolution_change;
  d["r"] = s.grid;
  d["u"] = s.u;
  return d;
}

py::dict rate(int n, const std::vector<double>& eps_list, const std::optional<RadialPotential>& v) {
  const auto fit = rate_experiment(n, or_one(v), eps_list);
  py::list rows;
  for (const auto& r : fit.rows) {
    py::dict row;
    row["eps"] = r.eps;
    row["ok"] = r.ok;
    row["u0"] = r.u0;
    row["lambda"] = r.lambda;
    row["rho"] = r.rho;
    row["slope_running"] = r.slope_running;
    row["failure"] = r.failure;
    rows.append(row);
  }
  py::dict d;
  d["rows"] = rows;
  d["solved"] = fit.solved;
  d["slope"] = fit.slope;
  d["rho_last"] = fit.rho_last;
  d["rho_monotone"] = fit.rho_monotone;
  d["lambda_monotone"] = fit.lambda_monotone;
  return d;
}

py::dict projection(int n, double lambda, const std::optional<RadialPotential>& v) {
  const auto p = project_bubble_radial(n, lambda, or_one(v));
  py::dict d;
  d["r"] = p.grid;
  d["pi_delta"] = p.pi_delta;
  d["delta"] = p.delta;
  d["residual"] = p.residual;
  d["ordering_ok"] = p.ordering_ok;
  d["energy"] = p.energy;
  d["S_n"] = p.s_n;
  d["energy_rel_error"] = p.energy_rel_error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_blowuplab, m) {
  m.doc() = "Blow-up analysis kernels: constants, interactions, reduced systems, radial solver";

  m.def("constants", &constants_dict, py::arg("n"));
  m.def("closed_form_check", &closed_form_list, py::arg("n"), py::arg("tol") = 1e-10);
  m.def("eps_interaction",
        [](int n, const Vec& ai, double li, const Vec& aj, double lj) { return eps_interaction(n, {ai, li}, {aj, lj}); },
        py::arg("n"), py::arg("a_i"), py::arg("lambda_i"), py::arg("a_j"), py::arg("lambda_j"));
  m.def("predicted_lambda",
        [](int n, double v, double eps) {
          const auto p = predicted_lambda_single(n, v, eps);
          return p.feasible ? py::cast(p.lambda_predicted) : py::none();
        },
        py::arg("n"), py::arg("v"), py::arg("eps"));
  m.def("kirchhoff_critical", &kirchhoff, py::arg("hessV"), py::arg("m"), py::arg("tol") = 1e-10,
        py::arg("seed") = 1);
  m.def("solve_balancing", &solve, py::arg("n"), py::arg("eps"), py::arg("potential_json"), py::arg("centers"),
        py::arg("lambdas"), py::arg("tol") = 1e-9);
  m.def("radial_ground_state", &ground_state, py::arg("n"), py::arg("eps"), py::arg("v") = py::none());
  m.def("rate_experiment", &rate, py::arg("n"), py::arg("eps_list"), py::arg("v") = py::none());
  m.def("project_bubble_radial", &projection, py::arg("n"), py::arg("lambda_"), py::arg("v") = py::none());
}
