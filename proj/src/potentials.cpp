#include "blowuplab/potentials.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace blowup {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_point(const Vec& x) {
  std::ostringstream out;
  out << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ")";
  return out.str();
}

}  // namespace

PotentialSpec::PotentialSpec(int n, Variant v) : n_(n), v_(std::move(v)) {
  if (n_ < 1) throw std::invalid_argument("potential dimension must be positive");
  std::visit(Overloaded{
                 [](const ConstantPotential&) {},
                 [n](const QuadraticPotential& q) {
                   if (q.z.size() != n || q.H.rows() != n || q.H.cols() != n) {
                     throw std::invalid_argument("quadratic potential: shape mismatch");
                   }
                   if ((q.H - q.H.transpose()).norm() != 0.0) {
                     throw std::invalid_argument("quadratic potential: H must be symmetric");
                   }
                 },
                 [n](const BumpSumPotential& b) {
                   for (const auto& bump : b.bumps) {
                     if (bump.center.size() != n) {
                       throw std::invalid_argument("bump center has wrong dimension");
                     }
                     if (!(bump.width > 0.0)) {
                       throw std::invalid_argument("bump width must be positive");
                     }
                   }
                 }},
             v_);
}

std::string PotentialSpec::type_name() const {
  return std::visit(Overloaded{[](const ConstantPotential&) { return std::string("constant"); },
                               [](const QuadraticPotential&) { return std::string("quadratic"); },
                               [](const BumpSumPotential&) { return std::string("bumps"); }},
                    v_);
}

double PotentialSpec::value(const Vec& x) const {
  return std::visit(Overloaded{[](const ConstantPotential& c) { return c.v0; },
                               [&x](const QuadraticPotential& q) {
                                 const Vec d = x - q.z;
                                 return q.v0 + 0.5 * d.dot(q.H * d);
                               },
                               [&x](const BumpSumPotential& b) {
                                 double v = b.baseline;
                                 for (const auto& bump : b.bumps) {
                                   const double w2 = bump.width * bump.width;
                                   v += bump.amplitude *
                                        std::exp(-(x - bump.center).squaredNorm() / w2);
                                 }
                                 return v;
                               }},
                    v_);
}

Vec PotentialSpec::gradient(const Vec& x) const {
  return std::visit(Overloaded{[this](const ConstantPotential&) -> Vec { return Vec::Zero(n_); },
                               [&x](const QuadraticPotential& q) -> Vec { return q.H * (x - q.z); },
                               [&x, this](const BumpSumPotential& b) -> Vec {
                                 Vec g = Vec::Zero(n_);
                                 for (const auto& bump : b.bumps) {
                                   const double w2 = bump.width * bump.width;
                                   const Vec d = x - bump.center;
                                   const double e = bump.amplitude * std::exp(-d.squaredNorm() / w2);
                                   g -= (2.0 * e / w2) * d;
                                 }
                                 return g;
                               }},
                    v_);
}

Mat PotentialSpec::hessian(const Vec& x) const {
  return std::visit(Overloaded{[this](const ConstantPotential&) -> Mat { return Mat::Zero(n_, n_); },
                               [](const QuadraticPotential& q) -> Mat { return q.H; },
                               [&x, this](const BumpSumPotential& b) -> Mat {
                                 Mat h = Mat::Zero(n_, n_);
                                 for (const auto& bump : b.bumps) {
                                   const double w2 = bump.width * bump.width;
                                   const Vec d = x - bump.center;
                                   const double e = bump.amplitude * std::exp(-d.squaredNorm() / w2);
                                   // Outer product built symmetric by construction.
                                   h += (4.0 * e / (w2 * w2)) * (d * d.transpose());
                                   h.diagonal().array() -= 2.0 * e / w2;
                                 }
                                 return h;
                               }},
                    v_);
}

// ---------------------------------------------------------------------------

std::vector<Vec> sample_grid(const Box& box, long max_points) {
  const auto n = box.center.size();
  int per_axis = 17;
  while (per_axis > 2 && std::pow(static_cast<double>(per_axis), static_cast<double>(n)) >
                             static_cast<double>(max_points)) {
    --per_axis;
  }
  long total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= per_axis;
  std::vector<Vec> points;
  points.reserve(static_cast<std::size_t>(total));
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (long k = 0; k < total; ++k) {
    Vec p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / (per_axis - 1);
      p[i] = box.center[i] - box.half_width + 2.0 * box.half_width * t;
    }
    points.push_back(std::move(p));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (++idx[i] < per_axis) break;
      idx[i] = 0;
    }
  }
  return points;
}

PositivityReport check_positivity(const PotentialSpec& spec, const Box& box) {
  PositivityReport report;
  report.min_value = std::numeric_limits<double>::infinity();
  for (const auto& p : sample_grid(box)) {
    const double v = spec.value(p);
    if (v < report.min_value) {
      report.min_value = v;
      report.argmin = p;
    }
  }
  report.positive = report.min_value > 0.0;
  return report;
}

void require_positive(const PotentialSpec& spec, const Box& box) {
  const auto report = check_positivity(spec, box);
  if (!report.positive) {
    std::ostringstream msg;
    msg << "potential is not positive: V" << format_point(report.argmin) << " = "
        << report.min_value;
    throw std::domain_error(msg.str());
  }
}

int sampled_sign(const PotentialSpec& spec, const Box& box) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : sample_grid(box)) {
    const double v = spec.value(p);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo > 0.0) return 1;
  if (hi < 0.0) return -1;
  return 0;
}

// ---------------------------------------------------------------------------

CriticalPoint classify_point(const PotentialSpec& spec, const Vec& x, double tol) {
  CriticalPoint cp;
  cp.location = x;
  cp.hessian = spec.hessian(x);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cp.hessian, Eigen::EigenvaluesOnly);
  const Vec& values = eig.eigenvalues();
  cp.morse_index = static_cast<int>((values.array() < 0.0).count());
  cp.nondegenerate = values.cwiseAbs().minCoeff() > tol;
  return cp;
}

namespace {

double bump_scale(const BumpSumPotential& b) {
  double scale = 0.0;
  for (const auto& bump : b.bumps) {
    scale = std::max(scale, std::abs(bump.amplitude) / (bump.width * bump.width));
  }
  return scale;
}

bool inside(const Box& box, const Vec& x, double margin) {
  return ((x - box.center).cwiseAbs().array() <= box.half_width + margin).all();
}

}  // namespace

CriticalPointSearch critical_points(const PotentialSpec& spec, const Box& search_box) {
  CriticalPointSearch out;
  const int n = spec.dim();
  if (std::holds_alternative<ConstantPotential>(spec.variant())) {
    out.degenerate_everywhere = true;
    return out;
  }
  if (const auto* q = std::get_if<QuadraticPotential>(&spec.variant())) {
    out.points.push_back(classify_point(spec, q->z));
    return out;
  }

  const auto& bumps = std::get<BumpSumPotential>(spec.variant());
  const double scale = bump_scale(bumps);
  if (scale == 0.0) {
    out.degenerate_everywhere = true;
    return out;
  }

  std::vector<Vec> seeds;
  for (const auto& bump : bumps.bumps) seeds.push_back(bump.center);
  for (std::size_t i = 0; i < bumps.bumps.size(); ++i) {
    for (std::size_t j = i + 1; j < bumps.bumps.size(); ++j) {
      seeds.push_back(0.5 * (bumps.bumps[i].center + bumps.bumps[j].center));
    }
  }
  for (auto& p : sample_grid(search_box, 4096)) seeds.push_back(std::move(p));

  NewtonOptions opts;
  opts.tol = 1e-12 * scale;
  opts.max_iter = 60;
  const VectorFn grad = [&spec](const Vec& x) { return spec.gradient(x); };
  const JacobianFn hess = [&spec](const Vec& x) { return spec.hessian(x); };

  for (const auto& seed : seeds) {
    const auto report = newton_solve(grad, hess, seed, opts);
    if (!report.converged) continue;
    const Vec& x = report.solution;
    if (!inside(search_box, x, 1e-9)) continue;
    // Far from every bump the gradient underflows; such plateaus are not critical points.
    const Mat h = spec.hessian(x);
    if (h.cwiseAbs().maxCoeff() < 1e-6 * scale) continue;
    const bool duplicate = std::any_of(out.points.begin(), out.points.end(), [&](const CriticalPoint& cp) {
      return (cp.location - x).norm() < 1e-6;
    });
    if (!duplicate) out.points.push_back(classify_point(spec, x, 1e-8 * scale));
  }
  std::sort(out.points.begin(), out.points.end(), [n](const CriticalPoint& a, const CriticalPoint& b) {
    for (int i = 0; i < n; ++i) {
      if (a.location[i] != b.location[i]) return a.location[i] < b.location[i];
    }
    return false;
  });
  return out;
}

// ---------------------------------------------------------------------------

FdConsistencyReport fd_consistency(const PotentialSpec& spec, const Box& box, int samples,
                                   unsigned seed, double tol) {
  const int n = spec.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  FdConsistencyReport report;
  report.samples = samples;
  const auto value = [&spec](const Vec& x) { return spec.value(x); };
  const VectorFn grad = [&spec](const Vec& x) { return spec.gradient(x); };
  // Relative errors carry a floor at the potential's own magnitude scale.
  const double floor = 1e-3 * std::max(1.0, std::abs(spec.value(box.center)));
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = box.center[i] + box.half_width * unit(rng);
    const double h = 1e-5 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    const Vec g = spec.gradient(x);
    const Vec g_fd = fd_gradient(value, x, h);
    report.max_grad_rel_error = std::max(report.max_grad_rel_error, rel_error(g, g_fd, floor));
    const Mat hs = spec.hessian(x);
    const Mat h_fd = fd_jacobian(grad, x, h);
    const double herr = (hs - h_fd).norm() / std::max({hs.norm(), h_fd.norm(), floor});
    report.max_hess_rel_error = std::max(report.max_hess_rel_error, herr);
  }
  report.pass = report.max_grad_rel_error <= tol && report.max_hess_rel_error <= tol;
  return report;
}

// ---------------------------------------------------------------------------

namespace {

Vec vec_from_json(const nlohmann::json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::invalid_argument(std::string(what) + " must be an array of length " + std::to_string(n));
  }
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = j.at(i).get<double>();
  return v;
}

Mat mat_from_json(const nlohmann::json& j, int n) {
  Mat m(n, n);
  if (j.is_array() && static_cast<int>(j.size()) == n * n && !j.at(0).is_array()) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = j.at(r * n + c).get<double>();
    return m;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::invalid_argument("H must be an n x n matrix (rows or flat row-major)");
  }
  for (int r = 0; r < n; ++r) m.row(r) = vec_from_json(j.at(r), n, "H row").transpose();
  return m;
}

nlohmann::json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

PotentialSpec potential_from_json(const nlohmann::json& j, int n) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") return PotentialSpec(n, ConstantPotential{j.value("v0", 1.0)});
  if (type == "quadratic") {
    QuadraticPotential q;
    q.v0 = j.value("v0", 1.0);
    q.z = j.contains("z") ? vec_from_json(j.at("z"), n, "z") : Vec::Zero(n);
    q.H = mat_from_json(j.at("H"), n);
    return PotentialSpec(n, std::move(q));
  }
  if (type == "bumps") {
    BumpSumPotential b;
    b.baseline = j.value("baseline", 1.0);
    for (const auto& item : j.at("bumps")) {
      b.bumps.push_back({vec_from_json(item.at("center"), n, "bump center"),
                         item.at("amplitude").get<double>(), item.at("width").get<double>()});
    }
    return PotentialSpec(n, std::move(b));
  }
  throw std::invalid_argument("unknown potential type '" + type + "'");
}

nlohmann::json potential_to_json(const PotentialSpec& spec) {
  return std::visit(
      Overloaded{[](const ConstantPotential& c) {
                   return nlohmann::json{{"type", "constant"}, {"v0", c.v0}};
                 },
                 [](const QuadraticPotential& q) {
                   nlohmann::json rows = nlohmann::json::array();
                   for (Eigen::Index r = 0; r < q.H.rows(); ++r) rows.push_back(vec_to_json(q.H.row(r).transpose()));
                   return nlohmann::json{{"type", "quadratic"}, {"v0", q.v0}, {"z", vec_to_json(q.z)}, {"H", rows}};
                 },
                 [](const BumpSumPotential& b) {
                   nlohmann::json items = nlohmann::json::array();
                   for (const auto& bump : b.bumps) {
                     items.push_back({{"center", vec_to_json(bump.center)},
                                      {"amplitude", bump.amplitude},
                                      {"width", bump.width}});
                   }
                   return nlohmann::json{{"type", "bumps"}, {"baseline", b.baseline}, {"bumps", items}};
                 }},
      spec.variant());
}

}  // namespace blowup
