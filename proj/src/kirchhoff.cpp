#include "blowuplab/kirchhoff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace blowup {

ClusterConfig::ClusterConfig(int n, std::vector<Vec> points) : n_(n), points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("cluster configuration needs m >= 1 points");
  for (const auto& p : points_) {
    if (p.size() != n_) throw std::invalid_argument("cluster point has wrong dimension");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if ((points_[i] - points_[j]).squaredNorm() == 0.0) {
        throw std::domain_error("cluster points must be pairwise distinct");
      }
    }
  }
}

ClusterConfig ClusterConfig::from_stacked(int n, const Vec& stacked) {
  if (n <= 0 || stacked.size() % n != 0) throw std::invalid_argument("stacked length not a multiple of n");
  std::vector<Vec> pts;
  for (Eigen::Index k = 0; k < stacked.size() / n; ++k) pts.push_back(stacked.segment(k * n, n));
  return ClusterConfig(n, std::move(pts));
}

Vec ClusterConfig::stacked() const {
  Vec out(static_cast<Eigen::Index>(points_.size()) * n_);
  for (std::size_t k = 0; k < points_.size(); ++k) out.segment(static_cast<Eigen::Index>(k) * n_, n_) = points_[k];
  return out;
}

double ClusterConfig::min_pair_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t j = i + 1; j < points_.size(); ++j)
      best = std::min(best, (points_[i] - points_[j]).norm());
  return best;
}

namespace {

void check_hess(const Mat& hessV, int n) {
  if (hessV.rows() != n || hessV.cols() != n) throw std::invalid_argument("hessV must be n x n");
}

}  // namespace

double f_eval(const Mat& hessV, const ClusterConfig& config) {
  const int n = config.dim();
  check_hess(hessV, n);
  double quad = 0.0, pair = 0.0;
  for (int i = 0; i < config.size(); ++i) {
    quad += config[i].dot(hessV * config[i]);
    for (int j = i + 1; j < config.size(); ++j) {
      pair += std::pow((config[i] - config[j]).norm(), 2 - n);
    }
  }
  return quad - 2.0 * pair;
}

Vec f_grad(const Mat& hessV, const ClusterConfig& config) {
  const int n = config.dim();
  check_hess(hessV, n);
  const int m = config.size();
  Vec g(m * n);
  for (int i = 0; i < m; ++i) {
    Vec block = 2.0 * (hessV * config[i]);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const Vec d = config[i] - config[j];
      block += 2.0 * (n - 2) * std::pow(d.norm(), -n) * d;
    }
    g.segment(i * n, n) = block;
  }
  return g;
}

Mat f_hessian(const Mat& hessV, const ClusterConfig& config) {
  const int n = config.dim();
  check_hess(hessV, n);
  const int m = config.size();
  Mat h = Mat::Zero(m * n, m * n);
  const Mat eye = Mat::Identity(n, n);
  for (int i = 0; i < m; ++i) {
    h.block(i * n, i * n, n, n) += 2.0 * hessV;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const Vec d = config[i] - config[j];
      const double r = d.norm();
      const Mat k = std::pow(r, -n) * eye - n * std::pow(r, -n - 2) * (d * d.transpose());
      h.block(i * n, i * n, n, n) += 2.0 * (n - 2) * k;
      h.block(i * n, j * n, n, n) -= 2.0 * (n - 2) * k;
    }
  }
  return h;
}

HessianSignature hessian_signature(const Mat& hessV, const ClusterConfig& config, double h,
                                   double cutoff) {
  const int n = config.dim();
  const VectorFn grad = [&](const Vec& x) { return f_grad(hessV, ClusterConfig::from_stacked(n, x)); };
  Mat fd = fd_jacobian(grad, config.stacked(), h);
  fd = 0.5 * (fd + fd.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(fd, Eigen::EigenvaluesOnly);
  HessianSignature sig;
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    const double v = eig.eigenvalues()[k];
    if (std::abs(v) <= cutoff) {
      ++sig.near_zeros;
    } else if (v > 0.0) {
      ++sig.positives;
    } else {
      ++sig.negatives;
    }
  }
  return sig;
}

bool is_isotropic(const Mat& hessV) {
  const double c = hessV(0, 0);
  return (hessV - c * Mat::Identity(hessV.rows(), hessV.cols())).cwiseAbs().maxCoeff() == 0.0;
}

ClusterConfig normalize_orientation(const ClusterConfig& config) {
  if (config.size() < 2) return config;
  const int n = config.dim();
  const Vec v = (config[0] - config[1]).normalized();
  Vec e1 = Vec::Zero(n);
  e1[0] = 1.0;
  Vec w = v - e1;
  if (w.norm() < 1e-14) return config;
  w.normalize();
  // Householder reflection I - 2 w w^T maps v to e1.
  std::vector<Vec> pts;
  for (const auto& p : config.points()) pts.push_back(p - 2.0 * w.dot(p) * w);
  return ClusterConfig(n, std::move(pts));
}

namespace {

Mat as_rows(const ClusterConfig& c, const std::vector<int>& order) {
  Mat rows(c.size(), c.dim());
  for (int k = 0; k < c.size(); ++k) rows.row(k) = c[order[static_cast<std::size_t>(k)]].transpose();
  return rows;
}

/// min over orthogonal Q of ||A Q - B||_F (reflections allowed).
double procrustes_distance(const Mat& a, const Mat& b) {
  Eigen::JacobiSVD<Mat> svd(a.transpose() * b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat q = svd.matrixU() * svd.matrixV().transpose();
  return (a * q - b).norm();
}

}  // namespace

double config_distance(const ClusterConfig& a, const ClusterConfig& b, bool isotropic) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    throw std::invalid_argument("config_distance: configurations differ in shape");
  }
  const int m = a.size();
  std::vector<int> identity(static_cast<std::size_t>(m));
  std::iota(identity.begin(), identity.end(), 0);
  const Mat ra = as_rows(a, identity);

  if (m <= 7) {
    std::vector<int> perm = identity;
    double best = std::numeric_limits<double>::infinity();
    do {
      const Mat rb = as_rows(b, perm);
      const double d = isotropic ? procrustes_distance(ra, rb) : (ra - rb).norm();
      best = std::min(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  // Greedy matching for large m.
  const ClusterConfig na = isotropic ? normalize_orientation(a) : a;
  const ClusterConfig nb = isotropic ? normalize_orientation(b) : b;
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    int best_j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = (na[i] - nb[j]).squaredNorm();
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    used[static_cast<std::size_t>(best_j)] = true;
    sum += best;
  }
  return std::sqrt(sum);
}

std::vector<ClusterConfig> auto_seeds(int m, int n, std::uint64_t rng_seed, int random_count) {
  std::vector<ClusterConfig> seeds;
  const double radius = std::pow(static_cast<double>(n - 2), 1.0 / n);
  for (double scale : {0.5, 1.0, 2.0}) {
    const double r = scale * radius;
    std::vector<Vec> circle;
    for (int k = 0; k < m; ++k) {
      Vec p = Vec::Zero(n);
      if (m > 1) {
        const double angle = 2.0 * std::numbers::pi * k / m;
        p[0] = r * std::cos(angle);
        if (n > 1) p[1] = r * std::sin(angle);
      }
      circle.push_back(std::move(p));
    }
    seeds.emplace_back(n, std::move(circle));
    if (m >= 3 && m <= n) {
      // Regular simplex: centered standard basis vectors of R^m.
      std::vector<Vec> simplex;
      for (int k = 0; k < m; ++k) {
        Vec p = Vec::Zero(n);
        for (int c = 0; c < m; ++c) p[c] = (c == k ? 1.0 : 0.0) - 1.0 / m;
        simplex.push_back(p * (r / p.norm()));
      }
      seeds.emplace_back(n, std::move(simplex));
    }
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  for (int s = 0; s < random_count; ++s) {
    std::vector<Vec> pts;
    for (int k = 0; k < m; ++k) {
      Vec p(n);
      for (int c = 0; c < n; ++c) p[c] = coord(rng);
      pts.push_back(std::move(p));
    }
    seeds.emplace_back(n, std::move(pts));
  }
  return seeds;
}

KirchhoffSearch find_critical(const Mat& hessV, int m, int n,
                              const std::vector<ClusterConfig>& seeds, double tol,
                              std::uint64_t rng_seed) {
  check_hess(hessV, n);
  if ((hessV - hessV.transpose()).norm() != 0.0) throw std::invalid_argument("hessV must be symmetric");
  const bool isotropic = is_isotropic(hessV);
  const std::vector<ClusterConfig> starts = seeds.empty() ? auto_seeds(m, n, rng_seed) : seeds;

  const VectorFn grad = [&](const Vec& x) { return f_grad(hessV, ClusterConfig::from_stacked(n, x)); };
  const JacobianFn jac = [&](const Vec& x) { return f_hessian(hessV, ClusterConfig::from_stacked(n, x)); };
  NewtonOptions opts;
  opts.tol = tol;
  opts.max_iter = 100;
  opts.allow_rank_deficient = true;
  opts.divergence_bound = 1e6;

  KirchhoffSearch out;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    SeedDiagnostic diag;
    diag.seed_index = static_cast<int>(s);
    if (starts[s].size() != m || starts[s].dim() != n) {
      diag.message = "seed has wrong shape";
      out.diagnostics.push_back(diag);
      continue;
    }
    const auto report = newton_solve(grad, jac, starts[s].stacked(), opts);
    diag.converged = report.converged;
    diag.residual = report.residual_norm;
    diag.message = report.converged ? "converged" : report.diagnostic;
    out.diagnostics.push_back(diag);
    if (!report.converged) continue;

    ClusterConfig found = ClusterConfig::from_stacked(n, report.solution);
    if (isotropic) found = normalize_orientation(found);
    const bool duplicate = std::any_of(out.found.begin(), out.found.end(), [&](const CriticalConfig& c) {
      return config_distance(c.config, found, isotropic) < 1e-6;
    });
    if (duplicate) continue;
    CriticalConfig cc{found, f_eval(hessV, found), f_grad(hessV, found).lpNorm<Eigen::Infinity>(),
                      hessian_signature(hessV, found), found.min_pair_distance()};
    out.found.push_back(std::move(cc));
  }

  std::sort(out.found.begin(), out.found.end(), [](const CriticalConfig& a, const CriticalConfig& b) {
    if (a.f_value != b.f_value) return a.f_value < b.f_value;
    const Vec sa = a.config.stacked(), sb = b.config.stacked();
    return std::lexicographical_compare(sa.data(), sa.data() + sa.size(), sb.data(), sb.data() + sb.size());
  });
  return out;
}

}  // namespace blowup
