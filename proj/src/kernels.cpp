#include "dsid/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dsid {

void KernelConfig::validate() const {
  if (kind == KernelKind::Rbf && !median_heuristic && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw std::invalid_argument("RBF bandwidth sigma must be positive");
  }
}

Normalized l2_normalize(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Normalized out;
  out.norm = x.norm();
  if (out.norm <= kNormEpsilon) {
    out.value = Eigen::VectorXd::Zero(x.size());
    out.degenerate = true;
  } else {
    out.value = x / out.norm;
  }
  return out;
}

namespace {

void check_dims(const Eigen::Ref<const Eigen::VectorXd>& u,
                const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size() || u.size() == 0) {
    throw std::invalid_argument("kernel dimension mismatch");
  }
}

}  // namespace

double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v,
                   const KernelConfig& cfg) {
  check_dims(u, v);
  switch (cfg.kind) {
    case KernelKind::Linear:
      return u.dot(v);
    case KernelKind::Rbf:
      break;
  }
  const double dist2 = (u - v).squaredNorm();
  return std::exp(-dist2 / (2.0 * cfg.sigma * cfg.sigma));
}

KernelGrad kernel_eval_grad(const Eigen::Ref<const Eigen::VectorXd>& u,
                            const Eigen::Ref<const Eigen::VectorXd>& v,
                            const KernelConfig& cfg) {
  check_dims(u, v);
  KernelGrad g;
  if (cfg.kind == KernelKind::Linear) {
    g.d_u = v;
    g.d_v = u;
    return g;
  }
  const double k = kernel_eval(u, v, cfg);
  g.d_u = (k / (cfg.sigma * cfg.sigma)) * (v - u);
  g.d_v = -g.d_u;
  return g;
}

Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b,
                            const KernelConfig& cfg) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("kernel dimension mismatch");
  }
  if (cfg.kind == KernelKind::Linear) {
    return a * b.transpose();
  }
  Eigen::MatrixXd k(a.rows(), b.rows());
  const double scale = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * scale);
    }
  }
  return k;
}

double median_heuristic_sigma(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  std::vector<double> dists;
  const Eigen::Index n = points.rows();
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  if (dists.empty()) return 1.0;
  // Lower median for even counts keeps the value an observed distance.
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>((dists.size() - 1) / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  const double sigma = *mid / std::sqrt(2.0);
  return sigma > 0.0 ? sigma : 1.0;
}

}  // namespace dsid
