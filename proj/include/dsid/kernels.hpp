#pragma once

#include <Eigen/Core>

#include <utility>

namespace dsid {

enum class KernelKind { Rbf, Linear };

/// Kernel selection. `sigma` is the RBF bandwidth; it is ignored for the
/// linear kernel. With `median_heuristic` set, batch-level callers replace
/// sigma by median pairwise distance / sqrt(2) (see resolve_bandwidth).
struct KernelConfig {
  KernelKind kind = KernelKind::Rbf;
  double sigma = 1.0;
  bool median_heuristic = false;

  void validate() const;
};

inline constexpr double kNormEpsilon = 1e-12;

struct Normalized {
  Eigen::VectorXd value;
  double norm = 0.0;
  bool degenerate = false;
};

/// x / ||x||_2. Inputs with norm <= 1e-12 map to the zero vector and set
/// `degenerate` instead of failing.
Normalized l2_normalize(const Eigen::Ref<const Eigen::VectorXd>& x);

double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v,
                   const KernelConfig& cfg);

struct KernelGrad {
  Eigen::VectorXd d_u;
  Eigen::VectorXd d_v;
};

KernelGrad kernel_eval_grad(const Eigen::Ref<const Eigen::VectorXd>& u,
                            const Eigen::Ref<const Eigen::VectorXd>& v,
                            const KernelConfig& cfg);

/// Gram matrix K(i, j) = k(a_i, b_j) over the rows of `a` and `b`.
Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b,
                            const KernelConfig& cfg);

/// Median of all pairwise Euclidean distances between distinct rows of
/// `points`, divided by sqrt(2). Returns 1.0 when fewer than two rows or
/// when every distance is zero.
double median_heuristic_sigma(const Eigen::Ref<const Eigen::MatrixXd>& points);

}  // namespace dsid
