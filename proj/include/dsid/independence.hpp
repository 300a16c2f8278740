#pragma once

#include "dsid/kernels.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dsid {

/// Normalized true-branch / disguised-branch features of one sample.
struct FeaturePair {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd y_hat;
};

/// A batch of feature pairs stored row-wise: row i of `x_hat` and `y_hat`
/// is the pair of sample i. Degenerate (zero-norm) rows are flagged and
/// hold the zero vector.
struct FeaturePairs {
  Eigen::MatrixXd x_hat;
  Eigen::MatrixXd y_hat;
  std::vector<bool> x_degenerate;
  std::vector<bool> y_degenerate;

  Eigen::Index size() const { return x_hat.rows(); }
  FeaturePair pair(Eigen::Index i) const { return {x_hat.row(i).transpose(), y_hat.row(i).transpose()}; }

  /// Builds a batch from raw features by L2-normalizing every row.
  static FeaturePairs from_raw(const Eigen::Ref<const Eigen::MatrixXd>& x,
                               const Eigen::Ref<const Eigen::MatrixXd>& y);
};

enum class HsicMode {
  /// Mean over samples of (k(x,y) - k(x,x) k(y,y))^2, evaluated per pair.
  PaperPerSample,
  /// Biased batch estimator tr(K H L H) / (N-1)^2.
  ClassicalBiased,
};

double hsic_per_sample(const FeaturePair& pair, const KernelConfig& cfg);

/// Returns cfg with sigma replaced by the median heuristic over all rows of
/// the batch when cfg.median_heuristic is set; otherwise cfg unchanged.
KernelConfig resolve_bandwidth(const KernelConfig& cfg, const FeaturePairs& pairs);

double hsic_batch_loss(const FeaturePairs& pairs, const KernelConfig& cfg, HsicMode mode);

struct HsicGrad {
  Eigen::MatrixXd d_x_hat;
  Eigen::MatrixXd d_y_hat;
};

/// Exact gradient of hsic_batch_loss with respect to every row of x_hat and
/// y_hat. A median-heuristic bandwidth is resolved once and held fixed.
HsicGrad hsic_batch_grad(const FeaturePairs& pairs, const KernelConfig& cfg, HsicMode mode);

/// Classical biased HSIC between the rows of two equally sized sets.
double hsic_biased(const Eigen::Ref<const Eigen::MatrixXd>& x_set,
                   const Eigen::Ref<const Eigen::MatrixXd>& y_set,
                   const KernelConfig& cfg);

struct PermutationTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Permutation test of independence using the biased HSIC statistic.
/// p = (1 + #{permuted >= observed}) / (1 + n_perm). Requires N >= 5 and
/// n_perm >= 100.
PermutationTestResult permutation_independence_test(const Eigen::Ref<const Eigen::MatrixXd>& x_set,
                                                     const Eigen::Ref<const Eigen::MatrixXd>& y_set,
                                                     const KernelConfig& cfg, int n_perm,
                                                     std::uint64_t seed);

}  // namespace dsid
