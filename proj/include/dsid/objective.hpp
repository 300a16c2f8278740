#pragma once

#include "dsid/independence.hpp"

#include <Eigen/Core>

#include <span>

namespace dsid {

/// Weights of the total loss L_T + beta * L_D + alpha * L_HSIC.
struct ObjectiveConfig {
  double alpha = 0.5;
  double beta = 1.0;
  KernelConfig kernel;
  HsicMode hsic_mode = HsicMode::PaperPerSample;

  void validate() const;
};

struct CrossEntropy {
  double loss = 0.0;
  Eigen::MatrixXd grad_logits;
};

/// Mean softmax cross-entropy with log-sum-exp stabilization.
/// Gradient is (softmax - onehot) / N.
CrossEntropy cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& logits, std::span<const int> labels);

struct LossComponents {
  double true_loss = 0.0;       // L_T
  double disguised_loss = 0.0;  // L_D
  double hsic_loss = 0.0;       // L_HSIC
};

struct TotalLoss {
  double total = 0.0;
  LossComponents components;
  /// Gradients of the weighted total.
  Eigen::MatrixXd grad_true_logits;
  Eigen::MatrixXd grad_disg_logits;
  HsicGrad grad_pairs;
};

TotalLoss total_loss(const Eigen::Ref<const Eigen::MatrixXd>& true_logits,
                     const Eigen::Ref<const Eigen::MatrixXd>& disg_logits, const FeaturePairs& pairs,
                     std::span<const int> true_labels, std::span<const int> disg_labels, const ObjectiveConfig& cfg);

/// Recombines frozen component values with new weights.
inline double combine(const LossComponents& c, double alpha, double beta) {
  return c.true_loss + beta * c.disguised_loss + alpha * c.hsic_loss;
}

}  // namespace dsid
