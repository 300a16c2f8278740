#include "dsid/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dsid {

void ObjectiveConfig::validate() const {
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw std::invalid_argument("alpha must be finite and >= 0");
  if (!(std::isfinite(beta) && beta >= 0.0)) throw std::invalid_argument("beta must be finite and >= 0");
  kernel.validate();
}

CrossEntropy cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (n < 1) throw std::invalid_argument("empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("label count mismatch");

  CrossEntropy out;
  out.grad_logits.resize(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
    const double shift = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - shift).exp().matrix();
    const double sum = e.sum();
    total += std::log(sum) - (logits(i, y) - shift);
    out.grad_logits.row(i) = e / sum;
    out.grad_logits(i, y) -= 1.0;
  }
  out.grad_logits *= inv_n;
  out.loss = total * inv_n;
  return out;
}

TotalLoss total_loss(const Eigen::Ref<const Eigen::MatrixXd>& true_logits,
                     const Eigen::Ref<const Eigen::MatrixXd>& disg_logits, const FeaturePairs& pairs,
                     std::span<const int> true_labels, std::span<const int> disg_labels, const ObjectiveConfig& cfg) {
  const Eigen::Index n = true_logits.rows();
  if (disg_logits.rows() != n || pairs.size() != n) throw std::invalid_argument("inconsistent batch sizes");

  auto ce_true = cross_entropy(true_logits, true_labels);
  auto ce_disg = cross_entropy(disg_logits, disg_labels);

  TotalLoss out;
  out.components.true_loss = ce_true.loss;
  out.components.disguised_loss = ce_disg.loss;
  out.components.hsic_loss = hsic_batch_loss(pairs, cfg.kernel, cfg.hsic_mode);
  out.total = combine(out.components, cfg.alpha, cfg.beta);

  out.grad_true_logits = std::move(ce_true.grad_logits);
  out.grad_disg_logits = cfg.beta * ce_disg.grad_logits;
  out.grad_pairs = hsic_batch_grad(pairs, cfg.kernel, cfg.hsic_mode);
  out.grad_pairs.d_x_hat *= cfg.alpha;
  out.grad_pairs.d_y_hat *= cfg.alpha;
  return out;
}

}  // namespace dsid
