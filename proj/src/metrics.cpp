#include "dsid/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace dsid {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {
  if (classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw std::invalid_argument("class index out of range");
  }
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::correct() const {
  std::int64_t s = 0;
  for (int c = 0; c < classes_; ++c) s += at(c, c);
  return s;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int c = 0; c < classes_; ++c) s += at(truth, c);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
  std::int64_t s = 0;
  for (int r = 0; r < classes_; ++r) s += at(r, predicted);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("confusion matrix class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::vector<int> predict_labels(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Score score(const ConfusionMatrix& cm) {
  Score s;
  s.cm = cm;
  const auto n = cm.total();
  s.accuracy = n > 0 ? static_cast<double>(cm.correct()) / static_cast<double>(n) : 0.0;
  s.per_class_f1.resize(static_cast<std::size_t>(cm.classes()));
  for (int c = 0; c < cm.classes(); ++c) {
    const auto tp = cm.at(c, c);
    const auto fp = cm.col_sum(c) - tp;
    const auto fn = cm.row_sum(c) - tp;
    const auto denom = 2 * tp + fp + fn;
    s.per_class_f1[static_cast<std::size_t>(c)] = denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  s.macro_f1 = std::accumulate(s.per_class_f1.begin(), s.per_class_f1.end(), 0.0) / cm.classes();
  return s;
}

Score score(std::span<const int> predictions, std::span<const int> labels, int classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("length mismatch: " + std::to_string(predictions.size()) + " predictions, " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
  return score(cm);
}

PooledScore pool_folds(std::span<const LabeledPredictions> folds, int classes) {
  if (folds.empty()) throw std::invalid_argument("no folds to pool");
  PooledScore out;
  ConfusionMatrix total(classes);
  for (const auto& f : folds) {
    const auto s = score(f.predicted, f.truth, classes);
    total += s.cm;
    out.mean_fold_accuracy += s.accuracy;
    out.mean_fold_macro_f1 += s.macro_f1;
  }
  out.mean_fold_accuracy /= static_cast<double>(folds.size());
  out.mean_fold_macro_f1 /= static_cast<double>(folds.size());
  out.pooled = score(total);
  return out;
}

}  // namespace dsid
