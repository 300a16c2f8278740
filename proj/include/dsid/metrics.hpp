#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace dsid {

/// C x C counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  std::int64_t at(int truth, int predicted) const;
  void add(int truth, int predicted);

  std::int64_t total() const;
  std::int64_t correct() const;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int predicted) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> predict_labels(const Eigen::Ref<const Eigen::MatrixXd>& logits);

struct Score {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  ConfusionMatrix cm;
};

/// Per-class F1 = 2TP / (2TP + FP + FN), zero when the denominator is zero;
/// macro F1 averages over all C classes.
Score score(std::span<const int> predictions, std::span<const int> labels, int classes);
Score score(const ConfusionMatrix& cm);

struct LabeledPredictions {
  std::vector<int> predicted;
  std::vector<int> truth;
};

struct PooledScore {
  /// All predictions concatenated and scored once.
  Score pooled;
  /// Unweighted mean of per-fold metrics.
  double mean_fold_accuracy = 0.0;
  double mean_fold_macro_f1 = 0.0;
};

PooledScore pool_folds(std::span<const LabeledPredictions> folds, int classes);

}  // namespace dsid
