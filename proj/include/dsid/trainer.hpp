#pragma once

#include "dsid/dataio.hpp"
#include "dsid/metrics.hpp"
#include "dsid/netcore.hpp"
#include "dsid/objective.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dsid {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Bias-corrected Adam with coupled L2 decay: g <- g + weight_decay * theta
/// for slots flagged `decay` (Linear weights and biases only). State is
/// lazily sized on the first call.
void adam_step(std::span<const ParamSlot> params, std::span<const std::span<const double>> grads, AdamState& state,
               double lr, double weight_decay, const AdamConfig& cfg = {});

enum class Monitor {
  /// Early stopping watches the held-out evaluation set.
  HeldOutFold,
  /// Early stopping watches a seeded 20% slice of the training samples.
  InnerHoldout,
};

/// Which label a SingleStream model is trained on.
enum class Target { True, Disguised };

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 32;
  double lr = 5e-4;
  double weight_decay = 5e-4;
  /// Overrides ModelDims::dropout_p.
  double dropout_p = 0.5;
  int patience = 50;
  std::uint64_t seed = 0;
  Monitor monitor = Monitor::HeldOutFold;
  AdamConfig adam;
  Target single_stream_target = Target::True;
  /// Upper bound on concurrently trained folds in run_loso.
  int jobs = 1;

  void validate() const;
};

struct BranchOutcome {
  std::vector<int> predicted;
  std::vector<int> truth;
  Score score;
};

struct EpochRecord {
  int epoch = 0;
  /// Means over the epoch's optimization steps.
  double true_loss = 0.0;
  double disguised_loss = 0.0;
  double hsic_loss = 0.0;
  double total_loss = 0.0;
  /// Accuracy of the trained head on the monitor set; the mean of both heads
  /// for a DualStream model.
  double monitor_accuracy = 0.0;
};

struct FoldResult {
  int subject_id = 0;
  std::optional<BranchOutcome> true_branch;
  std::optional<BranchOutcome> disguised_branch;
  int epochs_ran = 0;
  int best_epoch = 0;
  double best_monitor_accuracy = 0.0;
  std::vector<EpochRecord> history;
};

struct TrainedFold {
  FoldResult result;
  /// Restored best-monitor checkpoint.
  DsidModel model;
};

/// Trains one model and scores it on `eval_set`. `subject_id` only labels the
/// result. The per-fold RNG streams (init, shuffling, dropout, inner split)
/// all derive from train_cfg.seed.
TrainedFold train_fold(const Dataset& train_set, const Dataset& eval_set, const ModelDims& dims,
                       const ObjectiveConfig& obj_cfg, const TrainConfig& train_cfg, int subject_id = 0);

/// Eval-mode predictions of a trained model on a dataset. Returns true-branch
/// and (for DualStream) disguised-branch logits.
ForwardResult evaluate(const DsidModel& model, const Dataset& data);

struct LosoResult {
  std::vector<FoldResult> folds;  // ascending subject id
  std::vector<DsidModel> models;  // parallel to folds
  std::optional<PooledScore> true_summary;
  std::optional<PooledScore> disguised_summary;
};

/// One fold per subject in ascending order; fold seed = train_cfg.seed + subject id.
LosoResult run_loso(const Dataset& dataset, const ModelDims& dims, const ObjectiveConfig& obj_cfg,
                    const TrainConfig& train_cfg);

}  // namespace dsid
