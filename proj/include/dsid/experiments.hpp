#pragma once

#include "dsid/trainer.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dsid {

/// Compared model variants, in table order.
enum class Method {
  /// No decoupling: one head on the shared adapter. TER and DER come from two
  /// separately trained single-task models.
  SingleStream,
  /// Dual stream with alpha forced to 0.
  DsidNoHsic,
  /// Dual stream with the configured objective.
  Dsid,
};

std::string_view method_name(Method m);
/// Accepts "single", "vit", "dsid-nohsic", "dsid".
Method parse_method(std::string_view s);
/// Sorts into table order and removes duplicates.
std::vector<Method> canonical_order(std::vector<Method> methods);

struct MetricRow {
  std::string label;
  double ter_accuracy = 0.0;
  double ter_f1 = 0.0;
  double der_accuracy = 0.0;
  double der_f1 = 0.0;
  double ter_fold_accuracy = 0.0;
  double ter_fold_f1 = 0.0;
  double der_fold_accuracy = 0.0;
  double der_fold_f1 = 0.0;
};

struct MethodRun {
  Method method = Method::Dsid;
  ObjectiveConfig objective;
  MetricRow row;
  /// One run for dual-stream methods; two (TER model, DER model) for SingleStream.
  std::vector<LosoResult> runs;
};

/// Runs LOSO for one variant. All variants derive their streams from the
/// same train_cfg.seed. `dims.topology` and `dims.branch_depth` are set per
/// method.
MethodRun run_method(const Dataset& data, Method method, const ModelDims& dims, const ObjectiveConfig& obj,
                     const TrainConfig& train);

/// Aligned plain-text table with columns method | TER acc | TER F1 | DER acc | DER F1.
std::string format_text_table(std::string_view first_column, const std::vector<MetricRow>& rows);
/// Comma-separated form of the same table (pooled metrics plus per-fold means).
std::string format_csv_table(std::string_view first_column, const std::vector<MetricRow>& rows);

/// Default alpha / beta grid for sweeps.
std::vector<double> default_sweep_grid();

}  // namespace dsid
