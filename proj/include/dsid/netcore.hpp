#pragma once

#include "dsid/independence.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dsid {

enum class Mode { Train, Eval };

enum class Topology {
  /// Shared adapter feeding a true-emotion and a disguised-emotion branch.
  DualStream,
  /// Shared adapter feeding one branch; used for the no-decoupling baseline.
  SingleStream,
};

struct ModelDims {
  int d_emb = 0;
  int d_shared = 256;
  int d_feat = 128;
  int n_true = 6;
  int n_disg = 6;
  /// Blocks in the shared (masked-expression) adapter.
  int shared_depth = 1;
  /// Blocks in each branch adapter. Zero puts the head directly on the shared
  /// features, which is only meaningful for SingleStream.
  int branch_depth = 1;
  Topology topology = Topology::DualStream;
  double dropout_p = 0.5;

  void validate() const;
  int feature_dim() const { return branch_depth > 0 ? d_feat : d_shared; }
  bool operator==(const ModelDims&) const = default;
};

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct BatchNorm {
  Eigen::VectorXd gamma;
  Eigen::VectorXd shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Linear -> BatchNorm -> ReLU -> Dropout.
struct AdapterBlock {
  Linear linear;
  BatchNorm bn;
  double dropout_p = 0.0;
};

struct Branch {
  std::vector<AdapterBlock> adapter;
  Linear head;
};

struct DsidModel {
  ModelDims dims;
  std::vector<AdapterBlock> masked_adapter;
  Branch true_branch;
  /// Present for DualStream only.
  std::optional<Branch> disguised_branch;
};

/// Linear weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases, identity
/// BatchNorm. Every layer draws from its own seed stream derived from `seed`,
/// so the true branch of a DualStream model equals that of a SingleStream
/// model built from the same seed.
DsidModel init_params(const ModelDims& dims, std::uint64_t seed);

struct BlockTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd normalized;  // BatchNorm pre-affine activations
  Eigen::VectorXd batch_mean;
  Eigen::VectorXd batch_var;   // biased
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd pre_relu;
  Eigen::MatrixXd dropout_scale;  // empty when dropout inactive
};

struct BranchTrace {
  std::vector<BlockTrace> adapter;
  Eigen::MatrixXd features;  // head input
};

struct ForwardTrace {
  Mode mode = Mode::Eval;
  Eigen::Index batch_size = 0;
  std::vector<BlockTrace> masked;
  BranchTrace true_branch;
  std::optional<BranchTrace> disguised_branch;
  Eigen::VectorXd true_norms;
  Eigen::VectorXd disguised_norms;
};

struct ForwardResult {
  Eigen::MatrixXd true_logits;
  /// Empty for SingleStream models.
  Eigen::MatrixXd disg_logits;
  /// Normalized branch features; empty for SingleStream models.
  FeaturePairs pairs;
  ForwardTrace trace;
};

/// Runs the model on `batch` (N x d_emb). Train mode uses batch statistics
/// and draws dropout masks from streams derived from `dropout_seed`; it does
/// not touch running statistics (see commit_batch_stats). Eval mode uses
/// running statistics and no dropout.
ForwardResult forward(const DsidModel& model, const Eigen::Ref<const Eigen::MatrixXd>& batch, Mode mode,
                      std::uint64_t dropout_seed = 0);

/// Folds the batch statistics of a Train-mode trace into the running stats.
void commit_batch_stats(DsidModel& model, const ForwardTrace& trace);

struct LinearGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct BlockGrad {
  LinearGrad linear;
  Eigen::VectorXd gamma;
  Eigen::VectorXd shift;
};

struct BranchGrad {
  std::vector<BlockGrad> adapter;
  LinearGrad head;
};

struct ParamGrads {
  std::vector<BlockGrad> masked;
  BranchGrad true_branch;
  std::optional<BranchGrad> disguised_branch;
};

/// Backpropagates logit and normalized-feature gradients through a Train-mode
/// trace. `grad_pairs` may be null (no HSIC term). Degenerate features pass
/// zero gradient through the normalization.
ParamGrads backward(const DsidModel& model, const ForwardTrace& trace,
                    const Eigen::Ref<const Eigen::MatrixXd>& grad_true_logits,
                    const Eigen::Ref<const Eigen::MatrixXd>& grad_disg_logits, const HsicGrad* grad_pairs);

/// One trainable tensor viewed as a flat span. `decay` marks Linear weights
/// and biases, which receive L2 weight decay.
struct ParamSlot {
  std::string name;
  std::span<double> values;
  bool decay = false;
};

/// Trainable parameters in declaration order (running stats excluded).
std::vector<ParamSlot> parameter_slots(DsidModel& model);
/// Gradients in the same order as parameter_slots.
std::vector<std::span<const double>> gradient_slots(const ParamGrads& grads);

std::size_t parameter_count(const DsidModel& model);

}  // namespace dsid
