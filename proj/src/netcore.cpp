#include "dsid/netcore.hpp"

#include "dsid/random.hpp"

#include <cmath>
#include <stdexcept>

namespace dsid {

namespace {

enum SeedTag : std::uint64_t {
  kMaskedBlock = 1,
  kTrueBlock = 2,
  kTrueHead = 3,
  kDisguisedBlock = 4,
  kDisguisedHead = 5,
};

Linear make_linear(int in, int out, std::uint64_t seed) {
  Linear l;
  l.weight.resize(out, in);
  l.bias = Eigen::VectorXd::Zero(out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  Rng rng(seed);
  // Row-major fill order keeps the draw sequence independent of storage order.
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
  }
  return l;
}

AdapterBlock make_block(int in, int out, double dropout_p, std::uint64_t seed) {
  AdapterBlock b;
  b.linear = make_linear(in, out, seed);
  b.bn.gamma = Eigen::VectorXd::Ones(out);
  b.bn.shift = Eigen::VectorXd::Zero(out);
  b.bn.running_mean = Eigen::VectorXd::Zero(out);
  b.bn.running_var = Eigen::VectorXd::Ones(out);
  b.dropout_p = dropout_p;
  return b;
}

Branch make_branch(const ModelDims& dims, int n_classes, std::uint64_t seed, SeedTag block_tag,
                   SeedTag head_tag) {
  Branch br;
  int in = dims.d_shared;
  for (int k = 0; k < dims.branch_depth; ++k) {
    br.adapter.push_back(make_block(in, dims.d_feat, dims.dropout_p, derive_seed(seed, block_tag, k)));
    in = dims.d_feat;
  }
  br.head = make_linear(in, n_classes, derive_seed(seed, head_tag));
  return br;
}

Eigen::MatrixXd block_forward(const AdapterBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& x, Mode mode,
                              std::uint64_t dropout_seed, BlockTrace& t) {
  const auto& bn = block.bn;
  const Eigen::Index n = x.rows();
  t.input = x;
  Eigen::MatrixXd z = x * block.linear.weight.transpose();
  z.rowwise() += block.linear.bias.transpose();

  if (mode == Mode::Train) {
    t.batch_mean = z.colwise().mean().transpose();
    z.rowwise() -= t.batch_mean.transpose();
    t.batch_var = z.colwise().squaredNorm().transpose() / static_cast<double>(n);
    t.inv_std = (t.batch_var.array() + bn.eps).rsqrt().matrix();
  } else {
    z.rowwise() -= bn.running_mean.transpose();
    t.inv_std = (bn.running_var.array() + bn.eps).rsqrt().matrix();
  }
  z.array().rowwise() *= t.inv_std.transpose().array();
  t.normalized = z;

  Eigen::MatrixXd y = z;
  y.array().rowwise() *= bn.gamma.transpose().array();
  y.rowwise() += bn.shift.transpose();
  t.pre_relu = y;
  Eigen::MatrixXd a = y.cwiseMax(0.0);

  if (mode == Mode::Train && block.dropout_p > 0.0) {
    Rng rng(dropout_seed);
    const double keep_scale = 1.0 / (1.0 - block.dropout_p);
    t.dropout_scale.resize(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        t.dropout_scale(r, c) = rng.uniform() < block.dropout_p ? 0.0 : keep_scale;
      }
    }
    a.array() *= t.dropout_scale.array();
  }
  return a;
}

Eigen::MatrixXd branch_forward(const Branch& br, const Eigen::MatrixXd& shared, Mode mode, std::uint64_t dropout_seed,
                               SeedTag tag, BranchTrace& t, Eigen::MatrixXd& logits) {
  Eigen::MatrixXd h = shared;
  t.adapter.resize(br.adapter.size());
  for (std::size_t k = 0; k < br.adapter.size(); ++k) {
    h = block_forward(br.adapter[k], h, mode, derive_seed(dropout_seed, tag, k), t.adapter[k]);
  }
  logits = h * br.head.weight.transpose();
  logits.rowwise() += br.head.bias.transpose();
  t.features = h;
  return h;
}

// dL/dx for x_hat = x / ||x|| is (g - x_hat (x_hat . g)) / ||x||.
Eigen::MatrixXd normalization_backward(const Eigen::MatrixXd& x_hat, const Eigen::VectorXd& norms,
                                       const std::vector<bool>& degenerate, const Eigen::MatrixXd& grad) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    if (degenerate[static_cast<std::size_t>(i)]) continue;
    const double proj = x_hat.row(i).dot(grad.row(i));
    out.row(i) = (grad.row(i) - proj * x_hat.row(i)) / norms(i);
  }
  return out;
}

Eigen::MatrixXd block_backward(const AdapterBlock& block, const BlockTrace& t, Eigen::MatrixXd grad, BlockGrad& g) {
  const double n = static_cast<double>(t.input.rows());
  if (t.dropout_scale.size() != 0) grad.array() *= t.dropout_scale.array();
  grad.array() *= (t.pre_relu.array() > 0.0).cast<double>();

  g.gamma = grad.cwiseProduct(t.normalized).colwise().sum().transpose();
  g.shift = grad.colwise().sum().transpose();

  Eigen::MatrixXd d_norm = grad;
  d_norm.array().rowwise() *= block.bn.gamma.transpose().array();
  // Batch-statistics backward: dz = inv_std / N * (N dn - sum(dn) - n_hat * sum(dn * n_hat)).
  const Eigen::RowVectorXd sum_d = d_norm.colwise().sum();
  const Eigen::RowVectorXd sum_dn = d_norm.cwiseProduct(t.normalized).colwise().sum();
  Eigen::MatrixXd dz = n * d_norm;
  dz.rowwise() -= sum_d;
  dz -= (t.normalized.array().rowwise() * sum_dn.array()).matrix();
  dz.array().rowwise() *= (t.inv_std.transpose() / n).array();

  g.linear.weight = dz.transpose() * t.input;
  g.linear.bias = dz.colwise().sum().transpose();
  return dz * block.linear.weight;
}

Eigen::MatrixXd branch_backward(const Branch& br, const BranchTrace& t, const Eigen::Ref<const Eigen::MatrixXd>& d_logits,
                                const Eigen::MatrixXd* d_features, BranchGrad& g) {
  g.head.weight = d_logits.transpose() * t.features;
  g.head.bias = d_logits.colwise().sum().transpose();
  Eigen::MatrixXd d_h = d_logits * br.head.weight;
  if (d_features != nullptr) d_h += *d_features;
  g.adapter.resize(br.adapter.size());
  for (std::size_t k = br.adapter.size(); k-- > 0;) {
    d_h = block_backward(br.adapter[k], t.adapter[k], std::move(d_h), g.adapter[k]);
  }
  return d_h;
}

void push_linear(std::vector<ParamSlot>& out, const std::string& prefix, Linear& l) {
  out.push_back({prefix + ".weight", {l.weight.data(), static_cast<std::size_t>(l.weight.size())}, true});
  out.push_back({prefix + ".bias", {l.bias.data(), static_cast<std::size_t>(l.bias.size())}, true});
}

void push_block(std::vector<ParamSlot>& out, const std::string& prefix, AdapterBlock& b) {
  push_linear(out, prefix + ".linear", b.linear);
  out.push_back({prefix + ".bn.gamma", {b.bn.gamma.data(), static_cast<std::size_t>(b.bn.gamma.size())}, false});
  out.push_back({prefix + ".bn.shift", {b.bn.shift.data(), static_cast<std::size_t>(b.bn.shift.size())}, false});
}

std::span<const double> view(const Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void push_block_grad(std::vector<std::span<const double>>& out, const BlockGrad& g) {
  out.push_back(view(g.linear.weight));
  out.push_back(view(g.linear.bias));
  out.push_back(view(g.gamma));
  out.push_back(view(g.shift));
}

void push_branch_grad(std::vector<std::span<const double>>& out, const BranchGrad& g) {
  for (const auto& b : g.adapter) push_block_grad(out, b);
  out.push_back(view(g.head.weight));
  out.push_back(view(g.head.bias));
}

}  // namespace

void ModelDims::validate() const {
  if (d_emb < 1 || d_shared < 1 || d_feat < 1 || n_true < 1 || n_disg < 1) {
    throw std::invalid_argument("model dimensions must be >= 1");
  }
  if (shared_depth < 1 || branch_depth < 0) throw std::invalid_argument("invalid adapter depth");
  if (topology == Topology::DualStream && branch_depth < 1) {
    throw std::invalid_argument("dual-stream model needs branch adapters");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("dropout_p must be in [0, 1)");
}

DsidModel init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  DsidModel m;
  m.dims = dims;
  int in = dims.d_emb;
  for (int k = 0; k < dims.shared_depth; ++k) {
    m.masked_adapter.push_back(make_block(in, dims.d_shared, dims.dropout_p, derive_seed(seed, kMaskedBlock, k)));
    in = dims.d_shared;
  }
  m.true_branch = make_branch(dims, dims.n_true, seed, kTrueBlock, kTrueHead);
  if (dims.topology == Topology::DualStream) {
    m.disguised_branch = make_branch(dims, dims.n_disg, seed, kDisguisedBlock, kDisguisedHead);
  }
  return m;
}

ForwardResult forward(const DsidModel& model, const Eigen::Ref<const Eigen::MatrixXd>& batch, Mode mode,
                      std::uint64_t dropout_seed) {
  if (batch.rows() < 1) throw std::invalid_argument("empty batch");
  if (batch.cols() != model.dims.d_emb) throw std::invalid_argument("batch width does not match d_emb");
  if (mode == Mode::Train && batch.rows() < 2) throw std::invalid_argument("batch statistics undefined");

  ForwardResult out;
  auto& t = out.trace;
  t.mode = mode;
  t.batch_size = batch.rows();
  t.masked.resize(model.masked_adapter.size());
  Eigen::MatrixXd h = batch;
  for (std::size_t k = 0; k < model.masked_adapter.size(); ++k) {
    h = block_forward(model.masked_adapter[k], h, mode, derive_seed(dropout_seed, kMaskedBlock, k), t.masked[k]);
  }

  const Eigen::MatrixXd f_true =
      branch_forward(model.true_branch, h, mode, dropout_seed, kTrueBlock, t.true_branch, out.true_logits);
  if (model.disguised_branch) {
    t.disguised_branch.emplace();
    const Eigen::MatrixXd f_disg = branch_forward(*model.disguised_branch, h, mode, dropout_seed, kDisguisedBlock,
                                                  *t.disguised_branch, out.disg_logits);
    out.pairs = FeaturePairs::from_raw(f_true, f_disg);
    t.true_norms = f_true.rowwise().norm();
    t.disguised_norms = f_disg.rowwise().norm();
  }
  return out;
}

void commit_batch_stats(DsidModel& model, const ForwardTrace& trace) {
  if (trace.mode != Mode::Train) return;
  const double n = static_cast<double>(trace.batch_size);
  auto update = [n](AdapterBlock& b, const BlockTrace& t) {
    const double m = b.bn.momentum;
    b.bn.running_mean = (1.0 - m) * b.bn.running_mean + m * t.batch_mean;
    b.bn.running_var = (1.0 - m) * b.bn.running_var + m * (n / (n - 1.0)) * t.batch_var;
  };
  for (std::size_t k = 0; k < model.masked_adapter.size(); ++k) update(model.masked_adapter[k], trace.masked[k]);
  for (std::size_t k = 0; k < model.true_branch.adapter.size(); ++k) {
    update(model.true_branch.adapter[k], trace.true_branch.adapter[k]);
  }
  if (model.disguised_branch && trace.disguised_branch) {
    for (std::size_t k = 0; k < model.disguised_branch->adapter.size(); ++k) {
      update(model.disguised_branch->adapter[k], trace.disguised_branch->adapter[k]);
    }
  }
}

ParamGrads backward(const DsidModel& model, const ForwardTrace& trace,
                    const Eigen::Ref<const Eigen::MatrixXd>& grad_true_logits,
                    const Eigen::Ref<const Eigen::MatrixXd>& grad_disg_logits, const HsicGrad* grad_pairs) {
  if (trace.mode != Mode::Train) throw std::invalid_argument("backward requires a Train-mode trace");
  const Eigen::Index n = trace.batch_size;
  const bool dual = model.disguised_branch.has_value();
  if (trace.masked.size() != model.masked_adapter.size() ||
      trace.true_branch.adapter.size() != model.true_branch.adapter.size() ||
      dual != trace.disguised_branch.has_value()) {
    throw std::invalid_argument("trace does not match model");
  }
  if (grad_true_logits.rows() != n || grad_true_logits.cols() != model.true_branch.head.weight.rows()) {
    throw std::invalid_argument("true logit gradient shape mismatch");
  }
  if (dual && (grad_disg_logits.rows() != n || grad_disg_logits.cols() != model.disguised_branch->head.weight.rows())) {
    throw std::invalid_argument("disguised logit gradient shape mismatch");
  }
  if (grad_pairs != nullptr && (!dual || grad_pairs->d_x_hat.rows() != n || grad_pairs->d_y_hat.rows() != n ||
                                grad_pairs->d_x_hat.cols() != model.dims.feature_dim())) {
    throw std::invalid_argument("feature gradient shape mismatch");
  }

  ParamGrads g;
  Eigen::MatrixXd d_shared;
  if (dual) {
    std::optional<Eigen::MatrixXd> d_true_feat;
    std::optional<Eigen::MatrixXd> d_disg_feat;
    if (grad_pairs != nullptr) {
      const auto pairs = FeaturePairs::from_raw(trace.true_branch.features, trace.disguised_branch->features);
      d_true_feat = normalization_backward(pairs.x_hat, trace.true_norms, pairs.x_degenerate, grad_pairs->d_x_hat);
      d_disg_feat = normalization_backward(pairs.y_hat, trace.disguised_norms, pairs.y_degenerate, grad_pairs->d_y_hat);
    }
    d_shared = branch_backward(model.true_branch, trace.true_branch, grad_true_logits,
                               d_true_feat ? &*d_true_feat : nullptr, g.true_branch);
    g.disguised_branch.emplace();
    d_shared += branch_backward(*model.disguised_branch, *trace.disguised_branch, grad_disg_logits,
                                d_disg_feat ? &*d_disg_feat : nullptr, *g.disguised_branch);
  } else {
    d_shared = branch_backward(model.true_branch, trace.true_branch, grad_true_logits, nullptr, g.true_branch);
  }

  g.masked.resize(model.masked_adapter.size());
  for (std::size_t k = model.masked_adapter.size(); k-- > 0;) {
    d_shared = block_backward(model.masked_adapter[k], trace.masked[k], std::move(d_shared), g.masked[k]);
  }
  return g;
}

std::vector<ParamSlot> parameter_slots(DsidModel& model) {
  std::vector<ParamSlot> out;
  for (std::size_t k = 0; k < model.masked_adapter.size(); ++k) {
    push_block(out, "masked." + std::to_string(k), model.masked_adapter[k]);
  }
  auto push_branch = [&out](const std::string& name, Branch& br) {
    for (std::size_t k = 0; k < br.adapter.size(); ++k) push_block(out, name + "." + std::to_string(k), br.adapter[k]);
    push_linear(out, name + ".head", br.head);
  };
  push_branch("true", model.true_branch);
  if (model.disguised_branch) push_branch("disguised", *model.disguised_branch);
  return out;
}

std::vector<std::span<const double>> gradient_slots(const ParamGrads& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& b : grads.masked) push_block_grad(out, b);
  push_branch_grad(out, grads.true_branch);
  if (grads.disguised_branch) push_branch_grad(out, *grads.disguised_branch);
  return out;
}

std::size_t parameter_count(const DsidModel& model) {
  std::size_t total = 0;
  auto block = [&total](const AdapterBlock& b) {
    total += static_cast<std::size_t>(b.linear.weight.size() + b.linear.bias.size() + b.bn.gamma.size() +
                                      b.bn.shift.size());
  };
  auto branch = [&](const Branch& br) {
    for (const auto& b : br.adapter) block(b);
    total += static_cast<std::size_t>(br.head.weight.size() + br.head.bias.size());
  };
  for (const auto& b : model.masked_adapter) block(b);
  branch(model.true_branch);
  if (model.disguised_branch) branch(*model.disguised_branch);
  return total;
}

}  // namespace dsid
