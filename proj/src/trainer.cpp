#include "dsid/trainer.hpp"

#include "dsid/random.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace dsid {

namespace {

enum StreamTag : std::uint64_t { kInit = 11, kShuffle = 12, kDropout = 13, kInnerSplit = 14 };

struct Split {
  Eigen::MatrixXd x;
  std::vector<int> true_labels;
  std::vector<int> disg_labels;
};

Split gather(const Eigen::MatrixXd& x, const std::vector<int>& yt, const std::vector<int>& yd,
             std::span<const std::size_t> idx) {
  Split s;
  s.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  s.true_labels.reserve(idx.size());
  s.disg_labels.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    s.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    s.true_labels.push_back(yt[idx[i]]);
    s.disg_labels.push_back(yd[idx[i]]);
  }
  return s;
}

Split to_split(const Dataset& d) { return {d.embeddings(), d.true_labels(), d.disguised_labels()}; }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

BranchOutcome outcome(const Eigen::MatrixXd& logits, const std::vector<int>& truth, int classes) {
  BranchOutcome o;
  o.predicted = predict_labels(logits);
  o.truth = truth;
  o.score = score(o.predicted, o.truth, classes);
  return o;
}

}  // namespace

void adam_step(std::span<const ParamSlot> params, std::span<const std::span<const double>> grads, AdamState& state,
               double lr, double weight_decay, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("parameter/gradient count mismatch");
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw std::invalid_argument("optimizer state shape mismatch");
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (params[s].values.size() != grads[s].size() || state.first_moment[s].size() != grads[s].size()) {
      throw std::invalid_argument("shape mismatch in slot " + params[s].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto theta = params[s].values;
    const auto g = grads[s];
    auto& m = state.first_moment[s];
    auto& v = state.second_moment[s];
    const double wd = params[s].decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + wd * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("dropout_p must be in [0, 1)");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw std::invalid_argument("lr and weight_decay must be >= 0");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

namespace {

double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  const auto pred = predict_labels(logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace

ForwardResult evaluate(const DsidModel& model, const Dataset& data) {
  return forward(model, data.embeddings(), Mode::Eval);
}

TrainedFold train_fold(const Dataset& train_set, const Dataset& eval_set, const ModelDims& dims_in,
                       const ObjectiveConfig& obj_cfg, const TrainConfig& cfg, int subject_id) {
  cfg.validate();
  obj_cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  if (eval_set.empty()) throw std::invalid_argument("empty evaluation set");
  if (train_set.d_emb != eval_set.d_emb) throw std::invalid_argument("train/eval embedding width mismatch");

  ModelDims dims = dims_in;
  if (dims.d_emb == 0) dims.d_emb = static_cast<int>(train_set.d_emb);
  if (static_cast<std::size_t>(dims.d_emb) != train_set.d_emb) {
    throw std::invalid_argument("model d_emb does not match the dataset");
  }
  dims.dropout_p = cfg.dropout_p;
  const bool dual = dims.topology == Topology::DualStream;
  const bool single_disguised = !dual && cfg.single_stream_target == Target::Disguised;

  const Split all_train = to_split(train_set);
  std::vector<std::size_t> fit_idx(train_set.size());
  std::iota(fit_idx.begin(), fit_idx.end(), std::size_t{0});
  Split monitor;
  if (cfg.monitor == Monitor::InnerHoldout) {
    Rng split_rng(derive_seed(cfg.seed, kInnerSplit));
    shuffle(fit_idx, split_rng);
    const std::size_t n_mon = (fit_idx.size() + 4) / 5;
    if (fit_idx.size() - n_mon < 2) throw std::invalid_argument("training set too small for an inner holdout");
    const std::vector<std::size_t> mon_idx(fit_idx.end() - static_cast<std::ptrdiff_t>(n_mon), fit_idx.end());
    fit_idx.resize(fit_idx.size() - n_mon);
    monitor = gather(all_train.x, all_train.true_labels, all_train.disg_labels, mon_idx);
  } else {
    monitor = to_split(eval_set);
  }
  if (fit_idx.size() < 2) throw std::invalid_argument("training set needs at least 2 samples");
  const Split fit = gather(all_train.x, all_train.true_labels, all_train.disg_labels, fit_idx);
  const std::size_t n_fit = fit_idx.size();

  TrainedFold out;
  out.result.subject_id = subject_id;
  DsidModel model = init_params(dims, derive_seed(cfg.seed, kInit));
  DsidModel best = model;
  AdamState adam;
  Rng shuffle_rng(derive_seed(cfg.seed, kShuffle));
  std::vector<std::size_t> order(n_fit);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto& head_monitor_labels = single_disguised ? monitor.disg_labels : monitor.true_labels;
  double best_acc = -1.0;
  int since_best = 0;
  std::uint64_t global_step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    int steps = 0;
    for (std::size_t start = 0; start < n_fit; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n_fit - start);
      // BatchNorm needs two samples; a trailing singleton batch is dropped.
      if (len < 2) continue;
      const Split batch = gather(fit.x, fit.true_labels, fit.disg_labels,
                                 std::span<const std::size_t>(order).subspan(start, len));
      const auto fwd = forward(model, batch.x, Mode::Train, derive_seed(cfg.seed, kDropout, global_step++));

      ParamGrads grads;
      if (dual) {
        const auto loss = total_loss(fwd.true_logits, fwd.disg_logits, fwd.pairs, batch.true_labels,
                                     batch.disg_labels, obj_cfg);
        grads = backward(model, fwd.trace, loss.grad_true_logits, loss.grad_disg_logits, &loss.grad_pairs);
        rec.true_loss += loss.components.true_loss;
        rec.disguised_loss += loss.components.disguised_loss;
        rec.hsic_loss += loss.components.hsic_loss;
        rec.total_loss += loss.total;
      } else {
        const auto ce = cross_entropy(fwd.true_logits, single_disguised ? batch.disg_labels : batch.true_labels);
        grads = backward(model, fwd.trace, ce.grad_logits, Eigen::MatrixXd(), nullptr);
        (single_disguised ? rec.disguised_loss : rec.true_loss) += ce.loss;
        rec.total_loss += ce.loss;
      }
      const auto slots = parameter_slots(model);
      const auto gslots = gradient_slots(grads);
      adam_step(slots, gslots, adam, cfg.lr, cfg.weight_decay, cfg.adam);
      commit_batch_stats(model, fwd.trace);
      ++steps;
    }
    if (steps > 0) {
      rec.true_loss /= steps;
      rec.disguised_loss /= steps;
      rec.hsic_loss /= steps;
      rec.total_loss /= steps;
    }

    const auto eval = forward(model, monitor.x, Mode::Eval);
    rec.monitor_accuracy = accuracy(eval.true_logits, head_monitor_labels);
    // A dual-stream model is trained on both tasks, so both heads count.
    if (dual) rec.monitor_accuracy = 0.5 * (rec.monitor_accuracy + accuracy(eval.disg_logits, monitor.disg_labels));
    out.result.history.push_back(rec);
    out.result.epochs_ran = epoch;

    // Strict improvement only: ties keep the earlier epoch.
    if (rec.monitor_accuracy > best_acc) {
      best_acc = rec.monitor_accuracy;
      best = model;
      out.result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  out.result.best_monitor_accuracy = best_acc;
  out.model = std::move(best);

  const Split test = to_split(eval_set);
  const auto fwd = forward(out.model, test.x, Mode::Eval);
  if (dual) {
    out.result.true_branch = outcome(fwd.true_logits, test.true_labels, dims.n_true);
    out.result.disguised_branch = outcome(fwd.disg_logits, test.disg_labels, dims.n_disg);
  } else if (single_disguised) {
    out.result.disguised_branch = outcome(fwd.true_logits, test.disg_labels, dims.n_true);
  } else {
    out.result.true_branch = outcome(fwd.true_logits, test.true_labels, dims.n_true);
  }
  return out;
}

LosoResult run_loso(const Dataset& dataset, const ModelDims& dims, const ObjectiveConfig& obj_cfg,
                    const TrainConfig& train_cfg) {
  train_cfg.validate();
  const auto subjects = dataset.subjects();
  if (subjects.size() < 2) throw std::invalid_argument("LOSO requires at least 2 subjects");

  LosoResult out;
  out.folds.resize(subjects.size());
  out.models.resize(subjects.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < subjects.size(); i = next++) {
      try {
        const auto split = split_by_subject(dataset, subjects[i]);
        TrainConfig fold_cfg = train_cfg;
        fold_cfg.seed = train_cfg.seed + static_cast<std::uint64_t>(subjects[i]);
        auto trained = train_fold(split.train, split.test, dims, obj_cfg, fold_cfg, subjects[i]);
        out.folds[i] = std::move(trained.result);
        out.models[i] = std::move(trained.model);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(train_cfg.jobs), subjects.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  auto pool = [&](auto member, int classes) -> std::optional<PooledScore> {
    std::vector<LabeledPredictions> preds;
    for (const auto& f : out.folds) {
      const auto& b = f.*member;
      if (!b) return std::nullopt;
      preds.push_back({b->predicted, b->truth});
    }
    return pool_folds(preds, classes);
  };
  out.true_summary = pool(&FoldResult::true_branch, dims.n_true);
  out.disguised_summary =
      pool(&FoldResult::disguised_branch, dims.topology == Topology::DualStream ? dims.n_disg : dims.n_true);
  return out;
}

}  // namespace dsid
