// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// non-zero when any selected criterion fails.
//
//   dsid_acceptance [numerics|gradients|degeneracy|permutation|paradigm|ablation|protocol|linearity]...

#include "cli.hpp"

#include "dsid/dataio.hpp"
#include "dsid/experiments.hpp"
#include "dsid/independence.hpp"
#include "dsid/objective.hpp"
#include "dsid/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dsid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

Eigen::MatrixXd unit_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m = gaussian(rng, n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i).normalize();
  return m;
}

// ---------------------------------------------------------------------------

Outcome numerics() {
  const KernelConfig rbf{KernelKind::Rbf, 1.0, false};
  const KernelConfig lin{KernelKind::Linear, 1.0, false};
  const auto e0 = vec2(1, 0), e1 = vec2(0, 1);

  struct Case {
    const char* name;
    double got;
    double want;
  };
  std::vector<Case> cases;
  cases.push_back({"rbf", kernel_eval(e0, e1, rbf), std::exp(-1.0)});
  cases.push_back({"hsic_rbf", hsic_per_sample({e0, e1}, rbf), 0.39957640089372803});
  cases.push_back({"hsic_linear", hsic_per_sample({e0, e1}, lin), 1.0});

  FeaturePairs id;
  id.x_hat = id.y_hat = Eigen::MatrixXd::Identity(2, 2);
  id.x_degenerate = id.y_degenerate = {false, false};
  cases.push_back({"classical_n2", hsic_batch_loss(id, lin, HsicMode::ClassicalBiased), 1.0});

  const std::vector<int> labels{0, 1, 2, 3, 4, 5};
  cases.push_back({"cross_entropy", cross_entropy(Eigen::MatrixXd::Zero(6, 6), labels).loss, std::log(6.0)});

  std::vector<double> theta{1.0};
  const std::vector<double> g{1.0};
  std::vector<ParamSlot> slots{{"theta", theta, false}};
  AdamState state;
  adam_step(slots, std::vector<std::span<const double>>{g}, state, 5e-4, 0.0);
  cases.push_back({"adam_step1", theta[0], 1.0 - 5e-4 / (1.0 + 1e-8)});

  double worst = 0.0;
  std::string detail;
  for (const auto& c : cases) {
    const double err = std::abs(c.got - c.want);
    worst = std::max(worst, err);
    detail += std::string(c.name) + "=" + fmt("%.10g", c.got) + " ";
  }
  return {worst <= 1e-9, detail + "max_abs_err=" + fmt("%.3g", worst) + " (tol 1e-9)"};
}

Outcome gradients() {
  ModelDims dims;
  dims.d_emb = 16;
  dims.d_shared = 12;
  dims.d_feat = 8;
  dims.dropout_p = 0.0;
  std::mt19937_64 rng(2024);
  const Eigen::MatrixXd x = gaussian(rng, 4, 16);
  const std::vector<int> yt{0, 3, 5, 1}, yd{2, 4, 0, 3};
  const double h = 1e-5;

  double worst = 0.0;
  int checked = 0;
  for (auto mode : {HsicMode::PaperPerSample, HsicMode::ClassicalBiased}) {
    for (auto kind : {KernelKind::Rbf, KernelKind::Linear}) {
      auto model = init_params(dims, 100 + static_cast<int>(mode) * 2 + static_cast<int>(kind));
      for (auto& s : parameter_slots(model))
        for (double& v : s.values) v += 0.05 * std::sin(7.0 * v + 1.0);
      ObjectiveConfig obj;
      obj.alpha = 0.5;
      obj.beta = 1.0;
      obj.hsic_mode = mode;
      obj.kernel.kind = kind;
      auto loss = [&](const DsidModel& m) {
        const auto r = forward(m, x, Mode::Train, 0);
        return total_loss(r.true_logits, r.disg_logits, r.pairs, yt, yd, obj);
      };
      const auto r = forward(model, x, Mode::Train, 0);
      const auto l = total_loss(r.true_logits, r.disg_logits, r.pairs, yt, yd, obj);
      const auto param_grads = backward(model, r.trace, l.grad_true_logits, l.grad_disg_logits, &l.grad_pairs);
      const auto grads = gradient_slots(param_grads);
      auto params = parameter_slots(model);
      for (std::size_t s = 0; s < params.size(); ++s) {
        for (std::size_t i = 0; i < params[s].values.size(); ++i) {
          double& p = params[s].values[i];
          const double keep = p;
          p = keep + h;
          const double up = loss(model).total;
          p = keep - h;
          const double down = loss(model).total;
          p = keep;
          const double fd = (up - down) / (2.0 * h);
          const double a = grads[s][i];
          const double denom = std::max({std::abs(a), std::abs(fd), 1e-5});
          worst = std::max(worst, std::abs(a - fd) / denom);
          ++checked;
        }
      }
    }
  }
  return {worst < 1e-4, "params_checked=" + std::to_string(checked) + " max_rel_err=" + fmt("%.3g", worst) +
                            " (tol 1e-4, 2 modes x 2 kernels, h=1e-5)"};
}

Outcome degeneracy() {
  std::mt19937_64 rng(7);
  const KernelConfig rbf{KernelKind::Rbf, 1.0, false};
  int ok = 0;
  double min_cross = 1.0;
  for (int t = 0; t < 100; ++t) {
    const auto m = unit_rows(rng, 2, 8);
    const Eigen::VectorXd xh = m.row(0).transpose(), yh = m.row(1).transpose();
    if ((xh - yh).norm() == 0.0) continue;
    const double cross = hsic_per_sample({xh, yh}, rbf);
    const double self = hsic_per_sample({xh, xh}, rbf);
    min_cross = std::min(min_cross, cross);
    ok += (cross > 0.0 && self == 0.0) ? 1 : 0;
  }
  return {ok == 100, std::to_string(ok) + "/100 pairs with HSIC(x,y) > 0 = HSIC(x,x); min HSIC(x,y)=" +
                         fmt("%.3g", min_cross)};
}

Outcome permutation() {
  const KernelConfig rbf{KernelKind::Rbf, 1.0, false};
  std::mt19937_64 rng(11);
  const auto x = unit_rows(rng, 50, 8);
  const auto dep = permutation_independence_test(x, x, rbf, 500, 11);
  int kept = 0;
  std::string ps;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 r(seed);
    const auto a = unit_rows(r, 50, 8);
    const auto b = unit_rows(r, 50, 8);
    const auto res = permutation_independence_test(a, b, rbf, 500, seed);
    kept += res.p_value > 0.05 ? 1 : 0;
    ps += fmt("%.3f", res.p_value) + (seed < 10 ? "," : "");
  }
  return {dep.p_value <= 0.01 && kept >= 8, "dependent p=" + fmt("%.4f", dep.p_value) + " (<= 0.01); independent " +
                                                std::to_string(kept) + "/10 with p > 0.05 (>= 8) [" + ps + "]"};
}

Dataset synth_for(double lambda, std::uint64_t seed) {
  SynthConfig c;
  c.n_subjects = 12;
  c.samples_per_subject = 40;
  c.d_emb = 64;
  c.noise_sigma = 0.6;
  c.subject_bias_sigma = 0.3;
  c.lambda = lambda;
  c.seed = seed;
  return synth_generate(c);
}

TrainConfig default_train(std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  return t;
}

Outcome paradigm() {
  int ter_ok = 0, der_ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto onset = run_method(synth_for(0.2, seed), Method::SingleStream, ModelDims{}, ObjectiveConfig{},
                                  default_train(seed));
    const auto apex = run_method(synth_for(0.8, seed), Method::SingleStream, ModelDims{}, ObjectiveConfig{},
                                 default_train(seed));
    ter_ok += onset.row.ter_accuracy > apex.row.ter_accuracy ? 1 : 0;
    der_ok += apex.row.der_accuracy > onset.row.der_accuracy ? 1 : 0;
    detail += " seed" + std::to_string(seed) + ": TER onset/apex=" + fmt("%.4f", onset.row.ter_accuracy) + "/" +
              fmt("%.4f", apex.row.ter_accuracy) + " DER onset/apex=" + fmt("%.4f", onset.row.der_accuracy) + "/" +
              fmt("%.4f", apex.row.der_accuracy) + ";";
  }
  return {ter_ok >= 2 && der_ok >= 2, "TER onset>apex in " + std::to_string(ter_ok) + "/3, DER apex>onset in " +
                                          std::to_string(der_ok) + "/3 (need >= 2 each);" + detail};
}

Outcome ablation() {
  int der_ok = 0, ter_ok = 0;
  std::string detail;
  ObjectiveConfig obj;
  obj.alpha = 0.5;
  obj.beta = 1.0;
  obj.hsic_mode = HsicMode::ClassicalBiased;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto data = synth_for(0.8, seed);
    const auto train = default_train(seed);
    const auto single = run_method(data, Method::SingleStream, ModelDims{}, obj, train);
    const auto nohsic = run_method(data, Method::DsidNoHsic, ModelDims{}, obj, train);
    const auto full = run_method(data, Method::Dsid, ModelDims{}, obj, train);
    der_ok += nohsic.row.der_f1 >= single.row.der_f1 ? 1 : 0;
    ter_ok += full.row.ter_f1 >= nohsic.row.ter_f1 ? 1 : 0;
    detail += " seed" + std::to_string(seed) + ": DER F1 single/nohsic=" + fmt("%.4f", single.row.der_f1) + "/" +
              fmt("%.4f", nohsic.row.der_f1) + " TER F1 nohsic/dsid=" + fmt("%.4f", nohsic.row.ter_f1) + "/" +
              fmt("%.4f", full.row.ter_f1) + ";";
  }
  return {der_ok >= 2 && ter_ok >= 2, "DER F1 nohsic>=single in " + std::to_string(der_ok) +
                                          "/3, TER F1 dsid>=nohsic in " + std::to_string(ter_ok) +
                                          "/3 (need >= 2 each);" + detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome protocol() {
  // Partition law over random datasets.
  std::mt19937_64 rng(99);
  int partition_ok = 0;
  for (int t = 0; t < 100; ++t) {
    Dataset d;
    d.d_emb = 1 + rng() % 4;
    const int n = 2 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      EmbeddingRecord r;
      r.subject_id = 1 + static_cast<int>(rng() % 9);
      r.true_label = static_cast<int>(rng() % 6);
      r.disguised_label = (r.true_label + 1 + static_cast<int>(rng() % 5)) % 6;
      r.frame_type = rng() % 2 ? FrameType::Apex : FrameType::Onset;
      for (std::size_t j = 0; j < d.d_emb; ++j) r.embedding.push_back(static_cast<float>(rng() % 1000) / 7.0f);
      d.records.push_back(r);
    }
    std::multiset<std::pair<int, std::vector<float>>> all, seen_test;
    for (const auto& r : d.records) all.insert({r.subject_id, r.embedding});
    bool ok = true;
    for (int s : d.subjects()) {
      const auto split = split_by_subject(d, s);
      std::multiset<std::pair<int, std::vector<float>>> uni;
      for (const auto& r : split.test.records) {
        ok &= r.subject_id == s;
        uni.insert({r.subject_id, r.embedding});
        seen_test.insert({r.subject_id, r.embedding});
      }
      for (const auto& r : split.train.records) {
        ok &= r.subject_id != s;
        uni.insert({r.subject_id, r.embedding});
      }
      ok &= uni == all;
    }
    ok &= seen_test == all;
    partition_ok += ok ? 1 : 0;
  }

  // Bitwise DSE1 round trip.
  int roundtrip_ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig c;
    c.n_subjects = 3;
    c.samples_per_subject = 5;
    c.d_emb = 7;
    c.seed = seed;
    const auto bytes = encode_embeddings(synth_generate(c));
    roundtrip_ok += encode_embeddings(decode_embeddings(bytes)) == bytes ? 1 : 0;
  }

  // Two identical CLI LOSO runs.
  const fs::path dir = fs::temp_directory_path() / ("dsid_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  std::ostringstream sink;
  const auto data = (dir / "d.dse").string();
  int rc = cli::run({"synth", "--subjects", "4", "--samples-per-subject", "12", "--d-emb", "16", "--seed", "5",
                     "--out", data},
                    sink, sink);
  const std::vector<std::string> args = {"--methods", "single,dsid-nohsic,dsid", "--epochs", "5", "--seed", "5"};
  auto loso = [&](const std::string& out) {
    std::vector<std::string> a{"loso", data, "--out", out};
    a.insert(a.end(), args.begin(), args.end());
    return cli::run(a, sink, sink);
  };
  rc |= loso((dir / "a").string());
  rc |= loso((dir / "b").string());
  const bool same = rc == 0 && slurp(dir / "a" / "results.txt") == slurp(dir / "b" / "results.txt") &&
                    slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv") &&
                    !slurp(dir / "a" / "results.csv").empty();
  fs::remove_all(dir);

  return {partition_ok == 100 && roundtrip_ok == 20 && same,
          "partition " + std::to_string(partition_ok) + "/100, DSE1 round trip " + std::to_string(roundtrip_ok) +
              "/20, repeated loso tables " + (same ? "identical" : "DIFFER")};
}

Outcome linearity() {
  std::mt19937_64 rng(5);
  ModelDims dims;
  dims.d_emb = 16;
  dims.d_shared = 12;
  dims.d_feat = 8;
  const auto model = init_params(dims, 3);
  const auto r = forward(model, gaussian(rng, 8, 16), Mode::Train, 1);
  const std::vector<int> yt{0, 1, 2, 3, 4, 5, 0, 1}, yd{1, 2, 3, 4, 5, 0, 2, 3};
  double worst = 0.0;
  for (auto mode : {HsicMode::PaperPerSample, HsicMode::ClassicalBiased}) {
    auto at = [&](double alpha, double beta) {
      ObjectiveConfig o;
      o.alpha = alpha;
      o.beta = beta;
      o.hsic_mode = mode;
      return total_loss(r.true_logits, r.disg_logits, r.pairs, yt, yd, o).total;
    };
    // Affine in each weight: the midpoint equals the mean of the endpoints.
    worst = std::max(worst, std::abs(at(0.5, 1.0) - 0.5 * (at(0.0, 1.0) + at(1.0, 1.0))));
    worst = std::max(worst, std::abs(at(0.5, 0.5) - 0.5 * (at(0.5, 0.0) + at(0.5, 1.0))));
  }
  return {worst <= 1e-12, "max deviation from affine=" + fmt("%.3g", worst) + " (tol 1e-12)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"numerics", numerics},       {"gradients", gradients}, {"degeneracy", degeneracy},
      {"permutation", permutation}, {"paradigm", paradigm},   {"ablation", ablation},
      {"protocol", protocol},       {"linearity", linearity},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [name, check] : all) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << fmt("%.1f", secs) << "s] " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
