// Python bindings for the DSID core. Datasets cross the boundary as dicts of
// NumPy arrays so callers never see C++ record types.

#include "cli.hpp"

#include "dsid/dataio.hpp"
#include "dsid/errors.hpp"
#include "dsid/experiments.hpp"
#include "dsid/independence.hpp"
#include "dsid/kernels.hpp"
#include "dsid/metrics.hpp"
#include "dsid/objective.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace dsid;

namespace {

KernelConfig kernel_config(const std::string& kind, double sigma, bool median) {
  KernelConfig c;
  if (kind == "rbf") {
    c.kind = KernelKind::Rbf;
  } else if (kind == "linear") {
    c.kind = KernelKind::Linear;
  } else {
    throw std::invalid_argument("kernel must be 'rbf' or 'linear'");
  }
  c.sigma = sigma;
  c.median_heuristic = median;
  return c;
}

HsicMode hsic_mode(const std::string& mode) {
  if (mode == "paper") return HsicMode::PaperPerSample;
  if (mode == "classical") return HsicMode::ClassicalBiased;
  throw std::invalid_argument("mode must be 'paper' or 'classical'");
}

py::dict to_dict(const Dataset& d) {
  const auto n = static_cast<py::ssize_t>(d.size());
  py::array_t<int> subject(n), true_label(n), disguised_label(n);
  py::array_t<bool> apex(n);
  py::array_t<float> emb({n, static_cast<py::ssize_t>(d.d_emb)});
  auto s = subject.mutable_unchecked<1>();
  auto t = true_label.mutable_unchecked<1>();
  auto g = disguised_label.mutable_unchecked<1>();
  auto a = apex.mutable_unchecked<1>();
  auto e = emb.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& r = d.records[static_cast<std::size_t>(i)];
    s(i) = r.subject_id;
    t(i) = r.true_label;
    g(i) = r.disguised_label;
    a(i) = r.frame_type == FrameType::Apex;
    for (py::ssize_t j = 0; j < static_cast<py::ssize_t>(d.d_emb); ++j) e(i, j) = r.embedding[static_cast<std::size_t>(j)];
  }
  py::dict out;
  out["subject"] = subject;
  out["true_label"] = true_label;
  out["disguised_label"] = disguised_label;
  out["apex"] = apex;
  out["embedding"] = emb;
  return out;
}

Dataset from_dict(const py::dict& in) {
  const auto subject = py::array_t<int, py::array::forcecast>(in["subject"]);
  const auto true_label = py::array_t<int, py::array::forcecast>(in["true_label"]);
  const auto disguised_label = py::array_t<int, py::array::forcecast>(in["disguised_label"]);
  const auto apex = py::array_t<bool, py::array::forcecast>(in["apex"]);
  const auto emb = py::array_t<float, py::array::forcecast | py::array::c_style>(in["embedding"]);
  if (emb.ndim() != 2) throw std::invalid_argument("embedding must be a 2-D array");
  const auto n = emb.shape(0);
  for (const py::array* col : {static_cast<const py::array*>(&subject), static_cast<const py::array*>(&true_label),
                               static_cast<const py::array*>(&disguised_label), static_cast<const py::array*>(&apex)})
    if (col->ndim() != 1 || col->shape(0) != n) throw std::invalid_argument("column lengths differ");
  Dataset d;
  d.d_emb = static_cast<std::size_t>(emb.shape(1));
  const auto s = subject.unchecked<1>();
  const auto t = true_label.unchecked<1>();
  const auto g = disguised_label.unchecked<1>();
  const auto a = apex.unchecked<1>();
  const auto e = emb.unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    EmbeddingRecord r;
    r.subject_id = s(i);
    r.true_label = t(i);
    r.disguised_label = g(i);
    r.frame_type = a(i) ? FrameType::Apex : FrameType::Onset;
    for (py::ssize_t j = 0; j < emb.shape(1); ++j) r.embedding.push_back(e(i, j));
    d.records.push_back(std::move(r));
  }
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_dsid, m) {
  m.doc() = "Dual-stream disguised-expression recognition core";

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_ValueError);

  m.def(
      "kernel_eval",
      [](const Eigen::VectorXd& u, const Eigen::VectorXd& v, const std::string& kind, double sigma) {
        return kernel_eval(u, v, kernel_config(kind, sigma, false));
      },
      py::arg("u"), py::arg("v"), py::arg("kernel") = "rbf", py::arg("sigma") = 1.0);

  m.def(
      "hsic_per_sample",
      [](const Eigen::VectorXd& x_hat, const Eigen::VectorXd& y_hat, const std::string& kind, double sigma) {
        return hsic_per_sample({x_hat, y_hat}, kernel_config(kind, sigma, false));
      },
      py::arg("x_hat"), py::arg("y_hat"), py::arg("kernel") = "rbf", py::arg("sigma") = 1.0);

  m.def(
      "hsic_loss",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const std::string& mode, const std::string& kind,
         double sigma, bool median) {
        return hsic_batch_loss(FeaturePairs::from_raw(x, y), kernel_config(kind, sigma, median), hsic_mode(mode));
      },
      py::arg("x"), py::arg("y"), py::arg("mode") = "paper", py::arg("kernel") = "rbf", py::arg("sigma") = 1.0,
      py::arg("median") = false, "Batch HSIC loss of raw features; rows are L2-normalized first.");

  m.def(
      "permutation_test",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int n_perm, std::uint64_t seed, const std::string& kind,
         double sigma) {
        const auto r = permutation_independence_test(x, y, kernel_config(kind, sigma, false), n_perm, seed);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("x"), py::arg("y"), py::arg("n_perm") = 500, py::arg("seed") = 0, py::arg("kernel") = "rbf",
      py::arg("sigma") = 1.0, "Returns (statistic, p_value).");

  m.def(
      "cross_entropy",
      [](const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
        auto r = cross_entropy(logits, labels);
        return py::make_tuple(r.loss, r.grad_logits);
      },
      py::arg("logits"), py::arg("labels"), "Returns (mean loss, gradient w.r.t. logits).");

  m.def(
      "score",
      [](const std::vector<int>& predicted, const std::vector<int>& truth, int classes) {
        const auto s = score(predicted, truth, classes);
        return py::make_tuple(s.accuracy, s.macro_f1);
      },
      py::arg("predicted"), py::arg("truth"), py::arg("classes") = 6, "Returns (accuracy, macro F1).");

  m.def(
      "synth",
      [](int n_subjects, int samples_per_subject, int d_emb, double lambda, double noise_sigma,
         double subject_bias_sigma, std::uint64_t seed) {
        SynthConfig c;
        c.n_subjects = n_subjects;
        c.samples_per_subject = samples_per_subject;
        c.d_emb = d_emb;
        c.lambda = lambda;
        c.noise_sigma = noise_sigma;
        c.subject_bias_sigma = subject_bias_sigma;
        c.seed = seed;
        return to_dict(synth_generate(c));
      },
      py::arg("n_subjects") = 12, py::arg("samples_per_subject") = 40, py::arg("d_emb") = 64,
      py::arg("lam") = 0.8, py::arg("noise_sigma") = 0.6, py::arg("subject_bias_sigma") = 0.3, py::arg("seed") = 0);

  m.def("read_embeddings", [](const std::filesystem::path& p) { return to_dict(read_embeddings(p)); });
  m.def("write_embeddings", [](const py::dict& d, const std::filesystem::path& p) { write_embeddings(from_dict(d), p); });
  m.def("import_csv", [](const std::filesystem::path& p) { return to_dict(import_csv(p)); });
  m.def("export_csv", [](const py::dict& d, const std::filesystem::path& p) { export_csv(from_dict(d), p); });

  m.def(
      "run_loso",
      [](const py::dict& data, const std::string& method, double alpha, double beta, const std::string& mode,
         int epochs, int d_shared, int d_feat, int batch_size, std::uint64_t seed) {
        ObjectiveConfig obj;
        obj.alpha = alpha;
        obj.beta = beta;
        obj.hsic_mode = hsic_mode(mode);
        ModelDims dims;
        dims.d_shared = d_shared;
        dims.d_feat = d_feat;
        TrainConfig train;
        train.max_epochs = epochs;
        train.batch_size = batch_size;
        train.seed = seed;
        const auto dataset = from_dict(data);
        MethodRun run;
        {
          py::gil_scoped_release release;
          run = run_method(dataset, parse_method(method), dims, obj, train);
        }
        py::dict row;
        row["ter_accuracy"] = run.row.ter_accuracy;
        row["ter_f1"] = run.row.ter_f1;
        row["der_accuracy"] = run.row.der_accuracy;
        row["der_f1"] = run.row.der_f1;
        return row;
      },
      py::arg("data"), py::arg("method") = "dsid", py::arg("alpha") = 0.5, py::arg("beta") = 1.0,
      py::arg("mode") = "paper", py::arg("epochs") = 200, py::arg("d_shared") = 256, py::arg("d_feat") = 128,
      py::arg("batch_size") = 32, py::arg("seed") = 0,
      "Leave-one-subject-out run of one method; returns pooled TER/DER accuracy and macro F1.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line interface in-process; returns (exit code, stdout, stderr).");
}
