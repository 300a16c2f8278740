#include "dsid/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace dsid {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::SingleStream:
      return "single-stream";
    case Method::DsidNoHsic:
      return "dsid-nohsic";
    case Method::Dsid:
      return "dsid";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "single" || s == "single-stream" || s == "vit") return Method::SingleStream;
  if (s == "dsid-nohsic" || s == "nohsic") return Method::DsidNoHsic;
  if (s == "dsid") return Method::Dsid;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

std::vector<Method> canonical_order(std::vector<Method> methods) {
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  return methods;
}

namespace {

void fill(MetricRow& row, const PooledScore& s, bool ter) {
  (ter ? row.ter_accuracy : row.der_accuracy) = s.pooled.accuracy;
  (ter ? row.ter_f1 : row.der_f1) = s.pooled.macro_f1;
  (ter ? row.ter_fold_accuracy : row.der_fold_accuracy) = s.mean_fold_accuracy;
  (ter ? row.ter_fold_f1 : row.der_fold_f1) = s.mean_fold_macro_f1;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

MethodRun run_method(const Dataset& data, Method method, const ModelDims& dims_in, const ObjectiveConfig& obj,
                     const TrainConfig& train) {
  MethodRun out;
  out.method = method;
  out.objective = obj;
  out.row.label = std::string(method_name(method));
  ModelDims dims = dims_in;
  if (method == Method::SingleStream) {
    dims.topology = Topology::SingleStream;
    dims.branch_depth = 0;
    TrainConfig cfg = train;
    cfg.single_stream_target = Target::True;
    out.runs.push_back(run_loso(data, dims, obj, cfg));
    cfg.single_stream_target = Target::Disguised;
    out.runs.push_back(run_loso(data, dims, obj, cfg));
    fill(out.row, *out.runs[0].true_summary, true);
    fill(out.row, *out.runs[1].disguised_summary, false);
    return out;
  }
  dims.topology = Topology::DualStream;
  dims.branch_depth = std::max(dims.branch_depth, 1);
  if (method == Method::DsidNoHsic) out.objective.alpha = 0.0;
  out.runs.push_back(run_loso(data, dims, out.objective, train));
  fill(out.row, *out.runs[0].true_summary, true);
  fill(out.row, *out.runs[0].disguised_summary, false);
  return out;
}

std::string format_text_table(std::string_view first_column, const std::vector<MetricRow>& rows) {
  std::size_t w = first_column.size();
  for (const auto& r : rows) w = std::max(w, r.label.size());
  auto pad = [w](std::string_view s) { return std::string(s) + std::string(w - s.size(), ' '); };
  std::string out;
  out += pad(first_column) + " | TER acc | TER F1  | DER acc | DER F1 \n";
  out += std::string(w, '-') + "-+---------+---------+---------+--------\n";
  for (const auto& r : rows) {
    out += pad(r.label) + " | " + fixed4(r.ter_accuracy) + "  | " + fixed4(r.ter_f1) + "  | " +
           fixed4(r.der_accuracy) + "  | " + fixed4(r.der_f1) + "\n";
  }
  return out;
}

std::string format_csv_table(std::string_view first_column, const std::vector<MetricRow>& rows) {
  std::string out = std::string(first_column) +
                    ",ter_accuracy,ter_f1,der_accuracy,der_f1,ter_fold_accuracy,ter_fold_f1,der_fold_accuracy,"
                    "der_fold_f1\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.label.c_str(),
                  r.ter_accuracy, r.ter_f1, r.der_accuracy, r.der_f1, r.ter_fold_accuracy, r.ter_fold_f1,
                  r.der_fold_accuracy, r.der_fold_f1);
    out += buf;
  }
  return out;
}

std::vector<double> default_sweep_grid() { return {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}; }

}  // namespace dsid
