#include "cli.hpp"

#include "dsid/checkpoint.hpp"
#include "dsid/dataio.hpp"
#include "dsid/errors.hpp"
#include "dsid/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace dsid::cli {

namespace fs = std::filesystem;

namespace {

std::string normalize_key(std::string key) {
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return c == '-' ? '_' : std::tolower(c); });
  return key;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Merged configuration: file values overridden by explicit flags.
class Settings {
 public:
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    double v = 0.0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("invalid number for " + key + ": '" + s + "'");
    return v;
  }

  long long integer(const std::string& key, long long fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("invalid integer for " + key + ": '" + s + "'");
    return v;
  }

  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(values.at(key));
    std::string item;
    Settings one;
    while (std::getline(ss, item, ',')) {
      one.values["v"] = trim(item);
      out.push_back(one.real("v", 0.0));
    }
    if (out.empty()) throw std::invalid_argument("empty list for " + key);
    return out;
  }
};

struct FlagSpec {
  const char* flag;
  const char* help;
};

const std::vector<FlagSpec> kModelFlags = {
    {"seed", "base random seed"},
    {"alpha", "HSIC loss weight"},
    {"beta", "disguised-emotion loss weight"},
    {"hsic-mode", "paper | classical"},
    {"kernel", "rbf | linear"},
    {"sigma", "RBF bandwidth, or 'median'"},
    {"monitor", "early-stopping monitor: heldout | inner"},
    {"jobs", "folds trained concurrently"},
    {"epochs", "maximum training epochs"},
    {"batch-size", "mini-batch size"},
    {"lr", "Adam learning rate"},
    {"weight-decay", "L2 weight decay"},
    {"dropout", "dropout probability"},
    {"patience", "early-stopping patience in epochs"},
    {"d-shared", "shared adapter width"},
    {"d-feat", "branch adapter width"},
    {"shared-depth", "blocks in the shared adapter"},
    {"branch-depth", "blocks per branch adapter"},
};

const std::vector<FlagSpec> kSynthFlags = {
    {"seed", "random seed"},
    {"lambda", "disguise intensity in [0, 1]"},
    {"subjects", "number of subjects"},
    {"samples-per-subject", "samples per subject"},
    {"d-emb", "embedding width"},
    {"noise-sigma", "per-sample noise standard deviation"},
    {"subject-bias-sigma", "per-subject offset standard deviation"},
};

std::vector<std::string> known_keys() {
  std::vector<std::string> keys = {"out", "methods", "param", "values", "held_out", "method", "data"};
  for (const auto* list : {&kModelFlags, &kSynthFlags}) {
    for (const auto& f : *list) keys.push_back(normalize_key(f.flag));
  }
  return keys;
}

ObjectiveConfig objective_from(const Settings& s) {
  ObjectiveConfig o;
  o.alpha = s.real("alpha", 0.5);
  o.beta = s.real("beta", 1.0);
  const auto mode = s.text("hsic_mode", "paper");
  if (mode == "paper") {
    o.hsic_mode = HsicMode::PaperPerSample;
  } else if (mode == "classical") {
    o.hsic_mode = HsicMode::ClassicalBiased;
  } else {
    throw std::invalid_argument("hsic-mode must be paper or classical");
  }
  const auto kernel = s.text("kernel", "rbf");
  if (kernel == "rbf") {
    o.kernel.kind = KernelKind::Rbf;
  } else if (kernel == "linear") {
    o.kernel.kind = KernelKind::Linear;
  } else {
    throw std::invalid_argument("kernel must be rbf or linear");
  }
  if (s.text("sigma", "") == "median") {
    o.kernel.median_heuristic = true;
  } else {
    o.kernel.sigma = s.real("sigma", 1.0);
  }
  o.validate();
  return o;
}

TrainConfig train_from(const Settings& s) {
  TrainConfig t;
  t.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
  t.max_epochs = static_cast<int>(s.integer("epochs", t.max_epochs));
  t.batch_size = static_cast<int>(s.integer("batch_size", t.batch_size));
  t.lr = s.real("lr", t.lr);
  t.weight_decay = s.real("weight_decay", t.weight_decay);
  t.dropout_p = s.real("dropout", t.dropout_p);
  t.patience = static_cast<int>(s.integer("patience", t.patience));
  t.jobs = static_cast<int>(s.integer("jobs", 1));
  const auto monitor = s.text("monitor", "heldout");
  if (monitor == "heldout") {
    t.monitor = Monitor::HeldOutFold;
  } else if (monitor == "inner") {
    t.monitor = Monitor::InnerHoldout;
  } else {
    throw std::invalid_argument("monitor must be heldout or inner");
  }
  t.validate();
  return t;
}

ModelDims dims_from(const Settings& s, std::size_t d_emb) {
  ModelDims d;
  d.d_emb = static_cast<int>(d_emb);
  d.d_shared = static_cast<int>(s.integer("d_shared", d.d_shared));
  d.d_feat = static_cast<int>(s.integer("d_feat", d.d_feat));
  d.shared_depth = static_cast<int>(s.integer("shared_depth", d.shared_depth));
  d.branch_depth = static_cast<int>(s.integer("branch_depth", d.branch_depth));
  d.validate();
  return d;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

class Manifest {
 public:
  void set(const std::string& key, const std::string& value) { lines_ += key + " = " + value + "\n"; }
  void set(const std::string& key, double value) { set(key, num(value)); }
  void comment(const std::string& c) { lines_ += "# " + c + "\n"; }
  const std::string& text() const { return lines_; }

 private:
  std::string lines_;
};

void record_config(Manifest& m, const ObjectiveConfig& o, const TrainConfig& t, const ModelDims& d) {
  m.set("seed", std::to_string(t.seed));
  m.set("alpha", o.alpha);
  m.set("beta", o.beta);
  m.set("hsic_mode", o.hsic_mode == HsicMode::PaperPerSample ? "paper" : "classical");
  m.set("kernel", o.kernel.kind == KernelKind::Rbf ? "rbf" : "linear");
  m.set("sigma", o.kernel.median_heuristic ? std::string("median") : num(o.kernel.sigma));
  m.set("monitor", t.monitor == Monitor::HeldOutFold ? "heldout" : "inner");
  m.set("epochs", std::to_string(t.max_epochs));
  m.set("batch_size", std::to_string(t.batch_size));
  m.set("lr", t.lr);
  m.set("weight_decay", t.weight_decay);
  m.set("dropout", t.dropout_p);
  m.set("patience", std::to_string(t.patience));
  m.set("adam_beta1", t.adam.beta1);
  m.set("adam_beta2", t.adam.beta2);
  m.set("adam_eps", t.adam.eps);
  m.set("d_emb", std::to_string(d.d_emb));
  m.set("d_shared", std::to_string(d.d_shared));
  m.set("d_feat", std::to_string(d.d_feat));
  m.set("shared_depth", std::to_string(d.shared_depth));
  m.set("branch_depth", std::to_string(d.branch_depth));
  m.set("fold_seed_rule", "seed + subject_id");
}

std::string fold_manifest(const FoldResult& f, std::uint64_t base_seed, const std::string& checkpoint) {
  Manifest m;
  m.comment("dsid fold manifest");
  m.set("subject", std::to_string(f.subject_id));
  m.set("fold_seed", std::to_string(base_seed + static_cast<std::uint64_t>(f.subject_id)));
  m.set("epochs_ran", std::to_string(f.epochs_ran));
  m.set("best_epoch", std::to_string(f.best_epoch));
  m.set("best_monitor_accuracy", f.best_monitor_accuracy);
  const auto& any_branch = f.true_branch ? f.true_branch : f.disguised_branch;
  if (any_branch) m.set("test_samples", std::to_string(any_branch->truth.size()));
  if (f.true_branch) {
    m.set("ter_accuracy", f.true_branch->score.accuracy);
    m.set("ter_f1", f.true_branch->score.macro_f1);
  }
  if (f.disguised_branch) {
    m.set("der_accuracy", f.disguised_branch->score.accuracy);
    m.set("der_f1", f.disguised_branch->score.macro_f1);
  }
  m.set("checkpoint", checkpoint);
  return m.text();
}

void write_folds(const fs::path& dir, const LosoResult& run, std::uint64_t seed) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < run.folds.size(); ++i) {
    const auto stem = "fold_" + std::to_string(run.folds[i].subject_id);
    save_checkpoint(run.models[i], dir / (stem + ".dsm"));
    write_text(dir / (stem + ".txt"), fold_manifest(run.folds[i], seed, stem + ".dsm"));
  }
}

void write_method_folds(const fs::path& dir, const MethodRun& mr, std::uint64_t seed) {
  if (mr.runs.size() == 2) {
    write_folds(dir / "ter", mr.runs[0], seed);
    write_folds(dir / "der", mr.runs[1], seed);
  } else {
    write_folds(dir, mr.runs[0], seed);
  }
}

void record_row(Manifest& m, const std::string& prefix, const MetricRow& r) {
  m.set(prefix + ".ter_accuracy", r.ter_accuracy);
  m.set(prefix + ".ter_f1", r.ter_f1);
  m.set(prefix + ".der_accuracy", r.der_accuracy);
  m.set(prefix + ".der_f1", r.der_f1);
  m.set(prefix + ".ter_fold_accuracy", r.ter_fold_accuracy);
  m.set(prefix + ".ter_fold_f1", r.ter_fold_f1);
  m.set(prefix + ".der_fold_accuracy", r.der_fold_accuracy);
  m.set(prefix + ".der_fold_f1", r.der_fold_f1);
}

void record_folds(Manifest& m, const std::string& prefix, const MethodRun& mr) {
  for (std::size_t r = 0; r < mr.runs.size(); ++r) {
    for (const auto& f : mr.runs[r].folds) {
      const auto p = prefix + ".fold." + std::to_string(f.subject_id);
      if (f.true_branch) {
        m.set(p + ".ter_accuracy", f.true_branch->score.accuracy);
        m.set(p + ".ter_f1", f.true_branch->score.macro_f1);
      }
      if (f.disguised_branch) {
        m.set(p + ".der_accuracy", f.disguised_branch->score.accuracy);
        m.set(p + ".der_f1", f.disguised_branch->score.macro_f1);
      }
    }
  }
}

fs::path prepare_out_dir(const Settings& s, bool force) {
  const fs::path out = s.text("out", "dsid_out");
  fs::create_directories(out);
  if (fs::exists(out / "manifest.txt") && !force) {
    throw std::invalid_argument("manifest already exists in " + out.string() + " (use --force)");
  }
  return out;
}

Dataset load_data(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("missing data path");
  const fs::path p(path);
  if (p.extension() == ".csv") return import_csv(p);
  return read_embeddings(p);
}

void emit_tables(const fs::path& dir, std::string_view first_col, const std::vector<MetricRow>& rows,
                 std::ostream& out) {
  const auto text = format_text_table(first_col, rows);
  write_text(dir / "results.txt", text);
  write_text(dir / "results.csv", format_csv_table(first_col, rows));
  out << text;
}

int cmd_synth(const Settings& s, std::ostream& out) {
  SynthConfig c;
  c.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
  c.lambda = s.real("lambda", c.lambda);
  c.n_subjects = static_cast<int>(s.integer("subjects", c.n_subjects));
  c.samples_per_subject = static_cast<int>(s.integer("samples_per_subject", c.samples_per_subject));
  c.d_emb = static_cast<int>(s.integer("d_emb", c.d_emb));
  c.noise_sigma = s.real("noise_sigma", c.noise_sigma);
  c.subject_bias_sigma = s.real("subject_bias_sigma", c.subject_bias_sigma);
  c.validate();
  const auto path = s.text("out", "");
  if (path.empty()) throw std::invalid_argument("synth requires --out <file>");
  const auto data = synth_generate(c);
  if (fs::path(path).extension() == ".csv") {
    export_csv(data, path);
  } else {
    write_embeddings(data, path);
  }
  out << "wrote " << path << ": subjects=" << c.n_subjects << " samples=" << data.size() << " d_emb=" << c.d_emb
      << " lambda=" << short_num(c.lambda) << " frame=" << (c.lambda >= 0.5 ? "apex" : "onset") << "\n";
  return kOk;
}

int cmd_train(const Settings& s, bool force, std::ostream& out) {
  const auto data = load_data(s.text("data", ""));
  if (!s.has("held_out")) throw std::invalid_argument("train requires --held-out <subject>");
  const int held_out = static_cast<int>(s.integer("held_out", 0));
  const auto obj_in = objective_from(s);
  auto train = train_from(s);
  auto dims = dims_from(s, data.d_emb);
  const auto method = parse_method(s.text("method", "dsid"));
  ObjectiveConfig obj = obj_in;
  if (method == Method::DsidNoHsic) obj.alpha = 0.0;
  if (method == Method::SingleStream) {
    dims.topology = Topology::SingleStream;
    dims.branch_depth = 0;
  }
  const auto dir = prepare_out_dir(s, force);
  const auto split = split_by_subject(data, held_out);
  train.seed += static_cast<std::uint64_t>(held_out);
  const auto trained = train_fold(split.train, split.test, dims, obj, train, held_out);
  save_checkpoint(trained.model, dir / "model.dsm");

  Manifest m;
  m.comment("dsid run manifest");
  m.set("command", "train");
  m.set("clock", utc_now());
  m.set("data", s.text("data", ""));
  m.set("method", std::string(method_name(method)));
  m.set("held_out", std::to_string(held_out));
  TrainConfig base = train;
  base.seed -= static_cast<std::uint64_t>(held_out);
  record_config(m, obj, base, dims);
  const auto fold_text = fold_manifest(trained.result, base.seed, "model.dsm");
  write_text(dir / "manifest.txt", m.text() + fold_text);
  out << fold_text;
  return kOk;
}

int run_methods(const Settings& s, bool force, const std::vector<Method>& methods, const std::string& command,
                std::ostream& out) {
  const auto data_path = s.text("data", "");
  const auto data = load_data(data_path);
  const auto obj = objective_from(s);
  const auto train = train_from(s);
  const auto dims = dims_from(s, data.d_emb);
  const auto dir = prepare_out_dir(s, force);

  Manifest m;
  m.comment("dsid run manifest");
  m.set("command", command);
  m.set("clock", utc_now());
  m.set("data", data_path);
  m.set("data_records", std::to_string(data.size()));
  m.set("data_subjects", std::to_string(data.subjects().size()));
  record_config(m, obj, train, dims);

  std::vector<MetricRow> rows;
  for (const auto method : canonical_order(methods)) {
    const auto mr = run_method(data, method, dims, obj, train);
    const std::string prefix = "method." + std::string(method_name(method));
    m.set(prefix + ".alpha", mr.objective.alpha);
    m.set(prefix + ".beta", mr.objective.beta);
    m.set(prefix + ".seed", std::to_string(train.seed));
    record_row(m, prefix, mr.row);
    record_folds(m, prefix, mr);
    write_method_folds(dir / "folds" / std::string(method_name(method)), mr, train.seed);
    rows.push_back(mr.row);
  }
  emit_tables(dir, "method", rows, out);
  write_text(dir / "manifest.txt", m.text());
  return kOk;
}

int cmd_sweep(const Settings& s, bool force, std::ostream& out) {
  const auto param = s.text("param", "");
  if (param != "alpha" && param != "beta") throw std::invalid_argument("--param must be alpha or beta");
  const auto values = s.reals("values", default_sweep_grid());
  for (double v : values) {
    if (!(v >= 0.0)) throw std::invalid_argument("sweep values must be non-negative");
  }
  const auto data_path = s.text("data", "");
  const auto data = load_data(data_path);
  const auto base_obj = objective_from(s);
  const auto train = train_from(s);
  const auto dims = dims_from(s, data.d_emb);
  const auto dir = prepare_out_dir(s, force);

  Manifest m;
  m.comment("dsid run manifest");
  m.set("command", "sweep");
  m.set("clock", utc_now());
  m.set("data", data_path);
  m.set("data_records", std::to_string(data.size()));
  m.set("data_subjects", std::to_string(data.subjects().size()));
  record_config(m, base_obj, train, dims);
  m.set("sweep_param", param);
  m.set(param == "alpha" ? "fixed_beta" : "fixed_alpha", param == "alpha" ? base_obj.beta : base_obj.alpha);

  std::vector<MetricRow> rows;
  for (double v : values) {
    ObjectiveConfig obj = base_obj;
    (param == "alpha" ? obj.alpha : obj.beta) = v;
    auto mr = run_method(data, Method::Dsid, dims, obj, train);
    mr.row.label = short_num(v);
    const std::string prefix = "value." + mr.row.label;
    m.set(prefix + ".alpha", obj.alpha);
    m.set(prefix + ".beta", obj.beta);
    record_row(m, prefix, mr.row);
    record_folds(m, prefix, mr);
    write_method_folds(dir / "folds" / (param + "=" + mr.row.label), mr, train.seed);
    rows.push_back(mr.row);
  }
  emit_tables(dir, param, rows, out);
  write_text(dir / "manifest.txt", m.text());
  return kOk;
}

std::string summarize_dataset(const Dataset& d) {
  std::ostringstream o;
  o << "records: " << d.size() << "\nd_emb: " << d.d_emb << "\nsubjects: " << d.subjects().size() << "\n";
  std::array<std::size_t, kNumEmotions> t{};
  std::array<std::size_t, kNumEmotions> g{};
  std::size_t apex = 0;
  for (const auto& r : d.records) {
    ++t[static_cast<std::size_t>(r.true_label)];
    ++g[static_cast<std::size_t>(r.disguised_label)];
    apex += r.frame_type == FrameType::Apex ? 1 : 0;
  }
  o << "apex_frames: " << apex << "\nonset_frames: " << d.size() - apex << "\ntrue_label_counts:";
  for (auto c : t) o << ' ' << c;
  o << "\ndisguised_label_counts:";
  for (auto c : g) o << ' ' << c;
  o << "\n";
  return o.str();
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const std::string_view m(magic, static_cast<std::size_t>(in.gcount()));
  if (m == "DSE1") {
    out << "format: DSE1 embeddings\n" << summarize_dataset(read_embeddings(path));
  } else if (m == "DSM1") {
    const auto model = load_checkpoint(path);
    const auto& d = model.dims;
    out << "format: DSM1 checkpoint\ntopology: " << (d.topology == Topology::DualStream ? "dual" : "single")
        << "\nd_emb: " << d.d_emb << "\nd_shared: " << d.d_shared << "\nd_feat: " << d.d_feat
        << "\nn_true: " << d.n_true << "\nn_disg: " << d.n_disg << "\nshared_depth: " << d.shared_depth
        << "\nbranch_depth: " << d.branch_depth << "\ndropout: " << short_num(d.dropout_p)
        << "\nparameters: " << parameter_count(model) << "\n";
  } else if (fs::path(path).extension() == ".csv") {
    out << "format: CSV embeddings\n" << summarize_dataset(import_csv(path));
  } else {
    in.seekg(0);
    std::ostringstream text;
    text << in.rdbuf();
    out << text.str();
  }
  return kOk;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    out[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stream independence decoupling experiments on embedding files", "dsid"};
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> flags;
  std::string config_path;
  bool force = false;
  std::string positional;
  std::map<CLI::App*, std::vector<std::pair<CLI::Option*, std::string>>> opts;

  auto add_flags = [&](CLI::App* sub, const std::vector<FlagSpec>& list) {
    for (const auto& f : list) {
      const auto key = normalize_key(f.flag);
      opts[sub].emplace_back(sub->add_option(std::string("--") + f.flag, flags[key], f.help), key);
    }
  };
  auto add_common = [&](CLI::App* sub, const char* out_help) {
    sub->add_option("--config", config_path, "key = value configuration file");
    opts[sub].emplace_back(sub->add_option("--out", flags["out"], out_help), "out");
  };
  auto add_run_flags = [&](CLI::App* sub) {
    add_common(sub, "output directory");
    add_flags(sub, kModelFlags);
    sub->add_flag("--force", force, "overwrite an existing manifest");
    opts[sub].emplace_back(sub->add_option("data", flags["data"], "embedding file (.dse or .csv)"), "data");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic embedding file");
  add_common(synth, "output file (.dse, or .csv)");
  add_flags(synth, kSynthFlags);

  auto* train = app.add_subcommand("train", "train one held-out-subject fold");
  add_run_flags(train);
  opts[train].emplace_back(train->add_option("--held-out", flags["held_out"], "held-out subject id"), "held_out");
  opts[train].emplace_back(train->add_option("--method", flags["method"], "single | dsid-nohsic | dsid"), "method");

  auto* loso = app.add_subcommand("loso", "leave-one-subject-out evaluation");
  add_run_flags(loso);
  opts[loso].emplace_back(loso->add_option("--methods", flags["methods"], "comma list of single,dsid-nohsic,dsid"), "methods");

  auto* sweep = app.add_subcommand("sweep", "LOSO over a grid of alpha or beta values");
  add_run_flags(sweep);
  opts[sweep].emplace_back(sweep->add_option("--param", flags["param"], "alpha | beta"), "param");
  opts[sweep].emplace_back(sweep->add_option("--values", flags["values"], "comma-separated values"), "values");

  auto* ablate = app.add_subcommand("ablate", "single-stream vs. DSID without HSIC vs. DSID");
  add_run_flags(ablate);

  auto* inspect = app.add_subcommand("inspect", "summarize a DSE1, DSM1, CSV or manifest file");
  inspect->add_option("path", positional, "file to inspect")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidArguments;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Settings s;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      s.values = parse_config_text(buf.str());
      const auto keys = known_keys();
      for (const auto& [k, v] : s.values) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw std::invalid_argument("unknown config key '" + k + "'");
      }
    }
    for (const auto& [opt, key] : opts[sub]) {
      if (opt->count() > 0) s.values[key] = flags[key];
    }

    if (sub == synth) return cmd_synth(s, out);
    if (sub == train) return cmd_train(s, force, out);
    if (sub == loso) {
      std::vector<Method> methods;
      std::stringstream ss(s.text("methods", "dsid"));
      std::string item;
      while (std::getline(ss, item, ',')) methods.push_back(parse_method(trim(item)));
      if (methods.empty()) throw std::invalid_argument("no methods requested");
      return run_methods(s, force, methods, "loso", out);
    }
    if (sub == sweep) return cmd_sweep(s, force, out);
    if (sub == ablate) {
      return run_methods(s, force, {Method::SingleStream, Method::DsidNoHsic, Method::Dsid}, "ablate", out);
    }
    return cmd_inspect(positional, out);
  } catch (const InvariantError& e) {
    err << "error: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidArguments;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}

}  // namespace dsid::cli
