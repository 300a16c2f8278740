#include "dsid/dataio.hpp"

#include "binary_io.hpp"
#include "dsid/errors.hpp"
#include "dsid/random.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace dsid {

namespace {

constexpr std::string_view kMagic = "DSE1";

std::string check_record(const EmbeddingRecord& r, std::size_t d_emb) {
  if (r.subject_id < 0 || r.subject_id > 0xffff) return "subject id out of range";
  if (r.true_label < 0 || r.true_label >= kNumEmotions) return "true label out of range";
  if (r.disguised_label < 0 || r.disguised_label >= kNumEmotions) return "disguised label out of range";
  if (r.true_label == r.disguised_label) return "labels coincide";
  if (r.frame_type != FrameType::Onset && r.frame_type != FrameType::Apex) return "frame type out of range";
  if (r.embedding.size() != d_emb) return "embedding width mismatch";
  return {};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

Eigen::MatrixXd orthonormal_columns(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd g(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) g(r, c) = rng.normal();
  if (rows < cols) {
    // Cannot be orthonormal; unit-norm columns keep the signal scale comparable.
    g.colwise().normalize();
    return g;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

enum SynthTag : std::uint64_t { kTrueMixing = 1, kDisguiseMixing = 2, kSubjectBias = 3, kSamples = 4 };

}  // namespace

std::vector<int> Dataset::subjects() const {
  std::set<int> s;
  for (const auto& r : records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

Eigen::MatrixXd Dataset::embeddings() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d_emb));
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < d_emb; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].embedding[j];
    }
  }
  return m;
}

std::vector<int> Dataset::true_labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.true_label);
  return out;
}

std::vector<int> Dataset::disguised_labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.disguised_label);
  return out;
}

void Dataset::validate() const {
  if (d_emb < 1) throw InvariantError("d_emb must be >= 1");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto msg = check_record(records[i], d_emb);
    if (!msg.empty()) throw InvariantError(msg + " in record " + std::to_string(i));
  }
}

std::vector<char> encode_embeddings(const Dataset& dataset) {
  if (dataset.empty()) throw InvariantError("refusing to write an empty dataset");
  dataset.validate();
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(static_cast<std::uint32_t>(dataset.d_emb));
  for (const auto& r : dataset.records) {
    w.u16(static_cast<std::uint16_t>(r.subject_id));
    w.u8(static_cast<std::uint8_t>(r.true_label));
    w.u8(static_cast<std::uint8_t>(r.disguised_label));
    w.u8(static_cast<std::uint8_t>(r.frame_type));
    w.pad(3);
    for (float v : r.embedding) w.f32(v);
  }
  return w.data();
}

Dataset decode_embeddings(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  if (!r.has(4) || r.bytes(4) != kMagic) throw IoError("bad magic at byte 0");
  const auto version = r.u32();
  if (version != kEmbeddingVersion) {
    throw IoError("version mismatch at byte 4: expected " + std::to_string(kEmbeddingVersion) + ", got " +
                  std::to_string(version));
  }
  const auto n = r.u32();
  const auto d = r.u32();
  if (d == 0) throw IoError("d_emb is zero at byte 12");
  const std::size_t stride = 8 + 4 * static_cast<std::size_t>(d);
  if (r.remaining() < static_cast<std::size_t>(n) * stride) {
    const std::size_t complete = r.remaining() / stride;
    throw IoError("truncated record " + std::to_string(complete) + " at byte " +
                  std::to_string(kEmbeddingHeaderBytes + complete * stride));
  }

  Dataset out;
  out.d_emb = d;
  out.records.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    EmbeddingRecord rec;
    rec.subject_id = r.u16();
    rec.true_label = r.u8();
    rec.disguised_label = r.u8();
    const auto frame = r.u8();
    if (frame > 1) throw InvariantError("frame type out of range at byte " + std::to_string(at + 4));
    rec.frame_type = static_cast<FrameType>(frame);
    for (int p = 0; p < 3; ++p) {
      if (r.u8() != 0) throw IoError("nonzero padding at byte " + std::to_string(at + 5 + static_cast<std::size_t>(p)));
    }
    if (rec.true_label >= kNumEmotions) throw InvariantError("true label out of range at byte " + std::to_string(at + 2));
    if (rec.disguised_label >= kNumEmotions) {
      throw InvariantError("disguised label out of range at byte " + std::to_string(at + 3));
    }
    if (rec.true_label == rec.disguised_label) throw InvariantError("labels coincide at byte " + std::to_string(at + 2));
    rec.embedding.resize(d);
    for (auto& v : rec.embedding) v = r.f32();
    out.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) throw IoError("trailing bytes at byte " + std::to_string(r.offset()));
  return out;
}

void write_embeddings(const Dataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_embeddings(dataset));
}

Dataset read_embeddings(const std::filesystem::path& path) { return decode_embeddings(detail::read_file(path)); }

Dataset import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("row 1: missing header");
  const auto header = split_csv_line(line);
  static const std::vector<std::string> fixed = {"subject", "true_label", "disguised_label", "frame_type"};
  if (header.size() <= fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw IoError("row 1: header must be subject,true_label,disguised_label,frame_type,e0,...");
  }
  for (std::size_t j = fixed.size(); j < header.size(); ++j) {
    if (header[j] != "e" + std::to_string(j - fixed.size())) {
      throw IoError("row 1: expected column e" + std::to_string(j - fixed.size()) + ", got '" + header[j] + "'");
    }
  }

  Dataset out;
  out.d_emb = header.size() - fixed.size();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (cells.size() != header.size()) {
      throw IoError(where + "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    EmbeddingRecord rec;
    if (!parse_number(cells[0], rec.subject_id)) throw IoError(where + "non-numeric subject '" + cells[0] + "'");
    if (!parse_number(cells[1], rec.true_label)) throw IoError(where + "non-numeric true_label '" + cells[1] + "'");
    if (!parse_number(cells[2], rec.disguised_label)) {
      throw IoError(where + "non-numeric disguised_label '" + cells[2] + "'");
    }
    std::string frame = cells[3];
    std::transform(frame.begin(), frame.end(), frame.begin(), [](unsigned char c) { return std::tolower(c); });
    if (frame == "onset") {
      rec.frame_type = FrameType::Onset;
    } else if (frame == "apex") {
      rec.frame_type = FrameType::Apex;
    } else {
      throw InvariantError(where + "unknown frame_type '" + cells[3] + "'");
    }
    rec.embedding.resize(out.d_emb);
    for (std::size_t j = 0; j < out.d_emb; ++j) {
      if (!parse_number(cells[fixed.size() + j], rec.embedding[j])) {
        throw IoError(where + "non-numeric cell '" + cells[fixed.size() + j] + "'");
      }
    }
    const auto msg = check_record(rec, out.d_emb);
    if (!msg.empty()) throw InvariantError(where + msg);
    out.records.push_back(std::move(rec));
  }
  return out;
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "subject,true_label,disguised_label,frame_type";
  for (std::size_t j = 0; j < dataset.d_emb; ++j) out << ",e" << j;
  out << '\n';
  char buf[64];
  for (const auto& r : dataset.records) {
    out << r.subject_id << ',' << r.true_label << ',' << r.disguised_label << ','
        << (r.frame_type == FrameType::Apex ? "apex" : "onset");
    for (float v : r.embedding) {
      // Shortest round-trip representation.
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SubjectSplit split_by_subject(const Dataset& dataset, int held_out) {
  SubjectSplit s;
  s.train.d_emb = dataset.d_emb;
  s.test.d_emb = dataset.d_emb;
  for (const auto& r : dataset.records) {
    (r.subject_id == held_out ? s.test : s.train).records.push_back(r);
  }
  if (s.test.empty()) throw std::invalid_argument("unknown subject " + std::to_string(held_out));
  return s;
}

void SynthConfig::validate() const {
  if (n_subjects < 1 || samples_per_subject < 1 || d_emb < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (n_subjects > 0xffff) throw std::invalid_argument("too many subjects");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda out of range");
  if (!(noise_sigma >= 0.0) || !(subject_bias_sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
}

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd true_mix = orthonormal_columns(cfg.d_emb, kNumEmotions, derive_seed(cfg.seed, kTrueMixing));
  const Eigen::MatrixXd disg_mix = orthonormal_columns(cfg.d_emb, kNumEmotions, derive_seed(cfg.seed, kDisguiseMixing));
  constexpr int kPairs = kNumEmotions * (kNumEmotions - 1);

  Dataset out;
  out.d_emb = static_cast<std::size_t>(cfg.d_emb);
  out.records.reserve(static_cast<std::size_t>(cfg.n_subjects) * static_cast<std::size_t>(cfg.samples_per_subject));
  for (int s = 1; s <= cfg.n_subjects; ++s) {
    Rng bias_rng(derive_seed(cfg.seed, kSubjectBias, static_cast<std::uint64_t>(s)));
    Eigen::VectorXd bias(cfg.d_emb);
    for (int j = 0; j < cfg.d_emb; ++j) bias(j) = bias_rng.normal(0.0, 1.0) * cfg.subject_bias_sigma;

    Rng rng(derive_seed(cfg.seed, kSamples, static_cast<std::uint64_t>(s)));
    for (int k = 0; k < cfg.samples_per_subject; ++k) {
      const int pair = static_cast<int>(rng.below(kPairs));
      EmbeddingRecord rec;
      rec.subject_id = s;
      rec.true_label = pair / (kNumEmotions - 1);
      rec.disguised_label = (rec.true_label + 1 + pair % (kNumEmotions - 1)) % kNumEmotions;
      rec.frame_type = cfg.lambda >= 0.5 ? FrameType::Apex : FrameType::Onset;
      Eigen::VectorXd e = (1.0 - cfg.lambda) * true_mix.col(rec.true_label) +
                          cfg.lambda * disg_mix.col(rec.disguised_label) + bias;
      for (int j = 0; j < cfg.d_emb; ++j) e(j) += rng.normal(0.0, 1.0) * cfg.noise_sigma;
      rec.embedding.resize(static_cast<std::size_t>(cfg.d_emb));
      for (int j = 0; j < cfg.d_emb; ++j) rec.embedding[static_cast<std::size_t>(j)] = static_cast<float>(e(j));
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace dsid
