#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dsid {

inline constexpr int kNumEmotions = 6;

enum class FrameType : std::uint8_t { Onset = 0, Apex = 1 };

struct EmbeddingRecord {
  int subject_id = 0;
  int true_label = 0;
  int disguised_label = 0;
  FrameType frame_type = FrameType::Apex;
  std::vector<float> embedding;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct Dataset {
  std::size_t d_emb = 0;
  std::vector<EmbeddingRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  /// Sorted distinct subject ids.
  std::vector<int> subjects() const;
  /// Embeddings as an N x d_emb f64 matrix.
  Eigen::MatrixXd embeddings() const;
  std::vector<int> true_labels() const;
  std::vector<int> disguised_labels() const;
  /// Throws InvariantError on the first violated record invariant.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// --- "DSE1" binary embedding file ------------------------------------------
// magic "DSE1" | u32 version=1 | u32 n | u32 d_emb | n x record
// record = u16 subject | u8 true | u8 disguised | u8 frame | 3 zero bytes | d_emb x f32
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

std::vector<char> encode_embeddings(const Dataset& dataset);
Dataset decode_embeddings(const std::vector<char>& bytes);
void write_embeddings(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_embeddings(const std::filesystem::path& path);

/// CSV with header `subject,true_label,disguised_label,frame_type,e0,...`.
/// frame_type is "onset" or "apex", case-insensitive.
Dataset import_csv(const std::filesystem::path& path);
void export_csv(const Dataset& dataset, const std::filesystem::path& path);

struct SubjectSplit {
  Dataset train;
  Dataset test;
};

SubjectSplit split_by_subject(const Dataset& dataset, int held_out);

// --- Synthetic masked-expression embeddings ---------------------------------

struct SynthConfig {
  int n_subjects = 12;
  int samples_per_subject = 40;
  int d_emb = 64;
  /// Disguise intensity: 0 = pure true-emotion signal, 1 = pure disguise.
  double lambda = 0.8;
  double noise_sigma = 0.6;
  double subject_bias_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// embedding = (1 - lambda) A u_true + lambda B v_disguised + s_subject + noise,
/// with one-hot class codes, A and B seeded d_emb x 6 matrices with orthonormal
/// columns, s_subject ~ N(0, subject_bias_sigma^2 I), noise ~ N(0, noise_sigma^2 I).
/// (true, disguised) is drawn uniformly over the 30 pairs with distinct labels.
/// Subjects are numbered 1..n_subjects.
Dataset synth_generate(const SynthConfig& cfg);

}  // namespace dsid
