#include "dsid/checkpoint.hpp"

#include "binary_io.hpp"

namespace dsid {

namespace {

constexpr std::string_view kMagic = "DSM1";

// Visits every stored tensor in file order. Matrices are visited row-major.
template <class Model, class MatFn, class VecFn>
void visit_tensors(Model& m, MatFn&& mat, VecFn&& vec) {
  auto block = [&](auto& b) {
    mat(b.linear.weight);
    vec(b.linear.bias);
    vec(b.bn.gamma);
    vec(b.bn.shift);
    vec(b.bn.running_mean);
    vec(b.bn.running_var);
  };
  auto branch = [&](auto& br) {
    for (auto& b : br.adapter) block(b);
    mat(br.head.weight);
    vec(br.head.bias);
  };
  for (auto& b : m.masked_adapter) block(b);
  branch(m.true_branch);
  if (m.disguised_branch) branch(*m.disguised_branch);
}

}  // namespace

std::vector<char> encode_checkpoint(const DsidModel& model) {
  detail::ByteWriter w;
  const auto& d = model.dims;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(d.topology == Topology::DualStream ? 0U : 1U);
  for (int v : {d.d_emb, d.d_shared, d.d_feat, d.n_true, d.n_disg, d.shared_depth, d.branch_depth}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(d.dropout_p);
  const auto& bn = model.masked_adapter.front().bn;
  w.f64(bn.eps);
  w.f64(bn.momentum);
  visit_tensors(
      model,
      [&w](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
      },
      [&w](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
      });
  return w.data();
}

DsidModel decode_checkpoint(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  if (!r.has(4) || r.bytes(4) != kMagic) throw IoError("bad magic at byte 0");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version) + " at byte 4");
  ModelDims d;
  const auto topo = r.u32();
  if (topo > 1) throw IoError("bad topology at byte 8");
  d.topology = topo == 0 ? Topology::DualStream : Topology::SingleStream;
  for (int* field : {&d.d_emb, &d.d_shared, &d.d_feat, &d.n_true, &d.n_disg, &d.shared_depth, &d.branch_depth}) {
    *field = static_cast<int>(r.u32());
  }
  d.dropout_p = r.f64();
  const double eps = r.f64();
  const double momentum = r.f64();
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  // Allocate shapes, then overwrite every tensor from the file.
  DsidModel model = init_params(d, 0);
  visit_tensors(
      model,
      [&r](Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
      },
      [&r](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = r.f64();
      });
  if (r.remaining() != 0) throw IoError("trailing bytes at byte " + std::to_string(r.offset()));
  auto set_bn = [&](AdapterBlock& b) {
    b.bn.eps = eps;
    b.bn.momentum = momentum;
  };
  for (auto& b : model.masked_adapter) set_bn(b);
  for (auto& b : model.true_branch.adapter) set_bn(b);
  if (model.disguised_branch) {
    for (auto& b : model.disguised_branch->adapter) set_bn(b);
  }
  return model;
}

void save_checkpoint(const DsidModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(model));
}

DsidModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace dsid
