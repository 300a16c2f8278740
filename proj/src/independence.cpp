#include "dsid/independence.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dsid {

FeaturePairs FeaturePairs::from_raw(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("kernel dimension mismatch");
  }
  FeaturePairs out;
  out.x_hat.resize(x.rows(), x.cols());
  out.y_hat.resize(y.rows(), y.cols());
  out.x_degenerate.resize(static_cast<std::size_t>(x.rows()));
  out.y_degenerate.resize(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto nx = l2_normalize(x.row(i).transpose());
    const auto ny = l2_normalize(y.row(i).transpose());
    out.x_hat.row(i) = nx.value.transpose();
    out.y_hat.row(i) = ny.value.transpose();
    out.x_degenerate[static_cast<std::size_t>(i)] = nx.degenerate;
    out.y_degenerate[static_cast<std::size_t>(i)] = ny.degenerate;
  }
  return out;
}

double hsic_per_sample(const FeaturePair& pair, const KernelConfig& cfg) {
  const double k_xy = kernel_eval(pair.x_hat, pair.y_hat, cfg);
  const double k_xx = kernel_eval(pair.x_hat, pair.x_hat, cfg);
  const double k_yy = kernel_eval(pair.y_hat, pair.y_hat, cfg);
  const double r = k_xy - k_xx * k_yy;
  return r * r;
}

KernelConfig resolve_bandwidth(const KernelConfig& cfg, const FeaturePairs& pairs) {
  if (cfg.kind != KernelKind::Rbf || !cfg.median_heuristic) return cfg;
  Eigen::MatrixXd all(pairs.x_hat.rows() + pairs.y_hat.rows(), pairs.x_hat.cols());
  all << pairs.x_hat, pairs.y_hat;
  KernelConfig out = cfg;
  out.sigma = median_heuristic_sigma(all);
  out.median_heuristic = false;
  return out;
}

namespace {

void check_batch(const FeaturePairs& pairs, HsicMode mode) {
  if (pairs.x_hat.rows() != pairs.y_hat.rows() || pairs.x_hat.cols() != pairs.y_hat.cols()) {
    throw std::invalid_argument("kernel dimension mismatch");
  }
  if (pairs.size() == 0) throw std::invalid_argument("empty batch");
  if (mode == HsicMode::ClassicalBiased && pairs.size() < 2) {
    throw std::invalid_argument("centering requires N >= 2");
  }
}

Eigen::MatrixXd center(const Eigen::MatrixXd& k) {
  // H K H without forming H: subtract row and column means, add back the grand mean.
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = k.mean();
  Eigen::MatrixXd c = k;
  c.colwise() -= row_mean;
  c.rowwise() -= col_mean;
  c.array() += grand;
  return c;
}

double biased_from_grams(const Eigen::MatrixXd& k, const Eigen::MatrixXd& l) {
  const double n = static_cast<double>(k.rows());
  return (center(k).cwiseProduct(center(l))).sum() / ((n - 1.0) * (n - 1.0));
}

}  // namespace

double hsic_biased(const Eigen::Ref<const Eigen::MatrixXd>& x_set,
                   const Eigen::Ref<const Eigen::MatrixXd>& y_set,
                   const KernelConfig& cfg) {
  if (x_set.rows() != y_set.rows()) throw std::invalid_argument("sample count mismatch");
  if (x_set.rows() < 2) throw std::invalid_argument("centering requires N >= 2");
  return biased_from_grams(gram_matrix(x_set, x_set, cfg), gram_matrix(y_set, y_set, cfg));
}

double hsic_batch_loss(const FeaturePairs& pairs, const KernelConfig& cfg_in, HsicMode mode) {
  check_batch(pairs, mode);
  const KernelConfig cfg = resolve_bandwidth(cfg_in, pairs);
  if (mode == HsicMode::ClassicalBiased) {
    return hsic_biased(pairs.x_hat, pairs.y_hat, cfg);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < pairs.size(); ++i) {
    total += hsic_per_sample(pairs.pair(i), cfg);
  }
  return total / static_cast<double>(pairs.size());
}

HsicGrad hsic_batch_grad(const FeaturePairs& pairs, const KernelConfig& cfg_in, HsicMode mode) {
  check_batch(pairs, mode);
  const KernelConfig cfg = resolve_bandwidth(cfg_in, pairs);
  const Eigen::Index n = pairs.size();
  HsicGrad g{Eigen::MatrixXd::Zero(n, pairs.x_hat.cols()), Eigen::MatrixXd::Zero(n, pairs.y_hat.cols())};

  if (mode == HsicMode::PaperPerSample) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd x = pairs.x_hat.row(i).transpose();
      const Eigen::VectorXd y = pairs.y_hat.row(i).transpose();
      const double k_xy = kernel_eval(x, y, cfg);
      const double k_xx = kernel_eval(x, x, cfg);
      const double k_yy = kernel_eval(y, y, cfg);
      const double r = k_xy - k_xx * k_yy;
      const auto g_xy = kernel_eval_grad(x, y, cfg);
      const auto g_xx = kernel_eval_grad(x, x, cfg);
      const auto g_yy = kernel_eval_grad(y, y, cfg);
      const double scale = 2.0 * r * inv_n;
      g.d_x_hat.row(i) = scale * (g_xy.d_u - k_yy * (g_xx.d_u + g_xx.d_v)).transpose();
      g.d_y_hat.row(i) = scale * (g_xy.d_v - k_xx * (g_yy.d_u + g_yy.d_v)).transpose();
    }
    return g;
  }

  // d tr(K H L H) / dK = H L H (symmetric), scaled by 1/(N-1)^2.
  const double nn = static_cast<double>(n);
  const double scale = 1.0 / ((nn - 1.0) * (nn - 1.0));
  const Eigen::MatrixXd k = gram_matrix(pairs.x_hat, pairs.x_hat, cfg);
  const Eigen::MatrixXd l = gram_matrix(pairs.y_hat, pairs.y_hat, cfg);
  const Eigen::MatrixXd dk = scale * center(l);
  const Eigen::MatrixXd dl = scale * center(k);

  auto accumulate = [&](const Eigen::MatrixXd& pts, const Eigen::MatrixXd& weight, Eigen::MatrixXd& out) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd a = pts.row(i).transpose();
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto kg = kernel_eval_grad(a, pts.row(j).transpose(), cfg);
        out.row(i) += weight(i, j) * kg.d_u.transpose();
        out.row(j) += weight(i, j) * kg.d_v.transpose();
      }
    }
  };
  accumulate(pairs.x_hat, dk, g.d_x_hat);
  accumulate(pairs.y_hat, dl, g.d_y_hat);
  return g;
}

PermutationTestResult permutation_independence_test(const Eigen::Ref<const Eigen::MatrixXd>& x_set,
                                                     const Eigen::Ref<const Eigen::MatrixXd>& y_set,
                                                     const KernelConfig& cfg, int n_perm,
                                                     std::uint64_t seed) {
  if (x_set.rows() != y_set.rows()) throw std::invalid_argument("sample count mismatch");
  if (x_set.rows() < 5) throw std::invalid_argument("permutation test requires N >= 5");
  if (n_perm < 100) throw std::invalid_argument("permutation test requires n_perm >= 100");

  const Eigen::Index n = x_set.rows();
  const double nn = static_cast<double>(n);
  const Eigen::MatrixXd kc = center(gram_matrix(x_set, x_set, cfg));
  const Eigen::MatrixXd l = gram_matrix(y_set, y_set, cfg);
  const double scale = 1.0 / ((nn - 1.0) * (nn - 1.0));

  // tr(Kc P L P^T) needs no re-centering of the permuted L since Kc is centered.
  auto permuted_stat = [&](const std::vector<Eigen::Index>& perm) {
    double stat = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto pi = perm[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j) {
        stat += kc(i, j) * l(pi, perm[static_cast<std::size_t>(j)]);
      }
    }
    return stat * scale;
  };

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  PermutationTestResult result;
  result.statistic = permuted_stat(perm);

  std::mt19937_64 rng(seed);
  int exceed = 0;
  for (int p = 0; p < n_perm; ++p) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    if (permuted_stat(perm) >= result.statistic) ++exceed;
  }
  result.p_value = (1.0 + exceed) / (1.0 + n_perm);
  return result;
}

}  // namespace dsid
