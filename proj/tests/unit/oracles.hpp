#pragma once

// Test-only reference computations. Nothing here calls into the code path it
// is used to check.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace dsid::testing {

/// Central finite difference of f along every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                          double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = n(rng);
  return v / v.norm();
}

inline Eigen::MatrixXd random_unit_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = random_unit(rng, d).transpose();
  return m;
}

/// tr(K H L H) / (N-1)^2 with an explicitly materialized centering matrix.
inline double biased_hsic_reference(const Eigen::MatrixXd& k, const Eigen::MatrixXd& l) {
  const auto n = k.rows();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  return (k * h * l * h).trace() / static_cast<double>((n - 1) * (n - 1));
}

}  // namespace dsid::testing
