#pragma once

// Shared helpers for the unit tests: seeded random images and dense
// materialization of linear image operators for Eigen-based oracles.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "bphila/tensor.hpp"

namespace testing {

inline bphila::ImageTensor random_image(std::size_t h, std::size_t w, std::size_t c,
                                        std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  bphila::ImageTensor x(h, w, c);
  for (double& v : x.data()) v = u(rng);
  return x;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& e : v) e = g(rng);
  return v;
}

inline Eigen::VectorXd to_eigen(const bphila::ImageTensor& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data().data(), static_cast<Eigen::Index>(x.size()));
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline bphila::ImageTensor from_eigen(const Eigen::VectorXd& v, std::size_t h, std::size_t w,
                                      std::size_t c = 1) {
  return bphila::ImageTensor(h, w, c, std::vector<double>(v.data(), v.data() + v.size()));
}

// Columns are op(e_j) for the canonical basis of the input grid.
inline Eigen::MatrixXd materialize(
    const std::function<bphila::ImageTensor(const bphila::ImageTensor&)>& op, std::size_t h,
    std::size_t w, std::size_t c = 1) {
  const std::size_t n = h * w * c;
  Eigen::MatrixXd m;
  for (std::size_t j = 0; j < n; ++j) {
    bphila::ImageTensor e(h, w, c);
    e.data()[j] = 1.0;
    const Eigen::VectorXd col = to_eigen(op(e));
    if (j == 0) m.resize(col.size(), static_cast<Eigen::Index>(n));
    m.col(static_cast<Eigen::Index>(j)) = col;
  }
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double den = std::max(b.norm(), 1e-300);
  return (a - b).norm() / den;
}

}  // namespace testing
