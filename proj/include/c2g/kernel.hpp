#pragma once

#include <cmath>

#include <Eigen/Core>

#include "c2g/error.hpp"

namespace c2g {

/// exp(-|a - b|^2 / (2 bandwidth^2)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rbf_kernel(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b,
                                     typename DerivedA::Scalar bandwidth) {
  using Scalar = typename DerivedA::Scalar;
  if (!(bandwidth > Scalar(0))) throw ValidationError("rbf_kernel: bandwidth must be positive");
  if (a.size() != b.size()) throw ValidationError("rbf_kernel: dimension mismatch");
  const Scalar sq = (a - b).squaredNorm();
  return std::exp(-sq / (Scalar(2) * bandwidth * bandwidth));
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> squared_distances(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto a_sq = a.rowwise().squaredNorm();
  const auto b_sq = b.rowwise().squaredNorm();
  Matrix d = (-Scalar(2) * a * b.transpose()).eval();
  d.colwise() += a_sq;
  d.rowwise() += b_sq.transpose();
  return d.cwiseMax(Scalar(0));
}

/// Gram matrix K(i, j) = rbf_kernel(a.row(i), b.row(j), bandwidth).
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kernel_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    typename DerivedA::Scalar bandwidth) {
  using Scalar = typename DerivedA::Scalar;
  if (!(bandwidth > Scalar(0))) throw ValidationError("kernel_matrix: bandwidth must be positive");
  const Scalar scale = Scalar(-1) / (Scalar(2) * bandwidth * bandwidth);
  return (squared_distances(a, b) * scale).array().exp().matrix();
}

/// Median pairwise distance over (at most 1000 evenly strided) rows.
double median_heuristic(const Eigen::MatrixXd& x);

}  // namespace c2g
