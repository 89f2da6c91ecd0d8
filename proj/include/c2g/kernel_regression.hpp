#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "c2g/kernel.hpp"
#include "c2g/types.hpp"

namespace c2g {

/// Kernel ridge regression fit: predict(x) = sum_j a_j k(x, x_j).
struct KrrModel {
  Eigen::MatrixXd train_x;
  Eigen::VectorXd dual_weights;
  double bandwidth = 1.0;
  double ridge = 0.0;
  Eigen::VectorXd hat_diag;  // diag of S = K (K + ridge I)^-1
  Eigen::VectorXd fitted;    // S y

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

KrrModel fit_krr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double bandwidth,
                 double ridge);

/// Generalized cross-validation score; +infinity when trace(I - S) vanishes.
double gcv_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double bandwidth,
                 double ridge);

struct KrrGrid {
  std::vector<double> bandwidths;
  std::vector<double> ridges;
};

/// Bandwidths at median-heuristic x {0.25, 0.5, 1, 2, 4}; ridges at
/// {1e-3, 1e-2, 1e-1, 1} x n.
KrrGrid default_krr_grid(const Eigen::MatrixXd& x);

/// Fit at the GCV minimizer. Ties go to the larger ridge, then the larger
/// bandwidth.
KrrModel tune_krr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const std::vector<double>& bandwidths, const std::vector<double>& ridges);

/// Closed-form leave-one-out predictions at the training points.
Eigen::VectorXd loo_predictions(const KrrModel& model, const Eigen::VectorXd& y);

/// Random Fourier feature map approximating the RBF kernel with the same
/// bandwidth convention: phi(x)_j = sqrt(2/D) cos(w_j . x + b_j).
struct RffMap {
  Eigen::MatrixXd frequencies;  // D x d
  Eigen::VectorXd phases;       // D
  double bandwidth = 1.0;
  std::uint64_t seed = 0;

  Index dim() const { return frequencies.rows(); }
  Eigen::MatrixXd features(const Eigen::MatrixXd& x) const;
};

RffMap make_rff_map(Index input_dim, double bandwidth, Index feature_dim, std::uint64_t seed);

Eigen::MatrixXd rff_features(const Eigen::MatrixXd& x, double bandwidth, Index feature_dim,
                             std::uint64_t seed);

}  // namespace c2g
