#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "c2g/types.hpp"

namespace c2g {

struct CdeHyper {
  double h1 = 1.0;  // covariate bandwidth
  double h2 = 1.0;  // outcome bandwidth
  Index k = 1;      // neighbor count
};

/// Normalized kernel weights over reference rows. A row may carry the weight
/// of several bootstrap copies.
struct NeighborWeights {
  IndexList rows;
  std::vector<double> weights;
};

/// Reference rows ordered by distance to `query` (ties by row index), with
/// their squared distances.
struct DistanceOrder {
  IndexList rows;
  std::vector<double> sq_dist;
};

DistanceOrder order_by_distance(const Eigen::MatrixXd& x, const Eigen::VectorXd& query,
                                Index exclude = -1);

/// Normal-kernel covariate weights exp(-d^2 / 2h1^2) normalized to sum to one.
/// Computed relative to the nearest distance so they cannot all underflow.
std::vector<double> covariate_weights(std::span<const double> sq_dist, double h1);

/// k-nearest-neighbor Rosenblatt conditional density estimate
/// f(y | x) = sum_i K_h1(x | x_ji) K_h2(y | y_ji) / sum_i K_h1(x | x_ji).
class CdeModel {
 public:
  CdeModel() = default;
  CdeModel(Eigen::MatrixXd x, Eigen::VectorXd y, CdeHyper hyper);

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const CdeHyper& hyper() const { return hyper_; }
  Index size() const { return y_.size(); }

  /// Weights of the k nearest reference rows, leaving out row `exclude`.
  NeighborWeights neighbor_weights(const Eigen::VectorXd& query, Index exclude = -1) const;

  double density(const NeighborWeights& nw, double y) const;
  Eigen::VectorXd density(const NeighborWeights& nw, const Eigen::VectorXd& ys) const;
  /// Conditional mean (the weighted neighbor outcome mean).
  double mean(const NeighborWeights& nw) const;

  double density(const Eigen::VectorXd& query, double y) const {
    return density(neighbor_weights(query), y);
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  CdeHyper hyper_;
};

double cde_eval(const CdeModel& model, const Eigen::VectorXd& x, double y);

/// Mean leave-one-out log density (1/n) sum_i log f_{-i}(y_i | x_i).
double cde_loo_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const CdeHyper& hyper);

struct CdeGrid {
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<Index> k;
};

/// h1 at median-heuristic x {1/8, 1/4, 1/2, 1}; h2 at sd(y) x {0.05, 0.1, 0.2,
/// 0.3, 0.5}; k in {5, 10, 20, 40, 80, 160}.
CdeGrid default_cde_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct CdeCandidate {
  CdeHyper hyper;
  double value = 0.0;  // mean leave-one-out log density
};

/// Objective at every grid triple with a feasible k, ordered by k, then h1,
/// then h2 (each ascending).
std::vector<CdeCandidate> cde_loo_table(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const CdeGrid& grid);

/// Maximizes the leave-one-out objective; ties go to smaller k, then smaller
/// h1, then smaller h2. Candidates with k >= n are skipped.
CdeModel cde_tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CdeGrid& grid);

/// One triple for both groups: maximizes the leave-one-out log density
/// summed over both groups. Same tie rule.
CdeHyper cde_tune_shared(const Eigen::MatrixXd& x0, const Eigen::VectorXd& y0,
                         const Eigen::MatrixXd& x1, const Eigen::VectorXd& y1,
                         const CdeGrid& grid);

/// Outcome kernel N(grid | y_r, h2^2) tabulated for every reference row, so
/// densities along a fixed grid reduce to weighted column sums.
class GridKernel {
 public:
  GridKernel(const CdeModel& model, const Eigen::VectorXd& grid);
  Eigen::VectorXd eval(const NeighborWeights& nw) const;
  const Eigen::VectorXd& grid() const { return grid_; }

 private:
  Eigen::VectorXd grid_;
  Eigen::MatrixXd table_;  // grid.size() x rows
};

}  // namespace c2g
