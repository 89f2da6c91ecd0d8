#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "c2g/cde.hpp"

namespace c2g {

struct BootstrapConfig {
  int replicates = 100;  // B
  double q = 0.05;       // lower level; the upper level is 1 - q
  std::uint64_t seed = 0;
};

/// Per-query density quantiles over bootstrap replicates of one group.
struct DensityEnvelope {
  Eigen::VectorXd lower;  // level q
  Eigen::VectorXd upper;  // level 1 - q
};

/// Row-resampled replicates of a fitted CdeModel with its hyperparameters held
/// fixed. Replicate b draws from its own seeded stream.
class BootstrapEnsemble {
 public:
  BootstrapEnsemble(const CdeModel& model, int replicates, std::uint64_t seed);

  int replicates() const { return static_cast<int>(counts_.size()); }
  const CdeModel& model() const { return *model_; }

  /// Neighbor weights of `query` under every replicate, leaving out every
  /// copy of row `exclude`.
  std::vector<NeighborWeights> neighbor_weights(const Eigen::VectorXd& query,
                                                Index exclude = -1) const;

 private:
  const CdeModel* model_;
  std::vector<std::vector<int>> counts_;  // multiplicity of each row per replicate
};

/// Column-wise order statistics of a replicates x points matrix at levels q
/// and 1 - q (rank ceil(level * B), 1-based).
DensityEnvelope envelope_from_replicates(const Eigen::MatrixXd& values, double q);

/// Envelopes of f(y_i | x_i) for query rows (x_i, y_i).
DensityEnvelope bootstrap_envelopes(const CdeModel& model, const BootstrapConfig& config,
                                    const Eigen::MatrixXd& query_x,
                                    const Eigen::VectorXd& query_y);

}  // namespace c2g
