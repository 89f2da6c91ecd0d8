#include "c2g/bootstrap.hpp"

#include <algorithm>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/rng.hpp"

namespace c2g {

BootstrapEnsemble::BootstrapEnsemble(const CdeModel& model, int replicates, std::uint64_t seed)
    : model_(&model) {
  if (replicates < 1) throw ValidationError("bootstrap: need at least one replicate");
  const Index n = model.size();
  const std::uint64_t base = derive_seed(seed, stream::kBootstrap);
  counts_.assign(static_cast<std::size_t>(replicates), std::vector<int>(static_cast<std::size_t>(n), 0));
  for (int b = 0; b < replicates; ++b) {
    Rng rng = make_rng(base, static_cast<std::uint64_t>(b));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    auto& c = counts_[static_cast<std::size_t>(b)];
    for (Index i = 0; i < n; ++i) ++c[static_cast<std::size_t>(pick(rng))];
  }
}

std::vector<NeighborWeights> BootstrapEnsemble::neighbor_weights(const Eigen::VectorXd& query,
                                                                 Index exclude) const {
  const DistanceOrder order = order_by_distance(model_->x(), query, exclude);
  const Index k = model_->hyper().k;
  const double h1 = model_->hyper().h1;
  std::vector<NeighborWeights> out(counts_.size());
  std::vector<double> sq;
  std::vector<int> mult;
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    const auto& c = counts_[b];
    NeighborWeights& nw = out[b];
    sq.clear();
    mult.clear();
    Index taken = 0;
    for (std::size_t pos = 0; pos < order.rows.size() && taken < k; ++pos) {
      const Index row = order.rows[pos];
      const int available = c[static_cast<std::size_t>(row)];
      if (available == 0) continue;
      const int use = static_cast<int>(std::min<Index>(available, k - taken));
      nw.rows.push_back(row);
      sq.push_back(order.sq_dist[pos]);
      mult.push_back(use);
      taken += use;
    }
    nw.weights = covariate_weights(sq, h1);
    double total = 0.0;
    for (std::size_t i = 0; i < mult.size(); ++i) {
      nw.weights[i] *= mult[i];
      total += nw.weights[i];
    }
    for (double& w : nw.weights) w /= total;
  }
  return out;
}

DensityEnvelope envelope_from_replicates(const Eigen::MatrixXd& values, double q) {
  if (!(q > 0.0 && q <= 0.5)) throw ValidationError("bootstrap: q must lie in (0, 0.5]");
  const Index points = values.cols();
  DensityEnvelope env{Eigen::VectorXd(points), Eigen::VectorXd(points)};
  std::vector<double> column(static_cast<std::size_t>(values.rows()));
  for (Index j = 0; j < points; ++j) {
    for (Index b = 0; b < values.rows(); ++b) column[static_cast<std::size_t>(b)] = values(b, j);
    env.lower[j] = order_statistic(column, q);
    env.upper[j] = order_statistic(column, 1.0 - q);
  }
  return env;
}

DensityEnvelope bootstrap_envelopes(const CdeModel& model, const BootstrapConfig& config,
                                    const Eigen::MatrixXd& query_x,
                                    const Eigen::VectorXd& query_y) {
  if (query_x.rows() != query_y.size()) throw ValidationError("bootstrap: query shape mismatch");
  const BootstrapEnsemble ensemble(model, config.replicates, config.seed);
  const Index m = query_y.size();
  DensityEnvelope env{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  Eigen::MatrixXd values(config.replicates, 1);
  for (Index i = 0; i < m; ++i) {
    const auto reps = ensemble.neighbor_weights(query_x.row(i).transpose());
    for (int b = 0; b < config.replicates; ++b) {
      values(b, 0) = model.density(reps[static_cast<std::size_t>(b)], query_y[i]);
    }
    const DensityEnvelope one = envelope_from_replicates(values, config.q);
    env.lower[i] = one.lower[0];
    env.upper[i] = one.upper[0];
  }
  return env;
}

}  // namespace c2g
